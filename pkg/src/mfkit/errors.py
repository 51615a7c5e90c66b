"""Exception hierarchy shared by every subsystem.

Each exception carries a stable ``code`` string that the HTTP layer maps to
the error body ``{code, message, detail?}`` and the CLI maps to exit codes.
"""

from __future__ import annotations


class MFError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str = "", detail: object = None):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


# --- image decoding / vision ---

class MalformedHeader(MFError):
    code = "malformed_header"


class TruncatedPayload(MFError):
    code = "truncated_payload"


class UnsupportedFormat(MFError):
    code = "unsupported_format"


class ImageTooSmall(MFError):
    code = "image_too_small"


class BoxOutOfBounds(MFError):
    code = "box_out_of_bounds"


class TooFewVariations(MFError):
    code = "too_few_variations"


class BadImage(MFError):
    code = "bad_image"


# --- recognition ---

class TooFewChips(MFError):
    code = "too_few_chips"


class KOutOfRange(MFError):
    code = "k_out_of_range"


class ModelVersionMismatch(MFError):
    code = "model_version_mismatch"


class DegenerateModel(MFError):
    code = "degenerate_model"


class EmptyGallery(MFError):
    code = "empty_gallery"


class InsufficientGallery(MFError):
    code = "insufficient_gallery"


class DuplicatePerson(MFError):
    code = "duplicate_person"


class NoFaceDetected(MFError):
    code = "no_face_detected"


# --- registry / persistence ---

class CorruptLog(MFError):
    """Checksum mismatch while replaying a record log.

    ``offset`` is the byte offset of the first bad record; ``records_applied``
    is how many records replayed cleanly before it.
    """

    code = "corrupt_log"

    def __init__(self, message: str = "", offset: int = -1, records_applied: int = 0):
        super().__init__(message, detail={"offset": offset, "records_applied": records_applied})
        self.offset = offset
        self.records_applied = records_applied


class ValidationError(MFError):
    code = "validation_error"


class DuplicateOrigin(MFError):
    code = "duplicate_origin"


class ReportNotFound(MFError):
    code = "report_not_found"


class ReportNotClaimable(MFError):
    code = "report_not_claimable"


class EmptyEvidence(MFError):
    code = "empty_evidence"


class ClaimNotFound(MFError):
    code = "claim_not_found"


class AlreadyDecided(MFError):
    code = "already_decided"


class InvalidTransition(MFError):
    code = "invalid_transition"


class BadPage(MFError):
    code = "bad_page"


class PhotoNotFound(MFError):
    code = "photo_not_found"


class PayloadTooLarge(MFError):
    code = "payload_too_large"


# --- search ---

class EmptyQuery(MFError):
    code = "empty_query"


class UnbalancedQuote(MFError):
    code = "unbalanced_quote"


class DuplicateDocument(MFError):
    code = "duplicate_document"


class NotIndexed(MFError):
    code = "not_indexed"


# --- service / sync ---

class ChecksumMismatch(MFError):
    code = "checksum_mismatch"


class NonAscendingSeq(MFError):
    code = "non_ascending_seq"


class AuthFailure(MFError):
    code = "auth_failure"


class AlertNotFound(MFError):
    code = "alert_not_found"


class AlreadyAcknowledged(MFError):
    code = "already_acknowledged"


# --- kiosk client ---

class OutboxFull(MFError):
    code = "outbox_full"


class ServerUnreachable(MFError):
    code = "server_unreachable"
