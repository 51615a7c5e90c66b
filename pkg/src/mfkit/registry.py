"""Durable registry for item reports, person reports, claims and enrolled
persons.

Persistence is an append-only checksummed record log plus an optional
snapshot (see recordlog). Every mutation validates first, then appends,
then applies in memory, so a failed append leaves no partial state and
replaying the log always reproduces the same store. Photos live in a
content-addressed blob directory next to the log.
"""

from __future__ import annotations

import hashlib
import threading
import uuid
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

from .errors import (
    AlreadyDecided,
    BadPage,
    ClaimNotFound,
    DuplicateOrigin,
    DuplicatePerson,
    EmptyEvidence,
    InvalidTransition,
    ReportNotClaimable,
    ReportNotFound,
    ValidationError,
)
from .recordlog import RecordLog, read_log

LOG_NAME = "registry.log"
SNAPSHOT_NAME = "snapshot.dat"
BLOB_DIR = "blobs"

MAX_PAGE_SIZE = 500


class ItemKind(str, Enum):
    FOUND = "FOUND"
    LOST = "LOST"


class ItemCategory(str, Enum):
    WATCH = "watch"
    PHONE = "phone"
    BAG = "bag"
    DOCUMENT = "document"
    JEWELRY = "jewelry"
    OTHER = "other"


class ItemStatus(str, Enum):
    OPEN = "OPEN"
    CLAIM_PENDING = "CLAIM_PENDING"
    RESOLVED = "RESOLVED"
    REJECTED = "REJECTED"


class PersonReportKind(str, Enum):
    MISSING = "MISSING"
    FOUND_ALIVE = "FOUND_ALIVE"
    DECEASED = "DECEASED"


class PersonReportStatus(str, Enum):
    OPEN = "OPEN"
    MATCH_PROPOSED = "MATCH_PROPOSED"
    CONFIRMED = "CONFIRMED"
    CLOSED = "CLOSED"


class ClaimDecision(str, Enum):
    PENDING = "PENDING"
    ACCEPTED = "ACCEPTED"
    DENIED = "DENIED"


# Allowed status edges. RESOLVED and REJECTED are terminal.
ITEM_TRANSITIONS = {
    (ItemStatus.OPEN, ItemStatus.CLAIM_PENDING),
    (ItemStatus.CLAIM_PENDING, ItemStatus.RESOLVED),
    (ItemStatus.CLAIM_PENDING, ItemStatus.OPEN),
    (ItemStatus.OPEN, ItemStatus.REJECTED),
}

PERSON_TRANSITIONS = {
    (PersonReportStatus.OPEN, PersonReportStatus.MATCH_PROPOSED),
    (PersonReportStatus.MATCH_PROPOSED, PersonReportStatus.CONFIRMED),
    (PersonReportStatus.MATCH_PROPOSED, PersonReportStatus.CLOSED),
    (PersonReportStatus.CONFIRMED, PersonReportStatus.CLOSED),
    (PersonReportStatus.OPEN, PersonReportStatus.CLOSED),
}


@dataclass(frozen=True)
class Origin:
    kiosk_id: str
    seq: int


@dataclass(frozen=True)
class ItemReport:
    kind: ItemKind
    category: ItemCategory
    description: str
    location: str
    report_id: str = ""
    photo_ref: Optional[str] = None
    claimed_at: Optional[str] = None   # client-claimed time, never used for ordering
    reported_at: str = ""              # server-assigned UTC at commit
    status: ItemStatus = ItemStatus.OPEN
    origin: Optional[Origin] = None


@dataclass(frozen=True)
class PersonReport:
    kind: PersonReportKind
    photo_ref: str
    location: str
    report_id: str = ""
    subject_person_id: Optional[str] = None  # enrolled identity a MISSING report refers to
    embedding: Optional[dict] = None         # {"coords": [...], "model_version": int}
    claimed_at: Optional[str] = None
    reported_at: str = ""
    status: PersonReportStatus = PersonReportStatus.OPEN
    matched_person_id: Optional[str] = None
    origin: Optional[Origin] = None


@dataclass(frozen=True)
class Claim:
    report_id: str
    claimant_name: str
    evidence_text: str = ""
    evidence_photo_ref: Optional[str] = None
    claim_id: str = ""
    filed_at: str = ""
    decision: ClaimDecision = ClaimDecision.PENDING


@dataclass(frozen=True)
class PersonRecord:
    person_id: str
    full_name: str
    nationality: str
    photo_refs: tuple[str, ...]
    group_id: Optional[str] = None
    enrolled_at: str = ""


def _now_utc() -> str:
    return datetime.now(timezone.utc).isoformat()


def _entity_dict(entity) -> dict:
    d = asdict(entity)
    for key, value in list(d.items()):
        if isinstance(value, Enum):
            d[key] = value.value
    return d


def _origin_from(d) -> Optional[Origin]:
    if d is None:
        return None
    return Origin(kiosk_id=d["kiosk_id"], seq=int(d["seq"]))


def item_from_dict(d: dict) -> ItemReport:
    return ItemReport(
        kind=ItemKind(d["kind"]),
        category=ItemCategory(d["category"]),
        description=d["description"],
        location=d["location"],
        report_id=d["report_id"],
        photo_ref=d.get("photo_ref"),
        claimed_at=d.get("claimed_at"),
        reported_at=d["reported_at"],
        status=ItemStatus(d["status"]),
        origin=_origin_from(d.get("origin")),
    )


def person_report_from_dict(d: dict) -> PersonReport:
    return PersonReport(
        kind=PersonReportKind(d["kind"]),
        photo_ref=d["photo_ref"],
        location=d["location"],
        report_id=d["report_id"],
        subject_person_id=d.get("subject_person_id"),
        embedding=d.get("embedding"),
        claimed_at=d.get("claimed_at"),
        reported_at=d["reported_at"],
        status=PersonReportStatus(d["status"]),
        matched_person_id=d.get("matched_person_id"),
        origin=_origin_from(d.get("origin")),
    )


def claim_from_dict(d: dict) -> Claim:
    return Claim(
        report_id=d["report_id"],
        claimant_name=d["claimant_name"],
        evidence_text=d.get("evidence_text", ""),
        evidence_photo_ref=d.get("evidence_photo_ref"),
        claim_id=d["claim_id"],
        filed_at=d["filed_at"],
        decision=ClaimDecision(d["decision"]),
    )


def person_record_from_dict(d: dict) -> PersonRecord:
    return PersonRecord(
        person_id=d["person_id"],
        full_name=d["full_name"],
        nationality=d["nationality"],
        photo_refs=tuple(d["photo_refs"]),
        group_id=d.get("group_id"),
        enrolled_at=d["enrolled_at"],
    )


def validate_item_report(report: ItemReport) -> None:
    if not isinstance(report.kind, ItemKind):
        raise ValidationError(f"bad item kind {report.kind!r}")
    if not isinstance(report.category, ItemCategory):
        raise ValidationError(f"bad category {report.category!r}")
    if not report.description.strip() and not report.photo_ref:
        raise ValidationError("an item report needs a description or a photo")
    if report.origin is not None and report.origin.seq < 1:
        raise ValidationError("origin seq must be positive")


def validate_person_report(report: PersonReport) -> None:
    if not isinstance(report.kind, PersonReportKind):
        raise ValidationError(f"bad person report kind {report.kind!r}")
    if not report.photo_ref:
        raise ValidationError("a person report needs a photo")
    if report.origin is not None and report.origin.seq < 1:
        raise ValidationError("origin seq must be positive")


def _dedup_fields(report) -> tuple:
    """Client-owned fields compared when the same origin key is submitted twice."""
    d = _entity_dict(report)
    for server_field in ("report_id", "reported_at", "status", "matched_person_id", "embedding"):
        d.pop(server_field, None)
    return tuple(sorted(d.items(), key=lambda kv: kv[0])), type(report).__name__


class BlobStore:
    """Content-addressed photo storage: files named by SHA-256 hex digest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.root / digest
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.rename(path)
        return digest

    def get(self, ref: str) -> bytes:
        path = self.root / ref
        if not path.exists():
            raise KeyError(ref)
        return path.read_bytes()

    def __contains__(self, ref: str) -> bool:
        return (self.root / ref).exists()


class Store:
    """The registry: validated mutations over an append-only log."""

    def __init__(
        self,
        data_dir: str | Path,
        *,
        fsync: bool = True,
        clock: Callable[[], str] = _now_utc,
        id_factory: Callable[[], str] = lambda: str(uuid.uuid4()),
        allow_truncated: bool = False,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._clock = clock
        self._new_id = id_factory
        self._lock = threading.RLock()

        self.items: dict[str, ItemReport] = {}
        self.person_reports: dict[str, PersonReport] = {}
        self.claims: dict[str, Claim] = {}
        self.persons: dict[str, PersonRecord] = {}
        self._origin_index: dict[tuple[str, int], str] = {}
        self._dedup_payloads: dict[tuple[str, int], tuple] = {}
        self.blobs = BlobStore(self.data_dir / BLOB_DIR)
        self.truncated_at: Optional[int] = None

        snapshot_path = self.data_dir / SNAPSHOT_NAME
        if snapshot_path.exists():
            snap_records, _ = read_log(snapshot_path)
            for record in snap_records:
                self._apply(record)
        log_records, truncated = read_log(
            self.data_dir / LOG_NAME, allow_truncated=allow_truncated
        )
        self.truncated_at = truncated
        for record in log_records:
            self._apply(record)
        self._log = RecordLog(self.data_dir / LOG_NAME, fsync=fsync)

    # -- plumbing --

    def close(self) -> None:
        self._log.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _commit(self, record: dict) -> None:
        self._log.append(record)
        self._apply(record)

    def _apply(self, record: dict) -> None:
        kind, data = record["type"], record["data"]
        if kind == "item_report":
            report = item_from_dict(data)
            self.items[report.report_id] = report
            if report.origin:
                key = (report.origin.kiosk_id, report.origin.seq)
                self._origin_index[key] = report.report_id
                self._dedup_payloads[key] = _dedup_fields(report)
        elif kind == "person_report":
            report = person_report_from_dict(data)
            self.person_reports[report.report_id] = report
            if report.origin:
                key = (report.origin.kiosk_id, report.origin.seq)
                self._origin_index[key] = report.report_id
                self._dedup_payloads[key] = _dedup_fields(report)
        elif kind == "person_record":
            person = person_record_from_dict(data)
            self.persons[person.person_id] = person
        elif kind == "claim":
            claim = claim_from_dict(data)
            self.claims[claim.claim_id] = claim
            report = self.items[claim.report_id]
            self.items[claim.report_id] = replace(report, status=ItemStatus.CLAIM_PENDING)
        elif kind == "claim_state":
            # snapshot form: stores the claim as-is, no status side effects
            claim = claim_from_dict(data)
            self.claims[claim.claim_id] = claim
        elif kind == "claim_decision":
            claim = self.claims[data["claim_id"]]
            decision = ClaimDecision(data["decision"])
            self.claims[claim.claim_id] = replace(claim, decision=decision)
            report = self.items[claim.report_id]
            new_status = ItemStatus.RESOLVED if decision is ClaimDecision.ACCEPTED else ItemStatus.OPEN
            self.items[claim.report_id] = replace(report, status=new_status)
        elif kind == "item_status":
            report = self.items[data["report_id"]]
            self.items[report.report_id] = replace(report, status=ItemStatus(data["status"]))
        elif kind == "person_report_update":
            report = self.person_reports[data["report_id"]]
            fields = {}
            if "status" in data:
                fields["status"] = PersonReportStatus(data["status"])
            if "matched_person_id" in data:
                fields["matched_person_id"] = data["matched_person_id"]
            if "embedding" in data:
                fields["embedding"] = data["embedding"]
            self.person_reports[report.report_id] = replace(report, **fields)
        else:
            raise ValueError(f"unknown record type {kind!r}")

    # -- reports --

    def submit_item_report(self, report: ItemReport) -> str:
        with self._lock:
            validate_item_report(report)
            if report.status is not ItemStatus.OPEN:
                raise ValidationError("new reports must be OPEN")
            if report.origin:
                key = (report.origin.kiosk_id, report.origin.seq)
                if key in self._origin_index:
                    if self._dedup_payloads[key] != _dedup_fields(report):
                        raise DuplicateOrigin(
                            f"origin {key} already used with a different payload"
                        )
                    return self._origin_index[key]
            committed = replace(report, report_id=self._new_id(), reported_at=self._clock())
            self._commit({"type": "item_report", "data": _entity_dict(committed)})
            return committed.report_id

    def submit_person_report(self, report: PersonReport) -> str:
        with self._lock:
            validate_person_report(report)
            if report.status is not PersonReportStatus.OPEN:
                raise ValidationError("new reports must be OPEN")
            if report.origin:
                key = (report.origin.kiosk_id, report.origin.seq)
                if key in self._origin_index:
                    if self._dedup_payloads[key] != _dedup_fields(report):
                        raise DuplicateOrigin(
                            f"origin {key} already used with a different payload"
                        )
                    return self._origin_index[key]
            committed = replace(report, report_id=self._new_id(), reported_at=self._clock())
            self._commit({"type": "person_report", "data": _entity_dict(committed)})
            return committed.report_id

    def get_report(self, report_id: str):
        report = self.items.get(report_id) or self.person_reports.get(report_id)
        if report is None:
            raise ReportNotFound(report_id)
        return report

    def has_origin(self, kiosk_id: str, seq: int) -> bool:
        return (kiosk_id, seq) in self._origin_index

    def high_water_seq(self, kiosk_id: str) -> int:
        seqs = [seq for k, seq in self._origin_index if k == kiosk_id]
        return max(seqs, default=0)

    def list_reports(
        self,
        *,
        kind: str | None = None,
        status: str | None = None,
        since: str | None = None,
        until: str | None = None,
        page: int = 1,
        page_size: int = 100,
    ) -> list:
        if not 1 <= page_size <= MAX_PAGE_SIZE:
            raise BadPage(f"page size must be 1..{MAX_PAGE_SIZE}, got {page_size}")
        if page < 1:
            raise BadPage(f"page must be >= 1, got {page}")

        def wanted(report) -> bool:
            if kind is not None and report.kind.value != kind:
                return False
            if status is not None and report.status.value != status:
                return False
            stamp = datetime.fromisoformat(report.reported_at)
            if since is not None and stamp < datetime.fromisoformat(since):
                return False
            if until is not None and stamp > datetime.fromisoformat(until):
                return False
            return True

        everything = list(self.items.values()) + list(self.person_reports.values())
        matching = [r for r in everything if wanted(r)]
        # reported_at desc, then report_id asc (two stable passes)
        matching.sort(key=lambda r: r.report_id)
        matching.sort(key=lambda r: r.reported_at, reverse=True)
        start = (page - 1) * page_size
        return matching[start:start + page_size]

    # -- claims --

    def file_claim(self, report_id: str, claim: Claim) -> str:
        with self._lock:
            report = self.items.get(report_id)
            if report is None:
                if report_id in self.person_reports:
                    raise ReportNotClaimable("person reports cannot be claimed")
                raise ReportNotFound(report_id)
            if report.status is not ItemStatus.OPEN:
                raise ReportNotClaimable(f"report is {report.status.value}")
            if not claim.evidence_text.strip() and not claim.evidence_photo_ref:
                raise EmptyEvidence("a claim needs evidence text or an evidence photo")
            if not claim.claimant_name.strip():
                raise ValidationError("claimant_name is required")
            committed = replace(
                claim,
                report_id=report_id,
                claim_id=self._new_id(),
                filed_at=self._clock(),
                decision=ClaimDecision.PENDING,
            )
            self._commit({"type": "claim", "data": _entity_dict(committed)})
            return committed.claim_id

    def resolve_claim(self, claim_id: str, decision: ClaimDecision) -> Claim:
        with self._lock:
            claim = self.claims.get(claim_id)
            if claim is None:
                raise ClaimNotFound(claim_id)
            if claim.decision is not ClaimDecision.PENDING:
                raise AlreadyDecided(f"claim already {claim.decision.value}")
            if decision not in (ClaimDecision.ACCEPTED, ClaimDecision.DENIED):
                raise ValidationError("decision must be ACCEPTED or DENIED")
            self._commit({
                "type": "claim_decision",
                "data": {"claim_id": claim_id, "decision": decision.value,
                         "decided_at": self._clock()},
            })
            return self.claims[claim_id]

    def reject_report(self, report_id: str) -> ItemReport:
        """Administrative kill for spam/invalid OPEN item reports; terminal."""
        with self._lock:
            report = self.items.get(report_id)
            if report is None:
                raise ReportNotFound(report_id)
            if (report.status, ItemStatus.REJECTED) not in ITEM_TRANSITIONS:
                raise InvalidTransition(f"cannot reject a {report.status.value} report")
            self._commit({
                "type": "item_status",
                "data": {"report_id": report_id, "status": ItemStatus.REJECTED.value},
            })
            return self.items[report_id]

    # -- person report updates --

    def attach_person_embedding(self, report_id: str, embedding: dict) -> PersonReport:
        with self._lock:
            if report_id not in self.person_reports:
                raise ReportNotFound(report_id)
            self._commit({
                "type": "person_report_update",
                "data": {"report_id": report_id, "embedding": embedding},
            })
            return self.person_reports[report_id]

    def set_person_report_status(
        self,
        report_id: str,
        status: PersonReportStatus,
        matched_person_id: Optional[str] = ...,
    ) -> PersonReport:
        with self._lock:
            report = self.person_reports.get(report_id)
            if report is None:
                raise ReportNotFound(report_id)
            if (report.status, status) not in PERSON_TRANSITIONS:
                raise InvalidTransition(f"{report.status.value} -> {status.value}")
            data = {"report_id": report_id, "status": status.value}
            if matched_person_id is not ...:
                data["matched_person_id"] = matched_person_id
            elif status in (PersonReportStatus.OPEN, PersonReportStatus.CLOSED):
                data["matched_person_id"] = None
            new_matched = data.get("matched_person_id", report.matched_person_id)
            if (new_matched is not None) != (
                status in (PersonReportStatus.MATCH_PROPOSED, PersonReportStatus.CONFIRMED)
            ):
                raise ValidationError(
                    "matched_person_id must be set exactly for MATCH_PROPOSED/CONFIRMED"
                )
            self._commit({"type": "person_report_update", "data": data})
            return self.person_reports[report_id]

    # -- enrollment records --

    def add_person(self, person: PersonRecord) -> str:
        with self._lock:
            if len(person.photo_refs) < 3:
                raise ValidationError("a person record needs at least 3 photos")
            if not person.full_name.strip():
                raise ValidationError("full_name is required")
            person_id = person.person_id or self._new_id()
            if person_id in self.persons:
                raise DuplicatePerson(person_id)
            committed = replace(person, person_id=person_id, enrolled_at=self._clock())
            self._commit({"type": "person_record", "data": _entity_dict(committed)})
            return person_id

    # -- maintenance --

    def write_snapshot(self) -> None:
        """Materialize current state into the snapshot file and reset the log."""
        with self._lock:
            tmp = self.data_dir / (SNAPSHOT_NAME + ".tmp")
            with RecordLog(tmp, fsync=True) as snap:
                for item in self.items.values():
                    snap.append({"type": "item_report", "data": _entity_dict(item)})
                for report in self.person_reports.values():
                    snap.append({"type": "person_report", "data": _entity_dict(report)})
                for person in self.persons.values():
                    snap.append({"type": "person_record", "data": _entity_dict(person)})
                for claim in self.claims.values():
                    record = _entity_dict(claim)
                    snap.append({"type": "claim_state", "data": record})
            tmp.rename(self.data_dir / SNAPSHOT_NAME)
            self._log.close()
            (self.data_dir / LOG_NAME).unlink(missing_ok=True)
            self._log = RecordLog(self.data_dir / LOG_NAME, fsync=self._log.fsync)
