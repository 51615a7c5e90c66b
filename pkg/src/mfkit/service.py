"""HTTP/JSON service tying vision, recognition, registry, search, sync
ingestion and alerting together.

All endpoints live under /api/v1 and authenticate with static bearer tokens
(roles: public, kiosk, staff, admin). State mutations funnel through the
registry's single-writer commit path; identify is read-only against the
published model/gallery snapshot.
"""

from __future__ import annotations

import base64
import json
import threading
import time
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response

from .config import ServiceConfig
from .errors import (
    AlertNotFound,
    ClaimNotFound,
    AlreadyAcknowledged,
    AlreadyDecided,
    AuthFailure,
    BadImage,
    BadPage,
    ChecksumMismatch,
    CorruptLog,
    DegenerateModel,
    DuplicateDocument,
    DuplicateOrigin,
    DuplicatePerson,
    EmptyEvidence,
    EmptyGallery,
    EmptyQuery,
    InsufficientGallery,
    InvalidTransition,
    MalformedHeader,
    MFError,
    ModelVersionMismatch,
    NoFaceDetected,
    NonAscendingSeq,
    NotIndexed,
    PayloadTooLarge,
    PhotoNotFound,
    ReportNotClaimable,
    ReportNotFound,
    TruncatedPayload,
    UnbalancedQuote,
    UnsupportedFormat,
    ValidationError,
)
from .imageio import decode_image
from .pipeline import enrollment_chips, extract_probe
from .recognition import (
    Embedding,
    Gallery,
    embed,
    enroll,
    identify,
    load_model_file,
    person_distance,
)
from .recordlog import RecordLog, canonical_json, crc32c, read_log
from .registry import (
    Claim,
    ClaimDecision,
    ItemCategory,
    ItemKind,
    ItemReport,
    ItemStatus,
    Origin,
    PersonRecord,
    PersonReport,
    PersonReportKind,
    PersonReportStatus,
    Store,
    _entity_dict,
)
from .search import InvertedIndex, parse_query

API_PREFIX = "/api/v1"

_STATUS_BY_ERROR = {
    MalformedHeader: 400,
    TruncatedPayload: 400,
    UnsupportedFormat: 400,
    BadImage: 400,
    ChecksumMismatch: 400,
    NonAscendingSeq: 400,
    AuthFailure: 403,
    ReportNotFound: 404,
    AlertNotFound: 404,
    ClaimNotFound: 404,
    EmptyGallery: 409,
    DegenerateModel: 409,
    DuplicatePerson: 409,
    DuplicateOrigin: 409,
    AlreadyDecided: 409,
    AlreadyAcknowledged: 409,
    ReportNotClaimable: 409,
    InvalidTransition: 409,
    ModelVersionMismatch: 409,
    NoFaceDetected: 422,
    ValidationError: 422,
    EmptyEvidence: 422,
    InsufficientGallery: 422,
    EmptyQuery: 422,
    UnbalancedQuote: 422,
    BadPage: 422,
    DuplicateDocument: 409,
    NotIndexed: 404,
    PhotoNotFound: 404,
    PayloadTooLarge: 413,
    CorruptLog: 500,
}


def http_status_for(err: MFError) -> int:
    for cls in type(err).__mro__:
        if cls in _STATUS_BY_ERROR:
            return _STATUS_BY_ERROR[cls]
    return 500


class Unauthorized(MFError):
    code = "unauthorized"


@dataclass(frozen=True)
class TokenInfo:
    token: str
    role: str
    kiosk_id: Optional[str] = None
    operator: str = ""

    @property
    def operator_id(self) -> str:
        return self.operator or f"{self.role}:{self.token[:6]}"


ROLES = ("public", "kiosk", "staff", "admin")


def load_tokens(path: str | Path) -> dict[str, TokenInfo]:
    raw = json.loads(Path(path).read_text())
    table = {}
    for entry in raw.get("tokens", []):
        role = entry["role"]
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r} in tokens file")
        info = TokenInfo(
            token=entry["token"],
            role=role,
            kiosk_id=entry.get("kiosk_id"),
            operator=entry.get("operator", ""),
        )
        table[info.token] = info
    return table


class AlertLog:
    """Durable operator alerts with per-pair dedup for person matches."""

    def __init__(self, path: str | Path, *, fsync: bool = True):
        self.path = Path(path)
        self.alerts: dict[str, dict] = {}
        self._pairs: set[tuple[str, str]] = set()
        self._lock = threading.RLock()
        records, _ = read_log(self.path)
        for record in records:
            self._apply(record)
        self._log = RecordLog(self.path, fsync=fsync)

    def _apply(self, record: dict) -> None:
        kind, data = record["type"], record["data"]
        if kind == "alert":
            self.alerts[data["alert_id"]] = data
            if data["kind"] == "PERSON_MATCH":
                payload = data["payload"]
                self._pairs.add((payload["missing_report_id"], payload["found_report_id"]))
        elif kind == "ack":
            self.alerts[data["alert_id"]]["acknowledged_by"] = data["operator"]

    def raise_alert(self, kind: str, payload: dict) -> Optional[dict]:
        """Append a new alert; PERSON_MATCH pairs are deduplicated."""
        with self._lock:
            if kind == "PERSON_MATCH":
                pair = (payload["missing_report_id"], payload["found_report_id"])
                if pair in self._pairs:
                    return None
            alert = {
                "alert_id": str(uuid.uuid4()),
                "kind": kind,
                "payload": payload,
                "raised_at": datetime.now(timezone.utc).isoformat(),
                "acknowledged_by": None,
            }
            record = {"type": "alert", "data": alert}
            self._log.append(record)
            self._apply(record)
            return alert

    def acknowledge(self, alert_id: str, operator: str) -> dict:
        with self._lock:
            alert = self.alerts.get(alert_id)
            if alert is None:
                raise AlertNotFound(alert_id)
            if alert["acknowledged_by"] is not None:
                raise AlreadyAcknowledged(alert_id)
            record = {"type": "ack", "data": {"alert_id": alert_id, "operator": operator}}
            self._log.append(record)
            self._apply(record)
            return self.alerts[alert_id]

    def list(self, ack: Optional[bool] = None) -> list[dict]:
        alerts = list(self.alerts.values())
        if ack is not None:
            alerts = [a for a in alerts if (a["acknowledged_by"] is not None) == ack]
        alerts.sort(key=lambda a: (a["raised_at"], a["alert_id"]))
        return alerts

    def close(self) -> None:
        self._log.close()


class MFService:
    """Application facade: every mutation path keeps store, index, gallery
    and alerts consistent before returning."""

    def __init__(self, config: ServiceConfig, *, fsync: bool = True, **store_kwargs):
        self.config = config
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        self.store = Store(data_dir, fsync=fsync, **store_kwargs)
        self.alerts = AlertLog(data_dir / "alerts.log", fsync=fsync)
        self.index = InvertedIndex()
        self.tokens: dict[str, TokenInfo] = (
            load_tokens(config.tokens_file) if config.tokens_file else {}
        )
        self.model = None
        self.gallery: Optional[Gallery] = None
        self._gallery_lock = threading.RLock()
        self._load_recognition_state()
        self._rebuild_index()

    # -- startup --

    def _load_recognition_state(self) -> None:
        model_path = self.config.resolved_model_file()
        if model_path.exists():
            self.model = load_model_file(model_path)
        gallery_path = self.config.resolved_gallery_file()
        if gallery_path.exists() and self.model is not None:
            raw = json.loads(gallery_path.read_text())
            entries = {
                pid: tuple(Embedding(coords, raw["model_version"]) for coords in vecs)
                for pid, vecs in raw["entries"].items()
            }
            self.gallery = Gallery(model_version=raw["model_version"], entries=entries)
        elif self.model is not None:
            self.gallery = Gallery(model_version=self.model.version)

    def _persist_gallery(self) -> None:
        gallery_path = self.config.resolved_gallery_file()
        payload = {
            "model_version": self.gallery.model_version,
            "entries": {
                pid: [list(map(float, e.coords)) for e in embeddings]
                for pid, embeddings in self.gallery.entries.items()
            },
        }
        tmp = gallery_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload))
        tmp.rename(gallery_path)

    def _rebuild_index(self) -> None:
        for report in self.store.items.values():
            self._index_report(report)
        for report in self.store.person_reports.values():
            self._index_report(report)

    # -- indexing --

    @staticmethod
    def _index_inputs(report):
        if isinstance(report, ItemReport):
            text = [report.description, report.location, report.category.value]
            facets = {
                "kind": report.kind.value,
                "category": report.category.value,
                "status": report.status.value,
                "location": report.location,
            }
        else:
            text = [report.location, report.kind.value.replace("_", " ")]
            facets = {
                "kind": report.kind.value,
                "status": report.status.value,
                "location": report.location,
            }
        return text, facets, report.reported_at

    def _index_report(self, report) -> None:
        text, facets, stamp = self._index_inputs(report)
        self.index.reindex_report(report.report_id, text, facets, stamp)

    # -- photo handling --

    def put_photo(self, data: bytes) -> str:
        try:
            decode_image(data)
        except MFError as err:
            raise BadImage(f"photo rejected: {err.message}") from err
        return self.store.blobs.put(data)

    # -- report submission --

    def submit_item(self, report: ItemReport) -> ItemReport:
        rid = self.store.submit_item_report(report)
        stored = self.store.get_report(rid)
        self._index_report(stored)
        return stored

    def submit_person(self, report: PersonReport) -> tuple[PersonReport, list[dict]]:
        rid = self.store.submit_person_report(report)
        stored = self.store.get_report(rid)
        self._index_report(stored)
        if stored.embedding is None and self.model is not None:
            embedding = self._embed_photo(stored.photo_ref)
            if embedding is not None:
                stored = self.store.attach_person_embedding(
                    rid, {"coords": [float(c) for c in embedding.coords],
                          "model_version": embedding.model_version},
                )
        raised = self.evaluate_person_matches(self.store.get_report(rid))
        return self.store.get_report(rid), raised

    def _embed_photo(self, photo_ref: str) -> Optional[Embedding]:
        try:
            image = decode_image(self.store.blobs.get(photo_ref))
            probe = extract_probe(image, self.config.detector)
        except (MFError, KeyError):
            return None
        return embed(self.model, probe.chip)

    # -- matching / alerts --

    def evaluate_person_matches(self, report: PersonReport) -> list[dict]:
        """Pair a new report against the opposite-kind OPEN reports; every
        pair within the threshold raises one PERSON_MATCH alert and moves
        both reports to MATCH_PROPOSED."""
        if self.model is None or self.gallery is None or not self.gallery.entries:
            return []
        theta = self.config.threshold
        pairs: list[tuple[float, PersonReport, PersonReport, str]] = []

        def gallery_distance(person_id: str, embedding_dict: dict) -> Optional[float]:
            if person_id not in self.gallery.entries:
                return None
            if embedding_dict["model_version"] != self.gallery.model_version:
                return None
            probe = Embedding(embedding_dict["coords"], embedding_dict["model_version"])
            return person_distance(self.gallery, person_id, probe)

        if report.kind in (PersonReportKind.FOUND_ALIVE, PersonReportKind.DECEASED):
            if report.embedding is None:
                return []
            for other in self.store.person_reports.values():
                if other.kind is not PersonReportKind.MISSING:
                    continue
                if other.status is not PersonReportStatus.OPEN:
                    continue
                if not other.subject_person_id:
                    continue
                d = gallery_distance(other.subject_person_id, report.embedding)
                if d is not None and d <= theta:
                    pairs.append((d, other, report, other.subject_person_id))
        elif report.kind is PersonReportKind.MISSING:
            if not report.subject_person_id:
                return []
            for other in self.store.person_reports.values():
                if other.kind not in (PersonReportKind.FOUND_ALIVE, PersonReportKind.DECEASED):
                    continue
                if other.status is not PersonReportStatus.OPEN:
                    continue
                if other.embedding is None:
                    continue
                d = gallery_distance(report.subject_person_id, other.embedding)
                if d is not None and d <= theta:
                    pairs.append((d, report, other, report.subject_person_id))

        raised = []
        pairs.sort(key=lambda p: p[0])
        for dist, missing, found, person_id in pairs:
            alert = self.alerts.raise_alert(
                "PERSON_MATCH",
                {
                    "missing_report_id": missing.report_id,
                    "found_report_id": found.report_id,
                    "person_id": person_id,
                    "distance": dist,
                },
            )
            if alert is None:
                continue
            raised.append(alert)
            for rep in (missing, found):
                current = self.store.get_report(rep.report_id)
                if current.status is PersonReportStatus.OPEN:
                    updated = self.store.set_person_report_status(
                        rep.report_id, PersonReportStatus.MATCH_PROPOSED, person_id
                    )
                    self._index_report(updated)
        return raised

    # -- identify --

    def identify_photo(self, photo: bytes, top_n: int, threshold: Optional[float]) -> dict:
        started = time.perf_counter()
        if top_n < 1:
            raise ValidationError(f"top_n must be >= 1, got {top_n}")
        if threshold is not None and threshold <= 0.0:
            raise ValidationError(f"threshold must be positive, got {threshold}")
        if self.model is None or self.gallery is None:
            raise EmptyGallery("no trained model/gallery loaded")
        if not self.gallery.entries:
            raise EmptyGallery("no persons enrolled")
        try:
            image = decode_image(photo)
        except (MalformedHeader, TruncatedPayload, UnsupportedFormat) as err:
            raise BadImage(f"cannot decode photo: {err.message}") from err
        probe = extract_probe(image, self.config.detector)
        embedding = embed(self.model, probe.chip)
        theta = threshold if threshold is not None else self.config.threshold
        matches = identify(self.gallery, embedding, top_n=top_n, threshold=theta)
        summaries = []
        for m in matches:
            person = self.store.persons.get(m.person_id)
            summaries.append({
                "person_id": m.person_id,
                "distance": m.distance,
                "rank": m.rank,
                "full_name": person.full_name if person else None,
                "nationality": person.nationality if person else None,
                "group_id": person.group_id if person else None,
            })
        return {
            "matches": summaries,
            "face_box": {"x": probe.box.x, "y": probe.box.y,
                         "w": probe.box.w, "h": probe.box.h,
                         "score": probe.box.score},
            "model_version": self.model.version,
            "threshold": theta,
            "elapsed_ms": (time.perf_counter() - started) * 1000.0,
        }

    # -- enrollment --

    def enroll_person(
        self,
        full_name: str,
        nationality: str,
        photos: list[bytes],
        group_id: Optional[str] = None,
    ) -> PersonRecord:
        if self.model is None:
            raise EmptyGallery("no trained model loaded; train before enrolling")
        if len(photos) < 3:
            raise InsufficientGallery(f"enrollment needs >= 3 photos, got {len(photos)}")
        chips = []
        refs = []
        for data in photos:
            image = decode_image(data)
            chips.extend(enrollment_chips(image, self.config.detector))
            refs.append(self.store.blobs.put(data))
        person_id = str(uuid.uuid4())
        with self._gallery_lock:
            new_gallery = enroll(self.gallery, person_id, chips, self.model)
            record = PersonRecord(
                person_id=person_id,
                full_name=full_name,
                nationality=nationality,
                photo_refs=tuple(refs),
                group_id=group_id,
            )
            self.store.add_person(record)
            self.gallery = new_gallery
            self._persist_gallery()
        return self.store.persons[person_id]

    # -- sync ingestion --

    def ingest_sync_batch(self, batch: dict, auth: TokenInfo) -> dict:
        kiosk_id = batch.get("kiosk_id", "")
        if auth.role == "kiosk" and auth.kiosk_id != kiosk_id:
            raise AuthFailure(f"credential is for kiosk {auth.kiosk_id!r}, batch says {kiosk_id!r}")
        reports = batch.get("reports", [])
        checksum = batch.get("checksum")
        expected = crc32c(canonical_json(reports))
        if checksum != expected:
            raise ChecksumMismatch(f"batch checksum {checksum} != {expected}")
        seqs = [entry.get("seq") for entry in reports]
        if any(not isinstance(s, int) or s < 1 for s in seqs):
            raise NonAscendingSeq("every entry needs a positive integer seq")
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            raise NonAscendingSeq(f"seqs not strictly ascending: {seqs}")

        accepted = duplicates = 0
        for entry in reports:
            seq = entry["seq"]
            if self.store.has_origin(kiosk_id, seq):
                duplicates += 1
                continue
            payload = entry["report"]
            self._apply_sync_report(kiosk_id, seq, payload)
            accepted += 1
        return {
            "kiosk_id": kiosk_id,
            "high_water_seq": self.store.high_water_seq(kiosk_id),
            "accepted": accepted,
            "duplicates": duplicates,
        }

    def _apply_sync_report(self, kiosk_id: str, seq: int, payload: dict) -> None:
        origin = Origin(kiosk_id=kiosk_id, seq=seq)
        photo_ref = None
        if payload.get("photo_b64"):
            photo_ref = self.put_photo(base64.b64decode(payload["photo_b64"]))
        if payload.get("type") == "person":
            report = PersonReport(
                kind=PersonReportKind(payload["kind"]),
                photo_ref=photo_ref or "",
                location=payload.get("location", ""),
                subject_person_id=payload.get("subject_person_id"),
                claimed_at=payload.get("claimed_at"),
                origin=origin,
            )
            self.submit_person(report)
        else:
            report = ItemReport(
                kind=ItemKind(payload["kind"]),
                category=ItemCategory(payload.get("category", "other")),
                description=payload.get("description", ""),
                location=payload.get("location", ""),
                photo_ref=photo_ref,
                claimed_at=payload.get("claimed_at"),
                origin=origin,
            )
            self.submit_item(report)

    # -- claims --

    def file_claim(self, report_id: str, claim: Claim) -> tuple[str, dict]:
        claim_id = self.store.file_claim(report_id, claim)
        self._index_report(self.store.get_report(report_id))
        alert = self.alerts.raise_alert(
            "CLAIM_FILED", {"report_id": report_id, "claim_id": claim_id}
        )
        return claim_id, alert

    def decide_claim(self, claim_id: str, decision: ClaimDecision) -> Claim:
        claim = self.store.resolve_claim(claim_id, decision)
        self._index_report(self.store.get_report(claim.report_id))
        return claim

    def close(self) -> None:
        self.store.close()
        self.alerts.close()


# ---------------------------------------------------------------------------
# FastAPI wiring
# ---------------------------------------------------------------------------

def report_json(report) -> dict:
    d = _entity_dict(report)
    if "embedding" in d:
        d["has_embedding"] = d.pop("embedding") is not None
    return d


def create_app(service: MFService) -> FastAPI:
    app = FastAPI(title="missing-and-found service", docs_url=None, redoc_url=None)
    app.state.service = service
    max_upload = service.config.max_upload_bytes

    @app.exception_handler(MFError)
    async def mf_error_handler(request: Request, err: MFError):
        status = 401 if isinstance(err, Unauthorized) else http_status_for(err)
        body = {"code": err.code, "message": err.message}
        if err.detail is not None:
            body["detail"] = err.detail
        return JSONResponse(status_code=status, content=body)

    def authenticate(request: Request) -> TokenInfo:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            raise Unauthorized("missing bearer token")
        token = header[len("Bearer "):].strip()
        info = service.tokens.get(token)
        if info is None:
            raise Unauthorized("unknown token")
        return info

    def require(*roles: str):
        def dependency(request: Request) -> TokenInfo:
            info = authenticate(request)
            if info.role not in roles:
                raise AuthFailure(f"role {info.role!r} may not call this endpoint")
            return info
        return Depends(dependency)

    async def read_limited(upload: UploadFile, what: str = "photo") -> bytes:
        data = await upload.read()
        if len(data) > max_upload:
            raise PayloadTooLarge(f"{what} exceeds {max_upload} bytes", detail={"limit": max_upload})
        return data

    # -- health --

    @app.get("/api/v1/healthz")
    def healthz():
        return {
            "status": "ok",
            "model_version": service.model.version if service.model else None,
            "gallery_persons": len(service.gallery.entries) if service.gallery else 0,
            "reports": len(service.store.items) + len(service.store.person_reports),
        }

    @app.get("/api/v1/whoami")
    def whoami(request: Request):
        info = authenticate(request)
        return {"role": info.role, "operator": info.operator_id,
                "kiosk_id": info.kiosk_id}

    # -- identify --

    @app.post("/api/v1/identify")
    async def post_identify(
        photo: UploadFile,
        top_n: Optional[int] = Form(default=None),
        threshold: Optional[float] = Form(default=None),
        auth: TokenInfo = require("staff", "admin"),
    ):
        data = await read_limited(photo)
        n = top_n if top_n is not None else service.config.top_n
        return service.identify_photo(data, top_n=n, threshold=threshold)

    # -- enrollment --

    @app.post("/api/v1/persons", status_code=201)
    async def post_person(
        full_name: str = Form(...),
        nationality: str = Form(default=""),
        group_id: Optional[str] = Form(default=None),
        photos: list[UploadFile] = File(default=()),
        auth: TokenInfo = require("staff", "admin"),
    ):
        blobs = [await read_limited(p) for p in photos]
        person = service.enroll_person(full_name, nationality, blobs, group_id)
        return _entity_dict(person)

    @app.get("/api/v1/photos/{photo_ref}")
    def get_photo(
        photo_ref: str,
        auth: TokenInfo = require("public", "kiosk", "staff", "admin"),
    ):
        try:
            data = service.store.blobs.get(photo_ref)
        except KeyError:
            raise PhotoNotFound(photo_ref) from None
        return Response(content=data, media_type="application/octet-stream")

    # -- item reports --

    @app.post("/api/v1/reports/items", status_code=201)
    async def post_item_report(
        request: Request,
        auth: TokenInfo = require("public", "kiosk", "staff", "admin"),
    ):
        content_type = request.headers.get("content-type", "")
        photo_ref = None
        if content_type.startswith("multipart/"):
            form = await request.form()
            payload = {k: v for k, v in form.items() if k != "photo"}
            upload = form.get("photo")
            if upload is not None and getattr(upload, "filename", ""):
                photo_ref = service.put_photo(await read_limited(upload))
        else:
            body = await request.body()
            if len(body) > max_upload:
                raise PayloadTooLarge(f"payload exceeds {max_upload} bytes")
            payload = json.loads(body) if body else {}
            if payload.get("photo_b64"):
                photo_ref = service.put_photo(base64.b64decode(payload["photo_b64"]))
        try:
            kind = ItemKind(str(payload.get("kind", "")).upper())
            category = ItemCategory(str(payload.get("category", "other")).lower())
        except ValueError as err:
            raise ValidationError(str(err)) from None
        if auth.role == "public" and kind is not ItemKind.LOST:
            raise AuthFailure("the public access point accepts LOST reports only")
        report = ItemReport(
            kind=kind,
            category=category,
            description=str(payload.get("description", "")),
            location=str(payload.get("location", "")),
            photo_ref=photo_ref,
            claimed_at=payload.get("claimed_at"),
        )
        stored = service.submit_item(report)
        return report_json(stored)

    # -- person reports --

    @app.post("/api/v1/reports/persons", status_code=201)
    async def post_person_report(
        request: Request,
        auth: TokenInfo = require("staff", "admin"),
    ):
        content_type = request.headers.get("content-type", "")
        photo_ref = None
        if content_type.startswith("multipart/"):
            form = await request.form()
            payload = {k: v for k, v in form.items() if k != "photo"}
            upload = form.get("photo")
            if upload is not None and getattr(upload, "filename", ""):
                photo_ref = service.put_photo(await read_limited(upload))
        else:
            body = await request.body()
            if len(body) > max_upload:
                raise PayloadTooLarge(f"payload exceeds {max_upload} bytes")
            payload = json.loads(body) if body else {}
            if payload.get("photo_b64"):
                photo_ref = service.put_photo(base64.b64decode(payload["photo_b64"]))
        try:
            kind = PersonReportKind(str(payload.get("kind", "")).upper())
        except ValueError as err:
            raise ValidationError(str(err)) from None
        report = PersonReport(
            kind=kind,
            photo_ref=photo_ref or "",
            location=str(payload.get("location", "")),
            subject_person_id=payload.get("subject_person_id") or None,
            claimed_at=payload.get("claimed_at"),
        )
        stored, alerts = service.submit_person(report)
        return {"report": report_json(stored), "alerts_raised": len(alerts)}

    @app.post("/api/v1/reports/persons/{report_id}/status")
    def post_person_report_status(
        report_id: str,
        body: dict,
        auth: TokenInfo = require("staff", "admin"),
    ):
        try:
            status = PersonReportStatus(str(body.get("status", "")).upper())
        except ValueError as err:
            raise ValidationError(str(err)) from None
        kwargs = {}
        if "matched_person_id" in body:
            kwargs["matched_person_id"] = body["matched_person_id"]
        updated = service.store.set_person_report_status(report_id, status, **kwargs)
        service._index_report(updated)
        return report_json(updated)

    # -- search / listing --

    @app.get("/api/v1/reports")
    def get_reports(
        query: str = "",
        limit: int = 50,
        since: Optional[str] = None,
        until: Optional[str] = None,
        auth: TokenInfo = require("public", "kiosk", "staff", "admin"),
    ):
        parsed = parse_query(query, date_from=_norm_stamp(since), date_to=_norm_stamp(until))
        if not 1 <= limit <= 500:
            raise BadPage(f"limit must be 1..500, got {limit}")
        hits = service.index.search(parsed, limit=limit)
        results = []
        for report_id, score in hits:
            results.append({"report": report_json(service.store.get_report(report_id)),
                            "score": score})
        return {"results": results, "total": len(results)}

    @app.get("/api/v1/reports/{report_id}")
    def get_report(
        report_id: str,
        auth: TokenInfo = require("public", "kiosk", "staff", "admin"),
    ):
        return report_json(service.store.get_report(report_id))

    # -- claims --

    @app.post("/api/v1/reports/{report_id}/claims", status_code=201)
    def post_claim(
        report_id: str,
        body: dict,
        auth: TokenInfo = require("public", "staff", "admin"),
    ):
        photo_ref = None
        if body.get("evidence_photo_b64"):
            photo_ref = service.put_photo(base64.b64decode(body["evidence_photo_b64"]))
        claim = Claim(
            report_id=report_id,
            claimant_name=str(body.get("claimant_name", "")),
            evidence_text=str(body.get("evidence_text", "")),
            evidence_photo_ref=photo_ref,
        )
        claim_id, _ = service.file_claim(report_id, claim)
        return {"claim_id": claim_id, "report": report_json(service.store.get_report(report_id))}

    @app.get("/api/v1/claims/{claim_id}")
    def get_claim(claim_id: str, auth: TokenInfo = require("staff", "admin")):
        claim = service.store.claims.get(claim_id)
        if claim is None:
            raise ClaimNotFound(claim_id)
        return {
            "claim": _entity_dict(claim),
            "report": report_json(service.store.get_report(claim.report_id)),
        }

    @app.post("/api/v1/claims/{claim_id}/decision")
    def post_claim_decision(
        claim_id: str,
        body: dict,
        auth: TokenInfo = require("admin"),
    ):
        try:
            decision = ClaimDecision(str(body.get("decision", "")).upper())
        except ValueError as err:
            raise ValidationError(str(err)) from None
        claim = service.decide_claim(claim_id, decision)
        return {
            "claim": _entity_dict(claim),
            "report": report_json(service.store.get_report(claim.report_id)),
        }

    # -- sync --

    @app.post("/api/v1/sync/batches")
    def post_sync_batch(body: dict, auth: TokenInfo = require("kiosk", "admin")):
        return service.ingest_sync_batch(body, auth)

    # -- alerts --

    @app.get("/api/v1/alerts")
    def get_alerts(ack: Optional[str] = None, auth: TokenInfo = require("staff", "admin")):
        flag = None
        if ack is not None:
            flag = ack.lower() in ("1", "true", "yes")
        return {"alerts": service.alerts.list(ack=flag)}

    @app.post("/api/v1/alerts/{alert_id}/ack")
    def post_alert_ack(alert_id: str, auth: TokenInfo = require("admin")):
        return service.alerts.acknowledge(alert_id, auth.operator_id)

    return app


def _norm_stamp(value: Optional[str]) -> Optional[str]:
    if not value:
        return None
    stamp = datetime.fromisoformat(value)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc).isoformat()
