"""Offline kiosk outbox and at-least-once sync replay.

Reports queue locally into a checksummed append-only file (same codec as
the registry log) and are replayed to the server in seq order. Entries are
marked sent only after the server acknowledges the batch, so a crash at any
point re-sends and the server's (kiosk_id, seq) dedup turns at-least-once
delivery into an exactly-once effect.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

from .errors import AuthFailure, MFError, OutboxFull, ServerUnreachable, ValidationError
from .recordlog import RecordLog, canonical_json, crc32c, read_log

DEFAULT_BATCH_SIZE = 100
DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_BASE_DELAY = 0.2

ITEM_KINDS = {"FOUND", "LOST"}
PERSON_KINDS = {"MISSING", "FOUND_ALIVE", "DECEASED"}
CATEGORIES = {"watch", "phone", "bag", "document", "jewelry", "other"}


def validate_payload(payload: dict) -> None:
    """Local mirror of the server-side submission rules."""
    kind = payload.get("kind", "")
    if payload.get("type") == "person":
        if kind not in PERSON_KINDS:
            raise ValidationError(f"bad person report kind {kind!r}")
        if not payload.get("photo_b64"):
            raise ValidationError("a person report needs a photo")
    else:
        if kind not in ITEM_KINDS:
            raise ValidationError(f"bad item kind {kind!r}")
        category = payload.get("category", "other")
        if category not in CATEGORIES:
            raise ValidationError(f"bad category {category!r}")
        if not str(payload.get("description", "")).strip() and not payload.get("photo_b64"):
            raise ValidationError("an item report needs a description or a photo")


@dataclass(frozen=True)
class OutboxEntry:
    seq: int
    report: dict
    created_at: str
    sent: bool


@dataclass(frozen=True)
class SyncSummary:
    sent: int
    duplicates: int
    high_water: int


class Outbox:
    """Durable per-kiosk queue with dense, monotonically increasing seqs."""

    def __init__(self, path: str | Path, *, cap: int = 10_000, fsync: bool = True):
        self.path = Path(path)
        self.cap = cap
        self._entries: dict[int, OutboxEntry] = {}
        self._high_water = 0
        records, _ = read_log(self.path)
        for record in records:
            self._apply(record)
        self._log = RecordLog(self.path, fsync=fsync)

    def _apply(self, record: dict) -> None:
        kind, data = record["type"], record["data"]
        if kind == "queued":
            entry = OutboxEntry(seq=data["seq"], report=data["report"],
                                created_at=data["created_at"], sent=False)
            self._entries[entry.seq] = entry
        elif kind == "sent":
            entry = self._entries[data["seq"]]
            self._entries[data["seq"]] = OutboxEntry(
                seq=entry.seq, report=entry.report, created_at=entry.created_at, sent=True
            )
        elif kind == "high_water":
            self._high_water = max(self._high_water, data["seq"])

    def close(self) -> None:
        self._log.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def known_high_water(self) -> int:
        return self._high_water

    def next_seq(self) -> int:
        if self._entries:
            return max(self._entries) + 1
        # a reinstalled kiosk fast-forwards past the server's high water
        return self._high_water + 1

    def queue_report(self, report: dict) -> int:
        validate_payload(report)
        if len(self.unsent()) >= self.cap:
            raise OutboxFull(f"outbox holds {self.cap} unsent reports")
        seq = self.next_seq()
        record = {
            "type": "queued",
            "data": {
                "seq": seq,
                "report": report,
                "created_at": datetime.now(timezone.utc).isoformat(),
            },
        }
        self._log.append(record)
        self._apply(record)
        return seq

    def mark_sent(self, seq: int) -> None:
        if seq not in self._entries:
            raise KeyError(seq)
        record = {"type": "sent", "data": {"seq": seq}}
        self._log.append(record)
        self._apply(record)

    def record_high_water(self, seq: int) -> None:
        if seq <= self._high_water:
            return
        record = {"type": "high_water", "data": {"seq": seq}}
        self._log.append(record)
        self._apply(record)

    def unsent(self) -> list[OutboxEntry]:
        return [e for e in sorted(self._entries.values(), key=lambda e: e.seq) if not e.sent]

    def entries(self) -> list[OutboxEntry]:
        return sorted(self._entries.values(), key=lambda e: e.seq)


def _requests_post(server_url: str, token: str):
    import requests

    def post(body: dict) -> tuple[int, dict]:
        try:
            resp = requests.post(
                server_url.rstrip("/") + "/api/v1/sync/batches",
                json=body,
                headers={"Authorization": f"Bearer {token}"},
                timeout=15,
            )
        except (requests.ConnectionError, requests.Timeout) as err:
            raise ServerUnreachable(str(err)) from err
        try:
            payload = resp.json()
        except ValueError:
            payload = {}
        return resp.status_code, payload

    return post


def sync_replay(
    outbox: Outbox,
    server_url: str = "",
    token: str = "",
    kiosk_id: str = "",
    *,
    post: Optional[Callable[[dict], tuple[int, dict]]] = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    base_delay: float = DEFAULT_BASE_DELAY,
    sleep: Callable[[float], None] = time.sleep,
) -> SyncSummary:
    """Replay unsent entries in seq order, <= batch_size per request.

    Safe to interrupt and rerun at any point. Network failures retry with
    exponential backoff (max_attempts per batch) before ServerUnreachable.
    """
    poster = post or _requests_post(server_url, token)
    pending = outbox.unsent()
    batches = [pending[i:i + batch_size] for i in range(0, len(pending), batch_size)]
    if not batches:
        batches = [[]]  # learn the server's high water even when empty

    sent = duplicates = 0
    high_water = outbox.known_high_water
    for batch in batches:
        reports = [{"seq": e.seq, "report": e.report} for e in batch]
        body = {
            "kiosk_id": kiosk_id,
            "reports": reports,
            "checksum": crc32c(canonical_json(reports)),
        }
        ack = _post_with_retry(poster, body, max_attempts, base_delay, sleep)
        for entry in batch:
            outbox.mark_sent(entry.seq)
        sent += ack.get("accepted", 0)
        duplicates += ack.get("duplicates", 0)
        high_water = max(high_water, ack.get("high_water_seq", 0))
    outbox.record_high_water(high_water)
    return SyncSummary(sent=sent, duplicates=duplicates, high_water=high_water)


def _post_with_retry(poster, body, max_attempts, base_delay, sleep) -> dict:
    last_err: Optional[Exception] = None
    for attempt in range(max_attempts):
        try:
            status, payload = poster(body)
        except ServerUnreachable as err:
            last_err = err
            if attempt + 1 < max_attempts:
                sleep(base_delay * (2 ** attempt))
            continue
        if status in (401, 403):
            raise AuthFailure(payload.get("message", f"HTTP {status}"))
        if status >= 400:
            raise MFError(f"server rejected batch: HTTP {status} {payload}")
        return payload
    raise ServerUnreachable(f"giving up after {max_attempts} attempts: {last_err}")
