"""Append-only checksummed record log, shared by the registry, the kiosk
outbox and the alert journal.

Wire layout per record: u32 length, u32 CRC-32C of the payload, payload
bytes. Payloads are canonical JSON (sorted keys, compact separators, UTF-8)
so replays hash bit-exactly. Integers are little-endian.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Iterator

from .errors import CorruptLog

_HEADER = struct.Struct("<II")

# CRC-32C (Castagnoli), reflected polynomial 0x82F63B78.
_CRC_TABLE = []
for _byte in range(256):
    _crc = _byte
    for _ in range(8):
        _crc = (_crc >> 1) ^ 0x82F63B78 if _crc & 1 else _crc >> 1
    _CRC_TABLE.append(_crc)


def crc32c(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for b in data:
        crc = (crc >> 8) ^ _CRC_TABLE[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFFFFFF


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_record(obj) -> bytes:
    payload = canonical_json(obj)
    return _HEADER.pack(len(payload), crc32c(payload)) + payload


def decode_records(data: bytes, *, source: str = "<bytes>") -> tuple[list[dict], int, bool]:
    """Decode a framed byte stream.

    Returns (records, clean_length, torn_tail): clean_length is the byte
    offset after the last fully-verified record and torn_tail marks a
    trailing partial record (normal after a crash mid-append). A checksum
    mismatch on a complete record raises CorruptLog naming the offset.
    """
    records = []
    offset = 0
    while offset < len(data):
        if offset + _HEADER.size > len(data):
            return records, offset, True
        length, crc = _HEADER.unpack_from(data, offset)
        start = offset + _HEADER.size
        if start + length > len(data):
            return records, offset, True
        payload = data[start:start + length]
        if crc32c(payload) != crc:
            raise CorruptLog(
                f"checksum mismatch at byte {offset} of {source}",
                offset=offset,
                records_applied=len(records),
            )
        try:
            records.append(json.loads(payload.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise CorruptLog(
                f"undecodable payload at byte {offset} of {source}",
                offset=offset,
                records_applied=len(records),
            ) from None
        offset = start + length
    return records, offset, False


class RecordLog:
    """A durable append-only log file of JSON records."""

    def __init__(self, path: str | Path, *, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "ab")

    def append(self, obj) -> None:
        self._fh.write(encode_record(obj))
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(
    path: str | Path,
    *,
    allow_truncated: bool = False,
    repair_torn_tail: bool = True,
) -> tuple[list[dict], int | None]:
    """Replay a log file.

    A torn trailing record (crash mid-append) is truncated away when
    ``repair_torn_tail`` is set. A mid-log checksum mismatch raises
    CorruptLog unless ``allow_truncated``, in which case the valid prefix is
    returned along with the corruption offset.
    """
    path = Path(path)
    if not path.exists():
        return [], None
    data = path.read_bytes()
    truncated_at = None
    try:
        records, clean, torn = decode_records(data, source=str(path))
    except CorruptLog as err:
        if not allow_truncated:
            raise
        records, clean, _ = decode_records(data[:err.offset], source=str(path))
        truncated_at = err.offset
        torn = False
    if torn and repair_torn_tail and clean < len(data):
        with open(path, "r+b") as fh:
            fh.truncate(clean)
    return records, truncated_at


def iter_records(data: bytes) -> Iterator[dict]:
    records, _, _ = decode_records(data)
    yield from records
