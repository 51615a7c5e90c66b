"""Raster image buffers and the PGM (P5) / PPM (P6) binary codec.

The whole pipeline runs on these two formats so it stays dependency-free and
bit-reproducible; JPEG is accepted only through a pluggable decoder that a
deployment may register (see :func:`register_jpeg_decoder`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import MalformedHeader, TruncatedPayload, UnsupportedFormat

_MAXVAL = 255


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit raster image, row-major samples, 1 (gray) or 3 (RGB) channels."""

    width: int
    height: int
    channels: int
    pixels: bytes

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if len(self.pixels) != self.width * self.height * self.channels:
            raise ValueError(
                f"pixel payload length {len(self.pixels)} does not match "
                f"{self.width}x{self.height}x{self.channels}"
            )


JpegDecoder = Callable[[bytes], ImageBuffer]
_jpeg_decoder: Optional[JpegDecoder] = None


def register_jpeg_decoder(decoder: Optional[JpegDecoder]) -> None:
    """Install (or clear, with None) the JPEG decoder used by decode_image."""
    global _jpeg_decoder
    _jpeg_decoder = decoder


def _sniff_format(data: bytes) -> str:
    if data.startswith(b"P5"):
        return "pgm"
    if data.startswith(b"P6"):
        return "ppm"
    if data.startswith(b"\xff\xd8"):
        return "jpeg"
    raise UnsupportedFormat("unrecognized image magic")


def decode_image(data: bytes, format_hint: str | None = None) -> ImageBuffer:
    """Decode raw file bytes into an ImageBuffer.

    ``format_hint`` may be "pgm", "ppm" or "jpeg"; when omitted the format is
    sniffed from the leading magic bytes. Raises MalformedHeader,
    TruncatedPayload or UnsupportedFormat.
    """
    if not data:
        raise TruncatedPayload("empty payload")
    fmt = (format_hint or _sniff_format(data)).lower()
    if fmt in ("pgm", "ppm", "pnm"):
        return _decode_pnm(data)
    if fmt in ("jpeg", "jpg"):
        if _jpeg_decoder is None:
            raise UnsupportedFormat("no JPEG decoder registered")
        return _jpeg_decoder(data)
    raise UnsupportedFormat(f"unknown format {fmt!r}")


def _decode_pnm(data: bytes) -> ImageBuffer:
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MalformedHeader(f"bad PNM magic {magic!r}")

    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # then exactly one whitespace byte before the payload.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise MalformedHeader("truncated PNM header")
        fields.append(data[start:pos])
    if pos >= len(data):
        raise MalformedHeader("missing payload separator")
    pos += 1  # single whitespace byte after maxval

    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise MalformedHeader(f"non-numeric header fields {fields!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval != _MAXVAL:
        raise UnsupportedFormat(f"only maxval 255 supported, got {maxval}")

    expected = width * height * channels
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise TruncatedPayload(
            f"payload has {len(payload)} bytes, header promises {expected}"
        )
    return ImageBuffer(width, height, channels, bytes(payload))


def encode_image(image: ImageBuffer) -> bytes:
    """Encode to binary PGM (1 channel) or PPM (3 channels); inverse of decode."""
    magic = b"P5" if image.channels == 1 else b"P6"
    header = b"%s %d %d %d\n" % (magic, image.width, image.height, _MAXVAL)
    return header + image.pixels
