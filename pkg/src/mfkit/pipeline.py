"""The photo-to-embedding pipeline shared by the service, CLI and tooling.

Detection runs on the equalized image (contrast-independent edges); the
recognition chip is cropped from the plain luminance image. Equalization is
rank-based, so in near-flat regions it amplifies sensor noise into large
structured differences between two shots of the same face; cropping from
luminance keeps embeddings photometric. Enrollment additionally stores
one-pixel-shifted crops of every photo so that the gallery's min-distance
absorbs the detector's residual alignment jitter.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NoFaceDetected
from .imageio import ImageBuffer
from .vision import (
    DetectorParams,
    FaceBox,
    FaceChip,
    GrayImage,
    crop_normalize,
    detect_faces,
    largest_box,
    luminance,
    preprocess,
)

ENROLL_SHIFTS = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1),
                 (-1, -1), (1, 1), (-1, 1), (1, -1))


@dataclass(frozen=True)
class ProbeFace:
    chip: FaceChip
    box: FaceBox
    n_detected: int


def _shifted_box(gray: GrayImage, box: FaceBox, dx: int, dy: int) -> FaceBox:
    x = min(max(box.x + dx, 0), gray.width - box.w)
    y = min(max(box.y + dy, 0), gray.height - box.h)
    return FaceBox(x, y, box.w, box.h, box.score)


def extract_probe(image: ImageBuffer, params: DetectorParams | None = None) -> ProbeFace:
    """Detect the probe face (largest box wins) and crop its chip.

    Raises NoFaceDetected when the detector returns nothing.
    """
    boxes = detect_faces(preprocess(image), params)
    box = largest_box(boxes)
    if box is None:
        raise NoFaceDetected("no face candidate above the detector threshold")
    chip = crop_normalize(luminance(image), box)
    return ProbeFace(chip=chip, box=box, n_detected=len(boxes))


def enrollment_chips(image: ImageBuffer, params: DetectorParams | None = None) -> list[FaceChip]:
    """Chips for one enrollment photo: the detected crop plus its 8 one-pixel
    neighbors, so probes match regardless of sub-grid alignment."""
    boxes = detect_faces(preprocess(image), params)
    box = largest_box(boxes)
    if box is None:
        raise NoFaceDetected("no face candidate above the detector threshold")
    gray = luminance(image)
    return [crop_normalize(gray, _shifted_box(gray, box, dx, dy)) for dx, dy in ENROLL_SHIFTS]


def training_chip(image: ImageBuffer, params: DetectorParams | None = None) -> FaceChip:
    """The single centered chip used when fitting the eigenmodel."""
    return extract_probe(image, params).chip
