"""Deterministic synthetic face identities.

Real enrollment imagery is unavailable here, so galleries and probes are
built from parametric faces: a head ellipse (height:width 1.3, matching the
detector template), two eye ellipses and a mouth bar, with per-variation
translation, brightness gradient, sensor noise and optional glasses frames.
Everything is drawn from a single seeded generator, so the same seed always
produces bit-identical images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewVariations
from .imageio import ImageBuffer

CANVAS = 128
MIN_VARIATIONS = 3  # enrollment requires at least 3 images per person


@dataclass(frozen=True)
class IdentityGeometry:
    """Base face parameters of one identity (before per-variation jitter)."""

    head_rx: float
    eye_dx: float
    eye_dy: float
    eye_rx: float
    eye_ry: float
    mouth_half_w: float
    mouth_half_h: float
    mouth_dy: float
    face_tone: float
    feature_tone: float
    bg_tone: float

    @property
    def head_ry(self) -> float:
        return 1.3 * self.head_rx


def _draw_geometry(rng: np.random.Generator) -> IdentityGeometry:
    head_rx = rng.uniform(18.0, 26.0)
    return IdentityGeometry(
        head_rx=head_rx,
        eye_dx=rng.uniform(0.32, 0.58) * head_rx,
        eye_dy=rng.uniform(0.22, 0.48) * 1.3 * head_rx,
        eye_rx=rng.uniform(0.10, 0.22) * head_rx,
        eye_ry=rng.uniform(0.07, 0.15) * head_rx,
        mouth_half_w=rng.uniform(0.25, 0.55) * head_rx,
        mouth_half_h=rng.uniform(1.0, 2.5),
        mouth_dy=rng.uniform(0.38, 0.62) * 1.3 * head_rx,
        face_tone=rng.uniform(0.50, 0.75),
        feature_tone=rng.uniform(0.05, 0.30),
        bg_tone=rng.uniform(0.85, 0.95),
    )


def identity_geometry(seed: int) -> IdentityGeometry:
    """The base geometry generate_synthetic_identity(seed, ...) renders."""
    return _draw_geometry(np.random.default_rng(seed))


def _fill_ellipse(img: np.ndarray, cx: float, cy: float, rx: float, ry: float, tone: float):
    ys, xs = np.mgrid[0:img.shape[0], 0:img.shape[1]]
    inside = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    img[inside] = tone


def _fill_rect(img: np.ndarray, cx: float, cy: float, hw: float, hh: float, tone: float):
    ys, xs = np.mgrid[0:img.shape[0], 0:img.shape[1]]
    inside = (np.abs(xs - cx) <= hw) & (np.abs(ys - cy) <= hh)
    img[inside] = tone


def _render_variation(geo: IdentityGeometry, rng: np.random.Generator) -> np.ndarray:
    dx, dy = rng.integers(-4, 5, size=2)
    grad_angle = rng.uniform(0.0, 2.0 * np.pi)
    grad_amp = rng.uniform(0.005, 0.025)
    noise_sigma = rng.uniform(0.02, 0.045)
    glasses = rng.random() < 0.5

    cx = CANVAS / 2.0 + float(dx)
    cy = CANVAS / 2.0 + float(dy)

    img = np.full((CANVAS, CANVAS), geo.bg_tone)
    _fill_ellipse(img, cx, cy, geo.head_rx, geo.head_ry, geo.face_tone)
    for side in (-1.0, 1.0):
        _fill_ellipse(img, cx + side * geo.eye_dx, cy - geo.eye_dy,
                      geo.eye_rx, geo.eye_ry, geo.feature_tone)
    _fill_rect(img, cx, cy + geo.mouth_dy, geo.mouth_half_w, geo.mouth_half_h,
               geo.feature_tone)
    if glasses:
        frame = geo.face_tone - 0.10
        for side in (-1.0, 1.0):
            ex = cx + side * geo.eye_dx
            ey = cy - geo.eye_dy
            hw, hh = geo.eye_rx + 2.0, geo.eye_ry + 2.0
            # thin frame: filled rectangle minus interior
            _fill_rect(img, ex, ey, hw, hh, frame)
            _fill_rect(img, ex, ey, hw - 1.0, hh - 1.0, geo.face_tone)
            _fill_ellipse(img, ex, ey, geo.eye_rx, geo.eye_ry, geo.feature_tone)

    ys, xs = np.mgrid[0:CANVAS, 0:CANVAS]
    ramp = (xs * np.cos(grad_angle) + ys * np.sin(grad_angle)) / CANVAS
    img = img + grad_amp * (ramp - ramp.mean())
    img = img + rng.normal(0.0, noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic_identity(seed: int, n_variations: int) -> list[ImageBuffer]:
    """Render ``n_variations`` grayscale 128x128 views of one synthetic person.

    Deterministic per seed; raises TooFewVariations below the enrollment
    minimum of 3.
    """
    if n_variations < MIN_VARIATIONS:
        raise TooFewVariations(
            f"need at least {MIN_VARIATIONS} variations, got {n_variations}"
        )
    rng = np.random.default_rng(seed)
    geo = _draw_geometry(rng)
    images = []
    for _ in range(n_variations):
        arr = _render_variation(geo, rng)
        samples = np.rint(arr * 255.0).astype(np.uint8)
        images.append(ImageBuffer(CANVAS, CANVAS, 1, samples.tobytes()))
    return images
