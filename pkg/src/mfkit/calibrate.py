"""Threshold calibration and identification evaluation over a dataset.

The decision threshold is the midpoint between the medians of the genuine
and impostor probe distances on held-out variations. The report path writes
the raw distances as CSV and renders their distributions to a PNG figure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imageio import ImageBuffer
from .pipeline import enrollment_chips, extract_probe, training_chip
from .recognition import EigenModel, Gallery, embed, enroll, identify, person_distance, train_eigenmodel
from .vision import DetectorParams

DEFAULT_K = 32


@dataclass(frozen=True)
class ProbeScore:
    person_id: str
    variation: int
    genuine: float
    best_impostor: float
    best_impostor_id: str


@dataclass(frozen=True)
class CalibrationResult:
    theta: float
    genuine_median: float
    impostor_median: float
    scores: tuple[ProbeScore, ...]


@dataclass(frozen=True)
class EvaluationResult:
    rank1_accuracy: float
    hits: int
    probes: int
    theta: float


def split_dataset(
    dataset: dict[str, list[ImageBuffer]], holdout: int = 1
) -> tuple[dict[str, list[ImageBuffer]], dict[str, list[ImageBuffer]]]:
    """Last ``holdout`` variations per identity become probes."""
    gallery_part, probe_part = {}, {}
    for person_id, images in dataset.items():
        if holdout >= len(images):
            raise ValueError(f"{person_id}: cannot hold out {holdout} of {len(images)}")
        gallery_part[person_id] = images[:-holdout] if holdout else list(images)
        probe_part[person_id] = images[-holdout:] if holdout else []
    return gallery_part, probe_part


def train_from_images(
    gallery_images: dict[str, list[ImageBuffer]],
    k: int = DEFAULT_K,
    detector: DetectorParams | None = None,
    version: int = 1,
) -> EigenModel:
    chips = [
        training_chip(image, detector)
        for images in gallery_images.values()
        for image in images
    ]
    return train_eigenmodel(chips, k=k, version=version)


def build_gallery(
    model: EigenModel,
    gallery_images: dict[str, list[ImageBuffer]],
    detector: DetectorParams | None = None,
) -> Gallery:
    gallery = Gallery(model_version=model.version)
    for person_id, images in gallery_images.items():
        chips = [chip for image in images for chip in enrollment_chips(image, detector)]
        gallery = enroll(gallery, person_id, chips, model)
    return gallery


def calibrate_threshold(
    model: EigenModel,
    gallery: Gallery,
    probe_images: dict[str, list[ImageBuffer]],
    detector: DetectorParams | None = None,
) -> CalibrationResult:
    scores = []
    for person_id, images in probe_images.items():
        for variation, image in enumerate(images):
            probe = embed(model, extract_probe(image, detector).chip)
            genuine = person_distance(gallery, person_id, probe)
            impostors = {
                other: person_distance(gallery, other, probe)
                for other in gallery.entries
                if other != person_id
            }
            best_id = min(impostors, key=lambda pid: (impostors[pid], pid))
            scores.append(ProbeScore(
                person_id=person_id,
                variation=variation,
                genuine=genuine,
                best_impostor=impostors[best_id],
                best_impostor_id=best_id,
            ))
    genuine_median = float(np.median([s.genuine for s in scores]))
    impostor_median = float(np.median([s.best_impostor for s in scores]))
    return CalibrationResult(
        theta=(genuine_median + impostor_median) / 2.0,
        genuine_median=genuine_median,
        impostor_median=impostor_median,
        scores=tuple(scores),
    )


def evaluate_rank1(
    model: EigenModel,
    gallery: Gallery,
    probe_images: dict[str, list[ImageBuffer]],
    theta: float,
    detector: DetectorParams | None = None,
) -> EvaluationResult:
    hits = probes = 0
    for person_id, images in probe_images.items():
        for image in images:
            probes += 1
            probe = embed(model, extract_probe(image, detector).chip)
            matches = identify(gallery, probe, top_n=1, threshold=theta)
            if matches and matches[0].person_id == person_id:
                hits += 1
    return EvaluationResult(
        rank1_accuracy=hits / probes if probes else 0.0,
        hits=hits,
        probes=probes,
        theta=theta,
    )


def write_calibration_report(result: CalibrationResult, out_dir: str | Path) -> dict[str, Path]:
    """distances.csv plus a histogram figure with the chosen threshold."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    csv_path = out / "distances.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["person_id", "variation", "genuine_distance",
                         "best_impostor_distance", "best_impostor_id"])
        for s in result.scores:
            writer.writerow([s.person_id, s.variation, f"{s.genuine:.6f}",
                             f"{s.best_impostor:.6f}", s.best_impostor_id])

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    genuine = [s.genuine for s in result.scores]
    impostor = [s.best_impostor for s in result.scores]
    bins = np.linspace(0.0, max(impostor + genuine) * 1.05, 40)
    ax.hist(genuine, bins=bins, alpha=0.6, label="genuine", color="#2a7")
    ax.hist(impostor, bins=bins, alpha=0.6, label="best impostor", color="#c33")
    ax.axvline(result.theta, color="k", linestyle="--",
               label=f"threshold = {result.theta:.3f}")
    ax.set_xlabel("embedding distance")
    ax.set_ylabel("probes")
    ax.legend()
    fig.tight_layout()
    figure_path = out / "distances.png"
    fig.savefig(figure_path, dpi=120)
    plt.close(fig)

    return {"csv": csv_path, "figure": figure_path}
