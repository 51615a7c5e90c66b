"""Synthetic dataset generation and loading for training and evaluation."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .imageio import ImageBuffer, decode_image, encode_image
from .synthid import generate_synthetic_identity

MANIFEST_NAME = "manifest.json"


def identity_seeds(master_seed: int, n_identities: int) -> list[int]:
    rng = np.random.default_rng(master_seed)
    return [int(s) for s in rng.integers(0, 2**63, size=n_identities)]


def write_dataset(out_dir: str | Path, n_identities: int, n_variations: int, seed: int) -> dict:
    """Render the corpus to PGM files plus a manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "master_seed": seed,
        "variations": n_variations,
        "identities": [],
    }
    for i, id_seed in enumerate(identity_seeds(seed, n_identities)):
        person_id = f"person-{i:03d}"
        person_dir = out / person_id
        person_dir.mkdir(exist_ok=True)
        files = []
        for v, image in enumerate(generate_synthetic_identity(id_seed, n_variations)):
            name = f"var_{v}.pgm"
            (person_dir / name).write_bytes(encode_image(image))
            files.append(f"{person_id}/{name}")
        manifest["identities"].append({"person_id": person_id, "seed": id_seed, "files": files})
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
    return manifest


def load_dataset(dataset_dir: str | Path) -> dict[str, list[ImageBuffer]]:
    """person_id -> variations, in manifest order."""
    root = Path(dataset_dir)
    manifest = json.loads((root / MANIFEST_NAME).read_text())
    out: dict[str, list[ImageBuffer]] = {}
    for entry in manifest["identities"]:
        out[entry["person_id"]] = [
            decode_image((root / rel).read_bytes()) for rel in entry["files"]
        ]
    return out
