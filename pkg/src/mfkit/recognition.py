"""Eigenface training, embedding and gallery identification.

Training uses the snapshot method: for N chips of dimension d with N << d,
the N x N Gram matrix of centered chips is decomposed (cyclic Jacobi) and
its eigenvectors are mapped back to image space, re-orthonormalized and
sign-fixed. Eigenvalues equal those of the d x d covariance A A^T / N.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import jacobi_eigh
from .errors import (
    DegenerateModel,
    DuplicatePerson,
    EmptyGallery,
    InsufficientGallery,
    KOutOfRange,
    MalformedHeader,
    ModelVersionMismatch,
    TooFewChips,
    TruncatedPayload,
)
from .vision import FaceChip

MODEL_MAGIC = b"MFEM"
MIN_ENROLL_IMAGES = 3  # enrollment minimum, matches the dataset contract
EIGENVALUE_CUTOFF = 1e-12  # relative to the largest eigenvalue


@dataclass(frozen=True)
class EigenModel:
    """Trained projection basis: column-orthonormal, eigenvalues descending.

    ``eigenvalues`` is None on models loaded from disk (the persistence
    format stores only mean and basis).
    """

    d: int
    k: int
    mean: np.ndarray          # (d,)
    basis: np.ndarray         # (d, k), column-orthonormal
    eigenvalues: np.ndarray | None
    version: int = 1

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        basis = np.asarray(self.basis, dtype=np.float64).reshape(self.d, self.k)
        if mean.shape != (self.d,):
            raise ValueError("mean length must equal d")
        if self.k:
            gram = basis.T @ basis
            if np.abs(gram - np.eye(self.k)).max() >= 1e-6:
                raise ValueError("basis columns are not orthonormal")
        if self.eigenvalues is not None:
            ev = np.asarray(self.eigenvalues, dtype=np.float64).reshape(-1)
            if ev.shape != (self.k,):
                raise ValueError("need one eigenvalue per retained component")
            if np.any(ev < 0.0) or np.any(np.diff(ev) > 0.0):
                raise ValueError("eigenvalues must be non-negative and descending")
            object.__setattr__(self, "eigenvalues", _frozen(ev))
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "basis", _frozen(basis))


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray
    model_version: int

    def __post_init__(self):
        object.__setattr__(
            self, "coords", _frozen(np.asarray(self.coords, dtype=np.float64).reshape(-1))
        )

    @property
    def k(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class MatchResult:
    person_id: str
    distance: float
    rank: int


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def _as_matrix(chips) -> np.ndarray:
    """Stack chips (FaceChip or plain vectors/arrays) into an (N, d) matrix."""
    rows = []
    for chip in chips:
        if isinstance(chip, FaceChip):
            rows.append(chip.vector)
        else:
            rows.append(np.asarray(chip, dtype=np.float64).reshape(-1))
    mat = np.asarray(rows, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("chips must share one dimensionality")
    return mat


def train_eigenmodel(chips, k: int, version: int = 1) -> EigenModel:
    """Fit mean and top-k eigenbasis of the centered chip set.

    Components with eigenvalue below 1e-12 of the largest (or 1e-12
    absolute when the largest is 0) are dropped, so the returned model
    may have fewer than k components; 5 identical chips give k = 0.
    """
    x = _as_matrix(chips)
    n, d = x.shape
    if n < 2:
        raise TooFewChips(f"need at least 2 chips, got {n}")
    k_cap = min(d, n - 1)
    if not 1 <= k <= k_cap:
        raise KOutOfRange(f"k must lie in [1, {k_cap}], got {k}")

    mean = x.mean(axis=0)
    centered = x - mean
    gram = centered @ centered.T / n
    eigenvalues, vectors = jacobi_eigh(gram)
    eigenvalues = np.maximum(eigenvalues, 0.0)  # clip Jacobi round-off

    largest = eigenvalues[0] if eigenvalues.size else 0.0
    cutoff = EIGENVALUE_CUTOFF * largest if largest > 0.0 else EIGENVALUE_CUTOFF
    usable = [i for i in range(n) if eigenvalues[i] >= cutoff]
    usable = usable[:k]

    basis_cols = []
    kept_eigenvalues = []
    for i in usable:
        u = centered.T @ vectors[:, i]
        # modified Gram-Schmidt against the columns already kept
        for col in basis_cols:
            u = u - (col @ u) * col
        norm = np.linalg.norm(u)
        if norm < 1e-12:
            continue
        u = u / norm
        # sign convention: largest-magnitude entry positive
        j = int(np.argmax(np.abs(u)))
        if u[j] < 0.0:
            u = -u
        basis_cols.append(u)
        kept_eigenvalues.append(eigenvalues[i])

    k_final = len(basis_cols)
    basis = np.column_stack(basis_cols) if k_final else np.zeros((d, 0))
    return EigenModel(
        d=d,
        k=k_final,
        mean=mean,
        basis=basis,
        eigenvalues=np.asarray(kept_eigenvalues),
        version=version,
    )


def embed(model: EigenModel, chip) -> Embedding:
    """Project a chip onto the eigenbasis: coords = basis^T (chip - mean)."""
    vec = chip.vector if isinstance(chip, FaceChip) else np.asarray(chip, np.float64).reshape(-1)
    if vec.shape != (model.d,):
        raise ValueError(f"chip dimensionality {vec.shape[0]} != model d {model.d}")
    return Embedding(model.basis.T @ (vec - model.mean), model.version)


def reconstruct(model: EigenModel, embedding: Embedding) -> np.ndarray:
    """Back-project an embedding: mean + basis @ coords, clamped to [0, 1]."""
    if embedding.model_version != model.version:
        raise ModelVersionMismatch(
            f"embedding from model v{embedding.model_version}, model is v{model.version}"
        )
    flat = model.mean + model.basis @ embedding.coords
    return np.clip(flat, 0.0, 1.0)


def distance(a: Embedding, b: Embedding) -> float:
    """Euclidean distance between two embeddings of the same model version."""
    if a.model_version != b.model_version:
        raise ModelVersionMismatch(
            f"cannot compare embeddings from models v{a.model_version} and v{b.model_version}"
        )
    return float(np.linalg.norm(a.coords - b.coords))


@dataclass(frozen=True)
class Gallery:
    """Immutable enrolled-embedding snapshot; enroll() returns a new Gallery.

    The 3-image enrollment minimum is enforced by enroll(); the container
    itself only checks model-version consistency so tests and internal
    splits can build arbitrary galleries.
    """

    model_version: int
    entries: dict[str, tuple[Embedding, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for person_id, embeddings in self.entries.items():
            for e in embeddings:
                if e.model_version != self.model_version:
                    raise ValueError(f"{person_id}: embedding model version mismatch")
        object.__setattr__(self, "entries", dict(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def person_ids(self) -> list[str]:
        return sorted(self.entries)


def enroll(gallery: Gallery, person_id: str, chips, model: EigenModel) -> Gallery:
    """Embed and store >= 3 chips under a new person id; returns a new Gallery."""
    chips = list(chips)
    if len(chips) < MIN_ENROLL_IMAGES:
        raise InsufficientGallery(
            f"enrollment needs >= {MIN_ENROLL_IMAGES} images, got {len(chips)}"
        )
    if person_id in gallery.entries:
        raise DuplicatePerson(person_id)
    if model.version != gallery.model_version:
        raise ModelVersionMismatch(
            f"gallery is at model v{gallery.model_version}, model is v{model.version}"
        )
    embeddings = tuple(embed(model, chip) for chip in chips)
    entries = dict(gallery.entries)
    entries[person_id] = embeddings
    return Gallery(model_version=gallery.model_version, entries=entries)


def person_distance(gallery: Gallery, person_id: str, probe: Embedding) -> float:
    """Min distance from the probe to one person's enrolled embeddings."""
    return min(distance(probe, e) for e in gallery.entries[person_id])


def identify(
    gallery: Gallery,
    probe: Embedding,
    top_n: int = 5,
    threshold: float = 1.0,
) -> list[MatchResult]:
    """Rank enrolled persons by min-distance to the probe.

    Persons with distance <= threshold are returned ascending, ties broken
    by person id, truncated to top_n. An empty list claims no identity.
    """
    if not gallery.entries:
        raise EmptyGallery("no persons enrolled")
    if probe.model_version != gallery.model_version:
        raise ModelVersionMismatch(
            f"probe from model v{probe.model_version}, gallery at v{gallery.model_version}"
        )
    if probe.k == 0:
        raise DegenerateModel("model retained no components; cannot claim matches")
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    scored = sorted(
        (person_distance(gallery, pid, probe), pid) for pid in gallery.entries
    )
    results = []
    for dist, pid in scored:
        if dist > threshold:
            continue
        results.append(MatchResult(person_id=pid, distance=dist, rank=len(results) + 1))
        if len(results) == top_n:
            break
    return results


# --- model persistence: magic "MFEM", u32 version/d/k, then mean and basis
#     as little-endian float64 (basis row-major) ---

def save_model(model: EigenModel) -> bytes:
    header = MODEL_MAGIC + struct.pack("<III", model.version, model.d, model.k)
    mean = model.mean.astype("<f8").tobytes()
    basis = np.ascontiguousarray(model.basis, dtype="<f8").tobytes()
    return header + mean + basis


def load_model(data: bytes) -> EigenModel:
    if len(data) < 16:
        raise TruncatedPayload("model file shorter than header")
    if data[:4] != MODEL_MAGIC:
        raise MalformedHeader(f"bad model magic {data[:4]!r}")
    version, d, k = struct.unpack("<III", data[4:16])
    expected = 16 + 8 * d + 8 * d * k
    if len(data) < expected:
        raise TruncatedPayload(f"model file has {len(data)} bytes, needs {expected}")
    mean = np.frombuffer(data, dtype="<f8", count=d, offset=16)
    basis = np.frombuffer(data, dtype="<f8", count=d * k, offset=16 + 8 * d).reshape(d, k)
    return EigenModel(d=d, k=k, mean=mean, basis=basis, eigenvalues=None, version=version)


def save_model_file(model: EigenModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


def load_model_file(path) -> EigenModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())
