"""Independent reference implementations the test suite checks against.

These deliberately avoid the production code paths: detection scans every
placement directly instead of using FFT correlation, the eigen oracle uses
numpy's dense eigensolver on the full covariance instead of the Gram-matrix
Jacobi route, and the search oracle re-derives matches and scores from the
raw documents on every query.
"""

from __future__ import annotations

import math

import numpy as np

from mfkit.vision import DetectorParams, FaceBox, GrayImage, edge_map, head_template, template_height


def oracle_detect(gray: GrayImage, params: DetectorParams) -> list[FaceBox]:
    """Exhaustive scan over every position and scale; no shortcuts in NMS."""
    edges = edge_map(gray, params.edge_percentile).pixels
    height, width = edges.shape
    flat = edges.reshape(-1)
    candidates: list[FaceBox] = []
    for w in params.scales:
        h = template_height(w)
        if w > width or h > height:
            continue
        mask = head_template(w)
        tys, txs = np.nonzero(mask)
        n_template = len(tys)
        base = tys * width + txs
        for y in range(height - h + 1):
            row = y * width
            for x in range(width - w + 1):
                hits = int(flat[base + (row + x)].sum())
                score = hits / n_template
                if score >= params.score_threshold:
                    candidates.append(FaceBox(x, y, w, h, score))
    ordered = sorted(candidates, key=lambda b: (-b.score, b.y, b.x, b.w))
    kept: list[FaceBox] = []
    for box in ordered:
        suppressed = False
        for other in kept:
            ix = min(box.x + box.w, other.x + other.w) - max(box.x, other.x)
            iy = min(box.y + box.h, other.y + other.h) - max(box.y, other.y)
            if ix > 0 and iy > 0:
                inter = ix * iy
                iou = inter / (box.w * box.h + other.w * other.h - inter)
                if iou > params.nms_overlap:
                    suppressed = True
                    break
        if not suppressed:
            kept.append(box)
    return kept


def oracle_covariance_eig(chips: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense eigendecomposition of the d x d covariance of (N, d) chips."""
    x = np.asarray(chips, dtype=np.float64)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    eigenvalues, vectors = np.linalg.eigh(cov)
    order = np.argsort(-eigenvalues)
    return eigenvalues[order], vectors[:, order]


def oracle_search(docs: dict, query, limit: int) -> list[tuple[str, float]]:
    """Linear scan scorer over raw documents.

    ``docs`` maps doc_id -> (token_streams, facets, timestamp) where
    token_streams is the list of per-field token lists.
    """

    def positions_of(streams):
        stream, pos = [], 0
        for field_tokens in streams:
            for tok in field_tokens:
                stream.append((pos, tok))
                pos += 1
            pos += 1  # gap: phrases never span fields
        return stream

    n_docs = len(docs)
    # document frequency per query term, one scan each
    df = {}
    for term in query.terms:
        df[term] = sum(
            1
            for streams, _, _ in docs.values()
            if any(term in field_tokens for field_tokens in streams)
        )

    results = []
    for doc_id, (streams, facets, stamp) in docs.items():
        flat = positions_of(streams)
        tokens = [t for _, t in flat]
        if any(facets.get(f) != v for f, v in query.filters.items()):
            continue
        if query.date_from is not None and stamp < query.date_from:
            continue
        if query.date_to is not None and stamp > query.date_to:
            continue
        if query.phrase:
            by_pos = dict(flat)
            ok = any(
                all(by_pos.get(pos + i) == q for i, q in enumerate(query.phrase))
                for pos, tok in flat
                if tok == query.phrase[0]
            )
            if not ok:
                continue
        if query.terms and not any(t in tokens for t in query.terms):
            continue
        score = 0.0
        for term in query.terms:
            tf = tokens.count(term)
            if tf:
                score += tf * math.log(1.0 + n_docs / df[term])
        results.append((doc_id, score))
    results.sort(key=lambda pair: (-pair[1], pair[0]))
    return results[:limit]
