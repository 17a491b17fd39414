"""
Pairwise algorithmic-coupling correlations
"""

import warnings
from typing import Dict, Sequence, Tuple

import numpy as np

from src.core.errors import EstimationWarning, NetRiskError


def coupling_matrix(base: float, delta: float, adoption: Sequence[int],
                    overlap) -> Tuple[np.ndarray, Dict]:
    """rho_ij = base + delta * D_i * D_j * overlap_ij with unit diagonal, clamped to [-1, 1].

    `overlap` is a scalar or an N x N matrix of vendor overlaps in [0, 1].
    Returns the matrix and a summary of adopter-pair and other-pair means.
    """
    d = np.asarray(adoption)
    if d.ndim != 1 or not np.isin(d, (0, 1)).all():
        raise NetRiskError("adoption must be a 0/1 vector")
    if not -1.0 <= base <= 1.0:
        raise NetRiskError(f"base correlation must lie in [-1, 1], got {base}")
    n = d.size
    overlap = np.broadcast_to(np.asarray(overlap, dtype=float), (n, n))
    if np.any(overlap < 0) or np.any(overlap > 1):
        raise NetRiskError("vendor overlap must lie in [0, 1]")

    raw = base + delta * np.outer(d, d) * overlap
    np.fill_diagonal(raw, 1.0)
    matrix = np.clip(raw, -1.0, 1.0)
    clamped = int(np.sum(matrix != raw))
    if clamped:
        warnings.warn(f"{clamped} coupling correlations clamped to [-1, 1]", EstimationWarning, stacklevel=2)

    off = ~np.eye(n, dtype=bool)
    both = np.outer(d, d).astype(bool) & off
    other = off & ~both
    summary = {
        "adopter_pair_mean": float(matrix[both].mean()) if both.any() else float("nan"),
        "other_pair_mean": float(matrix[other].mean()) if other.any() else float("nan"),
        "adopter_pairs": int(both.sum() // 2),
        "clamped": clamped,
    }
    return matrix, summary
