"""
Algorithmic-coupling correlation between two institutions
"""

import warnings

from src.core.errors import EstimationError, EstimationWarning


def coupling_correlation(base: float, delta: float, d_i: int, d_j: int, vendor_overlap: float) -> float:
    """base + delta * D_i * D_j * overlap, clamped to [-1, 1]"""
    if not -1.0 <= base <= 1.0:
        raise EstimationError(f"base correlation must lie in [-1, 1], got {base}")
    if not 0.0 <= vendor_overlap <= 1.0:
        raise EstimationError(f"vendor_overlap must lie in [0, 1], got {vendor_overlap}")
    if d_i not in (0, 1) or d_j not in (0, 1):
        raise EstimationError("adoption indicators must be 0 or 1")
    value = base + delta * d_i * d_j * vendor_overlap
    if value > 1.0 or value < -1.0:
        clamped = min(1.0, max(-1.0, value))
        warnings.warn(f"Coupling correlation {value:.4f} clamped to {clamped:.1f}", EstimationWarning,
                      stacklevel=2)
        return clamped
    return value
