"""
Direct, indirect and total effects of treatment through the spatial multiplier
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy import linalg, stats

from src.core.errors import EffectsError
from src.dsdm import DsdmFit, significance_stars
from src.spatial import WeightMatrix

LOGGER = logging.getLogger(__name__)

METHODS = ("delta", "posterior_sim")
EFFECT_PARAMS = ["rho", "beta", "theta"]
DRAW_CHUNK = 500


@dataclass(frozen=True)
class EffectsDecomposition:
    """Average effects of D on Y; total = direct + indirect"""

    direct: float
    indirect: float
    total: float
    se: Dict[str, float] = field(default_factory=dict)
    method: Optional[str] = None
    reps: int = 0

    def __post_init__(self):
        if abs(self.direct + self.indirect - self.total) > 1e-10 * max(1.0, abs(self.total)):
            raise EffectsError("direct + indirect does not equal total")

    @property
    def ratio_indirect_total(self) -> float:
        return self.indirect / self.total if self.total != 0 else float("nan")

    def with_uncertainty(self, se: Dict[str, float], method: str, reps: int) -> "EffectsDecomposition":
        return EffectsDecomposition(self.direct, self.indirect, self.total, dict(se), method, reps)

    def to_dict(self) -> Dict:
        return {
            "direct": self.direct,
            "indirect": self.indirect,
            "total": self.total,
            "ratio_indirect_total": self.ratio_indirect_total,
            "se": self.se,
            "method": self.method,
            "reps": self.reps,
        }


def _check_rho(rho: float, weights: WeightMatrix):
    if not weights.contains_rho(rho):
        lower, upper = weights.rho_bounds()
        raise EffectsError(f"rho={rho:.6g} outside admissible interval ({lower:.6g}, {upper:.6g})")


def multiplier(rho: float, beta: float, theta: float, weights: WeightMatrix) -> np.ndarray:
    """dY/dD' = (I - rho W)^-1 (beta I + theta W)"""
    _check_rho(rho, weights)
    n = weights.n
    identity = np.eye(n)
    try:
        return linalg.solve(identity - rho * weights.matrix, beta * identity + theta * weights.matrix)
    except linalg.LinAlgError:
        raise EffectsError(f"I - rho W is singular at rho={rho:.6g}")


def decompose_params(rho: float, beta: float, theta: float, weights: WeightMatrix) -> EffectsDecomposition:
    """Average diagonal (direct), average row sum (total) and their difference (indirect)"""
    m = multiplier(rho, beta, theta, weights)
    n = weights.n
    direct = float(np.trace(m) / n)
    total = float(m.sum() / n)
    return EffectsDecomposition(direct=direct, indirect=total - direct, total=total)


def decompose(fit: DsdmFit, weights: WeightMatrix) -> EffectsDecomposition:
    return decompose_params(fit.rho, fit.beta, fit.theta, weights)


def spectral_effects(rho: np.ndarray, beta: np.ndarray, theta: np.ndarray, weights: WeightMatrix) -> np.ndarray:
    """Vectorized (direct, indirect, total) from the cached eigenvalues of a row-normalized W.

    tr((I - rho W)^-1) = sum 1 / (1 - rho l), tr((I - rho W)^-1 W) = sum l / (1 - rho l)
    and the average row sum is (beta + theta) / (1 - rho).
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    values = weights.eigenvalues[None, :]
    inverse = 1.0 / (1.0 - rho[:, None] * values)
    n = weights.n
    direct = (beta * inverse.sum(axis=1).real + theta * (values * inverse).sum(axis=1).real) / n
    total = (beta + theta) / (1.0 - rho)
    return np.column_stack([direct, total - direct, total])


def _delta_draws(fit: DsdmFit, weights: WeightMatrix, reps: int, seed: int) -> np.ndarray:
    """Parameter draws from Normal(estimate, vcov), redrawing rho outside the interval.

    Drawn in fixed chunks, so a larger reps extends the same sequence.
    """
    idx = fit.index(EFFECT_PARAMS)
    mean = fit.params[idx]
    cov = fit.vcov[np.ix_(idx, idx)]
    if not np.all(np.isfinite(cov)):
        raise EffectsError("Fit covariance is missing or non-finite")
    rng = np.random.default_rng(seed)
    lower, upper = weights.rho_bounds()
    limit = max(10 * reps, DRAW_CHUNK)
    kept = []
    drawn = 0
    while sum(len(k) for k in kept) < reps:
        if drawn >= limit:
            raise EffectsError(f"More than {limit} draws needed to keep rho inside ({lower:.4g}, {upper:.4g})")
        batch = rng.multivariate_normal(mean, cov, size=DRAW_CHUNK)
        drawn += DRAW_CHUNK
        kept.append(batch[(batch[:, 0] > lower) & (batch[:, 0] < upper)])
    return np.vstack(kept)[:reps]


def effects_uncertainty(fit: DsdmFit, weights: WeightMatrix, reps: int = 1000, seed: int = 42,
                        method: Optional[str] = None) -> EffectsDecomposition:
    """Point decomposition with simulation standard errors.

    delta: draws from the asymptotic normal of (rho, beta, theta).
    posterior_sim: every stored posterior draw. Defaults follow the fit's estimator.
    """
    if method is None:
        method = "posterior_sim" if fit.draws is not None else "delta"
    if method not in METHODS:
        raise EffectsError(f"method must be one of {METHODS}")
    point = decompose(fit, weights)
    if method == "posterior_sim":
        if fit.draws is None:
            raise EffectsError("posterior_sim needs posterior draws")
        params = fit.draws_for(EFFECT_PARAMS)
    else:
        if fit.vcov is None:
            raise EffectsError("Fit has neither a covariance matrix nor posterior draws")
        if reps < 2:
            raise EffectsError("reps must be at least 2")
        params = _delta_draws(fit, weights, reps, seed)
    effects = spectral_effects(params[:, 0], params[:, 1], params[:, 2], weights)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = effects[:, 1] / effects[:, 2]
    se = {
        "direct": float(effects[:, 0].std(ddof=1)),
        "indirect": float(effects[:, 1].std(ddof=1)),
        "total": float(effects[:, 2].std(ddof=1)),
        "ratio_indirect_total": float(np.nanstd(ratio, ddof=1)) if np.isfinite(ratio).sum() > 1 else float("nan"),
    }
    LOGGER.info("Effects (%s, %d draws): direct %.4f (%.4f), indirect %.4f (%.4f), total %.4f (%.4f)",
                method, params.shape[0], point.direct, se["direct"], point.indirect, se["indirect"],
                point.total, se["total"])
    return point.with_uncertainty(se, method, params.shape[0])


def effects_table(decomposition: EffectsDecomposition) -> pd.DataFrame:
    """Rows Direct, Indirect, Total and Indirect/Total Ratio with SE, z-based stars"""
    rows = []
    entries = [("Direct", "direct", decomposition.direct), ("Indirect", "indirect", decomposition.indirect),
               ("Total", "total", decomposition.total),
               ("Indirect/Total Ratio", "ratio_indirect_total", decomposition.ratio_indirect_total)]
    for label, key, value in entries:
        se = decomposition.se.get(key, float("nan"))
        if se and np.isfinite(se) and se > 0 and key != "ratio_indirect_total":
            p_value = 2.0 * stats.norm.sf(abs(value / se))
        else:
            p_value = float("nan")
        rows.append([label, value, se, p_value, significance_stars(p_value)])
    return pd.DataFrame(rows, columns=["effect", "estimate", "se", "p_value", "stars"])
