"""
Analytic correction of the fixed-effect bias in the DSDM likelihood estimates.

Demeaning over time leaves the lagged outcome correlated with the
demeaned shocks (order 1/T); demeaning over entities removes the unit
eigenvalue of a row-normalized W (order 1/N). Both show up as a nonzero
expected score at the true parameters, and the first-order bias of the
estimate is I^-1 E[s].
"""

import logging

import numpy as np

from src.core.errors import EstimationError
from .data import DsdmData

LOGGER = logging.getLogger(__name__)


def _transformed_spectrum(data: DsdmData) -> np.ndarray:
    """Eigenvalues of W on the subspace left by the cross-sectional demeaning"""
    values = np.asarray(data.weights.eigenvalues, dtype=complex)
    if data.fixed_effects not in ("time", "both"):
        return values
    if not data.weights.row_normalized:
        raise EstimationError("Bias correction with time effects needs a row-normalized W")
    return np.delete(values, int(np.argmin(np.abs(values - 1.0))))


def lag_moment(h: np.ndarray, values: np.ndarray, tau: float, rho: float, eta: float, periods: int) -> float:
    """-E[sum_t (h(W) Y_{t-1})' e_t] / sigma2 after demeaning each entity over `periods` quarters.

    Equals (1/T) sum_k (T-1-k) tr(h(W) A^k S^-1) with S = I - rho W and
    A = S^-1 (tau I + eta W), evaluated on the spectrum.
    """
    inverse = 1.0 / (1.0 - rho * values)
    a = (tau + eta * values) * inverse
    k = np.arange(periods - 1)
    geometric = (np.power(a[:, None], k[None, :]) * ((periods - 1 - k) / periods)).sum(axis=1)
    return float(np.sum(h * inverse * geometric).real)


def expected_score(params: np.ndarray, data: DsdmData) -> np.ndarray:
    """Leading term of the expected score of `loglik` at `params`, parameter order"""
    params = np.asarray(params, dtype=float)
    tau, rho, eta, sigma2 = params[0], params[1], params[2], params[-1]
    n, periods = data.n_entities, data.n_periods
    entity_fe = data.fixed_effects in ("entity", "both")
    time_fe = data.fixed_effects in ("time", "both")
    n_star = n - 1 if time_fe else n
    t_star = periods - 1 if entity_fe else periods

    full = np.asarray(data.weights.eigenvalues, dtype=complex)
    values = _transformed_spectrum(data)
    g_full = full / (1.0 - rho * full)
    g = values / (1.0 - rho * values)

    score = np.zeros(params.size)
    score[1] = float((t_star * g.sum() - periods * g_full.sum()).real)
    if entity_fe:
        score[0] = -lag_moment(np.ones_like(values), values, tau, rho, eta, periods)
        score[2] = -lag_moment(values, values, tau, rho, eta, periods)
        score[1] -= tau * lag_moment(g, values, tau, rho, eta, periods)
        score[1] -= eta * lag_moment(values * g, values, tau, rho, eta, periods)
    score[-1] = (n_star * t_star - n * periods) / (2.0 * sigma2)
    return score


def correct_bias(params: np.ndarray, information: np.ndarray, data: DsdmData) -> np.ndarray:
    """params - I^-1 E[s], the first-order bias-corrected estimate"""
    bias = np.linalg.solve(information, expected_score(params, data))
    LOGGER.debug("Estimated first-order bias: %s", np.array2string(bias, precision=5))
    return np.asarray(params, dtype=float) - bias
