"""
Gaussian log-likelihood of the DSDM and its concentrated profile in rho
"""

from dataclasses import dataclass, replace
from typing import List

import numpy as np
from scipy import linalg

from src.core.errors import EstimationError, SpatialWeightsError
from .data import DsdmData

LN2PI = np.log(2.0 * np.pi)


def split_params(params: np.ndarray, data: DsdmData):
    """(rho, coefficient vector in regressor order, sigma2) from the full parameter vector"""
    params = np.asarray(params, dtype=float)
    if params.size != len(data.param_names):
        raise EstimationError(f"Expected {len(data.param_names)} parameters, got {params.size}")
    rho = params[1]
    coefs = np.concatenate([[params[0]], params[2:-1]])
    return rho, coefs, params[-1]


def join_params(rho: float, coefs: np.ndarray, sigma2: float) -> np.ndarray:
    return np.concatenate([[coefs[0], rho], coefs[1:], [sigma2]])


def _log_det(data: DsdmData, rho: float) -> float:
    try:
        return data.weights.log_det(rho)
    except SpatialWeightsError as exc:
        raise EstimationError(str(exc))


def residuals(params: np.ndarray, data: DsdmData) -> np.ndarray:
    """N x (T-1) residual matrix eps_t = (I - rho W) Y_t - ... - Gamma X_t"""
    rho, coefs, _ = split_params(params, data)
    eps = data.y - rho * data.wy
    for coef, values in zip(coefs, data.regressors.values()):
        eps = eps - coef * values
    if not np.all(np.isfinite(eps)):
        raise EstimationError("Non-finite residual in the DSDM likelihood")
    return eps


def loglik_contributions(params: np.ndarray, data: DsdmData) -> np.ndarray:
    """Per-quarter terms -(N/2) ln(2 pi s2) + ln|I - rho W| - eps_t'eps_t / (2 s2)"""
    rho, _, sigma2 = split_params(params, data)
    if sigma2 <= 0:
        raise EstimationError(f"sigma2 must be positive, got {sigma2}")
    logdet = _log_det(data, rho)
    eps = residuals(params, data)
    n = data.n_entities
    return -0.5 * n * (LN2PI + np.log(sigma2)) + logdet - (eps ** 2).sum(axis=0) / (2.0 * sigma2)


def loglik(params: np.ndarray, data: DsdmData, weights=None) -> float:
    """ln L = -(NT/2) ln(2 pi s2) + T ln|I - rho W| - (1 / 2 s2) sum_t eps_t'eps_t

    T counts the quarters after the one consumed by the temporal lag.
    `weights` overrides the matrix carried by `data`.
    """
    if weights is not None and weights is not data.weights:
        data = _with_weights(data, weights)
    return float(loglik_contributions(params, data).sum())


def _with_weights(data: DsdmData, weights) -> DsdmData:
    if weights.n != data.n_entities:
        raise EstimationError("W dimension does not match the data")
    return replace(data, weights=weights)


@dataclass(frozen=True)
class ConcentratedRegression:
    """GLS pieces given rho: coefs(rho) = b0 - rho b1, SSR(rho) = a - 2 rho b + rho^2 c"""

    b0: np.ndarray
    b1: np.ndarray
    a: float
    b: float
    c: float
    n_obs: int
    n_periods: int

    def coefficients(self, rho: float) -> np.ndarray:
        return self.b0 - rho * self.b1

    def ssr(self, rho: float) -> float:
        return self.a - 2.0 * rho * self.b + rho * rho * self.c

    def sigma2(self, rho: float) -> float:
        return self.ssr(rho) / self.n_obs


def collinear_columns(z: np.ndarray, names: List[str], tol: float = 1e-10) -> List[str]:
    """Columns dropped by a rank-revealing (pivoted) QR"""
    if z.shape[1] == 0:
        return []
    _, r, pivots = linalg.qr(z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > tol * scale * max(z.shape)))
    return [names[i] for i in sorted(pivots[rank:])]


def concentrate(data: DsdmData) -> ConcentratedRegression:
    """Least-squares projections of y and Wy on the design; rejects collinear designs"""
    zz = data.cross["zz"]
    names = data.regressor_names
    z = data.design()
    dropped = collinear_columns(z, names)
    if dropped:
        raise EstimationError(f"Singular regressor cross-product; collinear columns: {', '.join(dropped)}")
    try:
        factor = linalg.cho_factor(zz)
    except linalg.LinAlgError:
        raise EstimationError(f"Singular regressor cross-product over columns {', '.join(names)}")
    b0 = linalg.cho_solve(factor, data.cross["zy"])
    b1 = linalg.cho_solve(factor, data.cross["zwy"])
    e0 = data.vector("y") - z @ b0
    e1 = data.vector("wy") - z @ b1
    return ConcentratedRegression(b0=b0, b1=b1, a=float(e0 @ e0), b=float(e0 @ e1), c=float(e1 @ e1),
                                  n_obs=data.n_obs, n_periods=data.n_periods)


def profile_loglik(rho: float, data: DsdmData, weights=None, regression: ConcentratedRegression = None) -> float:
    """Log-likelihood maximized over every parameter except rho"""
    if weights is not None and weights is not data.weights:
        data = _with_weights(data, weights)
    regression = regression or concentrate(data)
    sigma2 = regression.sigma2(rho)
    if sigma2 <= 0:
        raise EstimationError("Concentrated residual variance is not positive")
    n = regression.n_obs
    return -0.5 * n * (LN2PI + 1.0 + np.log(sigma2)) + regression.n_periods * _log_det(data, rho)


def profile_score(rho: float, data: DsdmData, regression: ConcentratedRegression) -> float:
    """d/d rho of the profile log-likelihood"""
    values = data.weights.eigenvalues
    dlogdet = -np.sum(values / (1.0 - rho * values)).real
    dssr = -2.0 * regression.b + 2.0 * rho * regression.c
    return -0.5 * regression.n_obs * dssr / regression.ssr(rho) + regression.n_periods * dlogdet
