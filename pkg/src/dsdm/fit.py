"""
Maximum-likelihood and quasi-maximum-likelihood DSDM estimation
"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy import optimize, stats
from statsmodels.tools.numdiff import approx_fprime, approx_hess3

from src.core.errors import ConvergenceError, EstimationError, EstimationWarning
from src.panel import PanelDataset
from .bias import correct_bias
from .data import DsdmData, DsdmSpec, prepare_data
from .likelihood import (concentrate, join_params, loglik, loglik_contributions, profile_loglik,
                         profile_score)

LOGGER = logging.getLogger(__name__)

LINE_SEARCH_MAXITER = 200
LINE_SEARCH_XATOL = 1e-8
BOUNDARY_MARGIN = 1e-7
SCORE_RTOL = 4 * np.finfo(float).eps


def significance_stars(p_value: float) -> str:
    if p_value is None or not np.isfinite(p_value):
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


def credible_stars(draws: np.ndarray) -> str:
    """Stars by the widest credible interval (99/95/90%) that excludes zero"""
    for level, stars in ((0.99, "***"), (0.95, "**"), (0.90, "*")):
        lower, upper = np.percentile(draws, [50 * (1 - level), 50 * (1 + level)])
        if lower > 0 or upper < 0:
            return stars
    return ""


@dataclass
class DsdmFit:
    """Estimates, covariance and diagnostics of one DSDM fit"""

    estimator: str
    outcome: str
    param_names: List[str]
    params: np.ndarray
    vcov: np.ndarray
    loglik: float
    n_entities: int
    n_periods: int
    controls: List[str] = field(default_factory=list)
    weights_kind: str = "custom"
    weights_checksum: str = ""
    rho_bounds: tuple = (-1.0, 1.0)
    draws: Optional[np.ndarray] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        self.vcov = np.asarray(self.vcov, dtype=float)
        k = self.params.size
        if len(self.param_names) != k or self.vcov.shape != (k, k):
            raise EstimationError("Parameter names, estimates and covariance disagree in size")
        if not self.sigma2 > 0:
            raise EstimationError(f"sigma2 estimate {self.sigma2} is not positive")
        lower, upper = self.rho_bounds
        if not lower < self.rho < upper:
            raise EstimationError(f"rho estimate {self.rho:.6f} outside ({lower:.6f}, {upper:.6f})")
        if not np.allclose(self.vcov, self.vcov.T, rtol=1e-8, atol=1e-12, equal_nan=True):
            raise EstimationError("Covariance matrix is not symmetric")
        if self.draws is not None:
            self.draws = np.asarray(self.draws, dtype=float)

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.param_names.index(name)])

    @property
    def tau(self) -> float:
        return self["tau"]

    @property
    def rho(self) -> float:
        return self["rho"]

    @property
    def eta(self) -> float:
        return self["eta"]

    @property
    def beta(self) -> float:
        return self["beta"]

    @property
    def theta(self) -> float:
        return self["theta"]

    @property
    def sigma2(self) -> float:
        return self["sigma2"]

    @property
    def gamma(self) -> Dict[str, float]:
        return {name[len("gamma_"):]: self[name] for name in self.param_names if name.startswith("gamma_")}

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    def index(self, names: List[str]) -> List[int]:
        return [self.param_names.index(n) for n in names]

    def draws_for(self, names: List[str]) -> np.ndarray:
        if self.draws is None:
            raise EstimationError("Fit carries no posterior draws")
        return self.draws[:, self.index(names)]

    def table(self) -> pd.DataFrame:
        """Estimate, SE (posterior SD), 95% interval, p-value and stars per parameter"""
        rows = []
        se = self.se
        for i, name in enumerate(self.param_names):
            estimate = self.params[i]
            if self.draws is not None:
                column = self.draws[:, i]
                lower, upper = np.percentile(column, [2.5, 97.5])
                p_value = np.nan
                stars = "" if name == "sigma2" else credible_stars(column)
            else:
                lower, upper = estimate - 1.96 * se[i], estimate + 1.96 * se[i]
                if se[i] > 0 and name != "sigma2":
                    p_value = 2.0 * stats.norm.sf(abs(estimate / se[i]))
                else:
                    p_value = np.nan
                stars = significance_stars(p_value)
            rows.append([name, estimate, se[i], lower, upper, p_value, stars])
        return pd.DataFrame(rows, columns=["parameter", "estimate", "se", "ci_lower", "ci_upper",
                                           "p_value", "stars"])

    def to_dict(self) -> Dict:
        return {
            "estimator": self.estimator,
            "outcome": self.outcome,
            "param_names": list(self.param_names),
            "params": self.params,
            "vcov": self.vcov,
            "loglik": self.loglik,
            "n_entities": self.n_entities,
            "n_periods": self.n_periods,
            "controls": list(self.controls),
            "weights_kind": self.weights_kind,
            "weights_checksum": self.weights_checksum,
            "rho_bounds": list(self.rho_bounds),
            "diagnostics": self.diagnostics,
            "table": self.table().to_dict(orient="records"),
        }

    @classmethod
    def from_dict(cls, payload: Dict, draws: Optional[np.ndarray] = None) -> "DsdmFit":
        return cls(
            estimator=payload["estimator"],
            outcome=payload["outcome"],
            param_names=list(payload["param_names"]),
            params=np.asarray(payload["params"], dtype=float),
            vcov=np.asarray(payload["vcov"], dtype=float),
            loglik=float(payload["loglik"]) if payload.get("loglik") is not None else np.nan,
            n_entities=int(payload["n_entities"]),
            n_periods=int(payload["n_periods"]),
            controls=list(payload.get("controls", [])),
            weights_kind=payload.get("weights_kind", "custom"),
            weights_checksum=payload.get("weights_checksum", ""),
            rho_bounds=tuple(payload.get("rho_bounds", (-1.0, 1.0))),
            draws=draws,
            diagnostics=dict(payload.get("diagnostics", {})),
        )


def stationarity_check(tau: float, rho: float, eta: float, eigenvalues: np.ndarray) -> Dict[str, float]:
    """Heuristic |tau| + |rho| + |eta| and the exact spectral radius of the reduced-form lag operator"""
    heuristic = abs(tau) + abs(rho) + abs(eta)
    radius = float(np.max(np.abs((tau + eta * eigenvalues) / (1.0 - rho * eigenvalues))))
    if abs(tau) >= 1:
        warnings.warn(f"tau estimate {tau:.4f} implies a non-stationary temporal lag",
                      EstimationWarning, stacklevel=3)
    elif heuristic >= 1:
        warnings.warn(
            f"|tau| + |rho| + |eta| = {heuristic:.3f} >= 1; stationarity not guaranteed "
            f"(reduced-form spectral radius {radius:.3f})",
            EstimationWarning,
            stacklevel=3,
        )
    return {"stationarity_heuristic": heuristic, "spectral_radius": radius}


def _line_search(data: DsdmData, regression):
    """Bounded Brent search on the profile likelihood, polished on its analytic score"""
    lower, upper = data.weights.rho_bounds()
    bounds = (lower + BOUNDARY_MARGIN, upper - BOUNDARY_MARGIN)
    trace = []

    def objective(rho):
        value = profile_loglik(rho, data, regression=regression)
        trace.append((float(rho), float(value)))
        return -value

    result = optimize.minimize_scalar(objective, bounds=bounds, method="bounded",
                                      options={"xatol": LINE_SEARCH_XATOL, "maxiter": LINE_SEARCH_MAXITER})
    if not result.success:
        raise ConvergenceError(
            f"rho line search did not converge within {LINE_SEARCH_MAXITER} iterations "
            f"(last rho={result.x:.8f})",
            trace=trace,
        )
    rho = float(result.x)

    # Refine to machine precision where the score changes sign around the Brent solution
    step = 10 * LINE_SEARCH_XATOL
    left, right = max(bounds[0], rho - step), min(bounds[1], rho + step)
    f_left = profile_score(left, data, regression)
    f_right = profile_score(right, data, regression)
    if np.sign(f_left) != np.sign(f_right):
        rho = optimize.brentq(profile_score, left, right, args=(data, regression), xtol=1e-15, rtol=SCORE_RTOL)
    LOGGER.debug("rho line search: %d evaluations, rho=%.10f", len(trace), rho)
    return rho, trace


def _epsilon(params: np.ndarray) -> np.ndarray:
    eps = 1e-5 * np.maximum(1.0, np.abs(params))
    eps[-1] = min(eps[-1], 0.1 * params[-1])
    return eps


def _invert(matrix: np.ndarray, what: str) -> np.ndarray:
    """Inverse, or pseudo-inverse with a warning when near-singular"""
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(f"{what} is near-singular (condition {cond:.3g}); using pseudo-inverse",
                      EstimationWarning, stacklevel=3)
        return np.linalg.pinv(matrix)
    return np.linalg.inv(matrix)


def maximize(data: DsdmData) -> Dict:
    """Concentrated ML point estimates and the log-likelihood at the optimum"""
    regression = concentrate(data)
    rho, trace = _line_search(data, regression)
    params = join_params(rho, regression.coefficients(rho), regression.sigma2(rho))
    return {"params": params, "loglik": loglik(params, data), "evaluations": len(trace)}


def hessian(params: np.ndarray, data: DsdmData) -> np.ndarray:
    """Central finite-difference Hessian of the log-likelihood"""
    return approx_hess3(params, loglik, epsilon=_epsilon(params), args=(data,))


def score_contributions(params: np.ndarray, data: DsdmData) -> np.ndarray:
    """(T-1) x k Jacobian of the per-quarter log-likelihood terms"""
    return approx_fprime(params, loglik_contributions, epsilon=_epsilon(params), args=(data,), centered=True)


def _build_fit(spec: DsdmSpec, data: DsdmData, estimate: Dict, vcov: np.ndarray, diagnostics: Dict) -> DsdmFit:
    params = estimate["params"]
    diagnostics.update(stationarity_check(params[0], params[1], params[2], data.weights.eigenvalues))
    diagnostics["imputed_cells"] = data.imputed_cells
    return DsdmFit(
        estimator=spec.estimator,
        outcome=spec.outcome,
        param_names=list(data.param_names),
        params=params,
        vcov=0.5 * (vcov + vcov.T),
        loglik=estimate["loglik"],
        n_entities=data.n_entities,
        n_periods=data.n_periods,
        controls=list(spec.controls),
        weights_kind=data.weights.kind,
        weights_checksum=data.weights.checksum,
        rho_bounds=data.weights.rho_bounds(),
        diagnostics=diagnostics,
    )


def _apply_bias_correction(spec: DsdmSpec, data: DsdmData, estimate: Dict, information: np.ndarray,
                           diagnostics: Dict) -> None:
    """Replace the ML point estimates by their bias-corrected values when requested"""
    diagnostics["bias_correction"] = spec.bias_correction
    if spec.bias_correction == "none":
        return
    params = estimate["params"]
    corrected = correct_bias(params, information, data)
    lower, upper = data.weights.rho_bounds()
    if not (lower < corrected[1] < upper and corrected[-1] > 0):
        warnings.warn(f"Bias-corrected estimates leave the parameter space (rho={corrected[1]:.4f}, "
                      f"sigma2={corrected[-1]:.4g}); reporting uncorrected estimates",
                      EstimationWarning, stacklevel=3)
        diagnostics["bias_correction"] = "failed"
        return
    diagnostics["uncorrected_params"] = [float(v) for v in params]
    estimate["params"] = corrected


def fit_mle_data(data: DsdmData, spec: DsdmSpec) -> DsdmFit:
    estimate = maximize(data)
    information = -hessian(estimate["params"], data)
    vcov = _invert(information, "Negative Hessian")
    diagnostics = {"line_search_evaluations": estimate["evaluations"]}
    _apply_bias_correction(spec, data, estimate, information, diagnostics)
    LOGGER.info("MLE: rho=%.4f, tau=%.4f, loglik=%.3f", estimate["params"][1], estimate["params"][0],
                estimate["loglik"])
    return _build_fit(spec, data, estimate, vcov, diagnostics)


def fit_qmle_data(data: DsdmData, spec: DsdmSpec) -> DsdmFit:
    estimate = maximize(data)
    params = estimate["params"]
    information = -hessian(params, data)
    h_inv = _invert(information, "Negative Hessian")
    scores = np.atleast_2d(score_contributions(params, data))
    # Quarter scores of the demeaned panel sum to zero; scale the meat by T / (T - 1)
    periods = scores.shape[0]
    outer = scores.T @ scores * (periods / max(periods - 1, 1))
    vcov = h_inv @ outer @ h_inv
    diagnostics = {"line_search_evaluations": estimate["evaluations"]}
    _apply_bias_correction(spec, data, estimate, information, diagnostics)
    LOGGER.info("QMLE: rho=%.4f, tau=%.4f, loglik=%.3f", estimate["params"][1], estimate["params"][0],
                estimate["loglik"])
    return _build_fit(spec, data, estimate, vcov, diagnostics)



def fit_mle(spec: DsdmSpec, panel: PanelDataset) -> DsdmFit:
    """Concentrated maximum likelihood with inverse negative Hessian covariance"""
    return fit_mle_data(prepare_data(panel, spec), _as(spec, "mle"))


def fit_qmle(spec: DsdmSpec, panel: PanelDataset) -> DsdmFit:
    """ML point estimates with the sandwich covariance H^-1 G H^-1"""
    return fit_qmle_data(prepare_data(panel, spec), _as(spec, "qmle"))


def _as(spec: DsdmSpec, estimator: str) -> DsdmSpec:
    return spec if spec.estimator == estimator else replace(spec, estimator=estimator)
