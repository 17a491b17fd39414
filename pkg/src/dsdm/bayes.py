"""
Bayesian DSDM by Metropolis-within-Gibbs.

Priors: tau, rho, eta ~ Uniform(-1, 1) (rho further restricted to the
admissible interval of W); beta, theta, gamma ~ Normal(0, 10) with 10
read as the variance; sigma2 ~ Inverse-Gamma(0.01, 0.01) with density
proportional to x^(-a-1) exp(-b/x).
"""

import logging
import warnings
from typing import Dict

import numpy as np
from scipy import linalg

from src.core.config import McmcConfig
from src.core.errors import EstimationWarning
from src.panel import PanelDataset
from .data import DsdmData, DsdmSpec, prepare_data
from .fit import DsdmFit, _as, stationarity_check
from .likelihood import concentrate, join_params, loglik

LOGGER = logging.getLogger(__name__)

PRIOR_VARIANCE = 10.0
IG_SHAPE = 0.01
IG_SCALE = 0.01
MAX_REJECTIONS = 100
ACCEPTANCE_RANGE = (0.1, 0.6)
RHAT_LIMIT = 1.1


def split_rhat(draws: np.ndarray) -> np.ndarray:
    """Potential scale reduction of each column with the chain split in two halves"""
    m = draws.shape[0] // 2
    if m < 2:
        return np.full(draws.shape[1], np.nan)
    halves = np.stack([draws[:m], draws[m:2 * m]])
    within = halves.var(axis=1, ddof=1).mean(axis=0)
    between = m * halves.mean(axis=1).var(axis=0, ddof=1)
    pooled = (m - 1) / m * within + between / m
    with np.errstate(invalid="ignore", divide="ignore"):
        rhat = np.sqrt(pooled / within)
    return np.where(within > 0, rhat, 1.0)


class GibbsSampler:
    """State and update steps of the chain; one instance per fit"""

    def __init__(self, data: DsdmData, cfg: McmcConfig):
        """Precompute cross products and prior precision"""
        self.data = data
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.cross = data.cross
        self.k = len(data.regressor_names)
        self.n_obs = data.n_obs
        self.n_periods = data.n_periods
        # tau and eta carry flat priors; the rest Normal(0, 10)
        self.prior_precision = np.full(self.k, 1.0 / PRIOR_VARIANCE)
        self.prior_precision[:2] = 0.0
        lower, upper = data.weights.rho_bounds()
        self.rho_lower = max(-1.0, lower)
        self.rho_upper = min(1.0, upper)
        self.step = cfg.rho_step
        self.eigenvalues = data.weights.eigenvalues

    def ssr(self, coefs: np.ndarray, rho: float) -> float:
        c = self.cross
        yy = c["yy"] - 2.0 * rho * c["ywy"] + rho * rho * c["wywy"]
        zy = c["zy"] - rho * c["zwy"]
        return float(yy - 2.0 * coefs @ zy + coefs @ c["zz"] @ coefs)

    def log_det(self, rho: float) -> float:
        return float(np.sum(np.log(1.0 - rho * self.eigenvalues)).real)

    def draw_coefficients(self, rho: float, sigma2: float, previous: np.ndarray) -> np.ndarray:
        """Conditional Gaussian draw; |tau|, |eta| < 1 enforced by rejection"""
        if not self.cfg.use_likelihood:
            draw = self.rng.normal(0.0, np.sqrt(PRIOR_VARIANCE), self.k)
            draw[:2] = self.rng.uniform(-1.0, 1.0, 2)
            return draw
        precision = self.cross["zz"] / sigma2 + np.diag(self.prior_precision)
        chol = linalg.cholesky(precision, lower=True)
        rhs = (self.cross["zy"] - rho * self.cross["zwy"]) / sigma2
        mean = linalg.cho_solve((chol, True), rhs)
        for _ in range(MAX_REJECTIONS):
            draw = mean + linalg.solve_triangular(chol.T, self.rng.standard_normal(self.k), lower=False)
            if abs(draw[0]) < 1.0 and abs(draw[1]) < 1.0:
                return draw
        return previous

    def draw_rho(self, rho: float, coefs: np.ndarray, sigma2: float):
        """Random-walk Metropolis step including the Jacobian term"""
        proposal = rho + self.step * self.rng.standard_normal()
        u = self.rng.uniform()
        if not self.rho_lower < proposal < self.rho_upper:
            return rho, False
        if not self.cfg.use_likelihood:
            return proposal, True
        current = self.n_periods * self.log_det(rho) - self.ssr(coefs, rho) / (2.0 * sigma2)
        candidate = self.n_periods * self.log_det(proposal) - self.ssr(coefs, proposal) / (2.0 * sigma2)
        if np.log(u) < candidate - current:
            return proposal, True
        return rho, False

    def draw_sigma2(self, coefs: np.ndarray, rho: float) -> float:
        if not self.cfg.use_likelihood:
            return IG_SCALE / max(self.rng.gamma(IG_SHAPE), np.finfo(float).tiny)
        shape = IG_SHAPE + 0.5 * self.n_obs
        scale = IG_SCALE + 0.5 * self.ssr(coefs, rho)
        return scale / self.rng.gamma(shape)

    def run(self) -> Dict:
        cfg = self.cfg
        if cfg.use_likelihood:
            regression = concentrate(self.data)
            rho = 0.0 if self.rho_lower < 0.0 < self.rho_upper else 0.5 * (self.rho_lower + self.rho_upper)
            coefs = regression.coefficients(rho)
            coefs[:2] = np.clip(coefs[:2], -0.99, 0.99)
            sigma2 = max(regression.sigma2(rho), 1e-8)
        else:
            rho, coefs, sigma2 = 0.0, np.zeros(self.k), 1.0

        kept = cfg.iterations - cfg.burn_in
        draws = np.empty((kept, self.k + 2))
        window_accepts = 0
        accepted_after = 0
        for it in range(cfg.iterations):
            coefs = self.draw_coefficients(rho, sigma2, coefs)
            rho, accepted = self.draw_rho(rho, coefs, sigma2)
            sigma2 = self.draw_sigma2(coefs, rho)
            if it < cfg.burn_in:
                window_accepts += accepted
                if cfg.adapt and (it + 1) % cfg.adapt_every == 0:
                    rate = window_accepts / cfg.adapt_every
                    self.step *= 1.1 if rate > cfg.target_acceptance else 1.0 / 1.1
                    window_accepts = 0
            else:
                accepted_after += accepted
                draws[it - cfg.burn_in] = join_params(rho, coefs, sigma2)
        return {"draws": draws, "acceptance_rho": accepted_after / kept, "rho_step": self.step}


def fit_bayes_data(data: DsdmData, spec: DsdmSpec, cfg: McmcConfig) -> DsdmFit:
    sampler = GibbsSampler(data, cfg)
    result = sampler.run()
    draws = result["draws"]
    rhat = split_rhat(draws)
    diagnostics = {
        "acceptance_rho": result["acceptance_rho"],
        "rho_step": result["rho_step"],
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "use_likelihood": cfg.use_likelihood,
        "rhat": dict(zip(data.param_names, rhat)),
        "rhat_flag": bool(np.nanmax(rhat) > RHAT_LIMIT) if np.isfinite(rhat).any() else False,
    }
    low, high = ACCEPTANCE_RANGE
    if not low <= result["acceptance_rho"] <= high:
        warnings.warn(f"rho acceptance rate {result['acceptance_rho']:.3f} outside [{low}, {high}]",
                      EstimationWarning, stacklevel=2)
    if diagnostics["rhat_flag"]:
        worst = data.param_names[int(np.nanargmax(rhat))]
        warnings.warn(f"Split-chain R-hat {np.nanmax(rhat):.3f} > {RHAT_LIMIT} for '{worst}'",
                      EstimationWarning, stacklevel=2)

    means = draws.mean(axis=0)
    vcov = np.cov(draws, rowvar=False, ddof=1)
    diagnostics.update(stationarity_check(means[0], means[1], means[2], data.weights.eigenvalues))
    diagnostics["imputed_cells"] = data.imputed_cells
    try:
        value = loglik(means, data) if cfg.use_likelihood else np.nan
    except ValueError:
        value = np.nan
    LOGGER.info("Bayes: %d draws kept, rho acceptance %.3f, posterior mean rho=%.4f",
                draws.shape[0], result["acceptance_rho"], means[1])
    return DsdmFit(
        estimator="bayes",
        outcome=spec.outcome,
        param_names=list(data.param_names),
        params=means,
        vcov=0.5 * (vcov + vcov.T),
        loglik=value,
        n_entities=data.n_entities,
        n_periods=data.n_periods,
        controls=list(spec.controls),
        weights_kind=data.weights.kind,
        weights_checksum=data.weights.checksum,
        rho_bounds=data.weights.rho_bounds(),
        draws=draws,
        diagnostics=diagnostics,
    )


def fit_bayes(spec: DsdmSpec, panel: PanelDataset, cfg: McmcConfig = None) -> DsdmFit:
    """Posterior means, SDs and credible intervals from the post-burn-in chain"""
    cfg = cfg or McmcConfig()
    return fit_bayes_data(prepare_data(panel, spec), _as(spec, "bayes"), cfg)
