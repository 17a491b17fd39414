"""
Synthetic difference-in-differences: unit and time weights, the ATT,
stratified bootstrap inference and the classical DiD baseline
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.core.config import SdidConfig
from src.core.errors import SdidError
from src.panel import PanelDataset, complete_entities, quarter_position, size_split
from .solver import solve_simplex_ridge

LOGGER = logging.getLogger(__name__)

Z_95 = 1.96
TIME_ZETA_SCALE = 1e-6


@dataclass(frozen=True)
class SdidProblem:
    """Outcome matrix with a treated block starting at column t0.

    `pre` defaults to the columns before t0 and `post` to t0 onward;
    `controls` defaults to every entity not in `treated`.
    """

    Y: np.ndarray
    treated: Tuple[int, ...]
    t0: int
    zeta_unit: Optional[float] = None
    zeta_time: Optional[float] = None
    intercept: bool = False
    controls: Optional[Tuple[int, ...]] = None
    pre: Optional[Tuple[int, ...]] = None
    post: Optional[Tuple[int, ...]] = None
    entity_ids: Optional[Tuple[str, ...]] = None
    quarters: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float, copy=True)
        if Y.ndim != 2:
            raise SdidError("Y must be an N x T matrix")
        n, t = Y.shape
        treated = tuple(int(i) for i in self.treated)
        controls = tuple(int(i) for i in (self.controls if self.controls is not None
                                          else [i for i in range(n) if i not in set(treated)]))
        if not treated:
            raise SdidError("Treated set is empty")
        if not controls:
            raise SdidError("Control set is empty")
        if set(treated) & set(controls):
            raise SdidError("Treated and control sets overlap")
        if not 2 <= self.t0 <= t - 1:
            raise SdidError(f"t0={self.t0} needs 2 <= t0 <= T-1 = {t - 1}")
        pre = tuple(range(self.t0)) if self.pre is None else tuple(int(c) for c in self.pre)
        post = tuple(range(self.t0, t)) if self.post is None else tuple(int(c) for c in self.post)
        if not post:
            raise SdidError("No post-treatment period")
        rows = list(treated) + list(controls)
        cols = list(pre) + list(post)
        if np.isnan(Y[np.ix_(rows, cols)]).any():
            raise SdidError("SDID needs complete outcomes for every treated and control entity")
        for zeta in (self.zeta_unit, self.zeta_time):
            if zeta is not None and zeta < 0:
                raise SdidError("Regularization strengths must be nonnegative")
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "treated", treated)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)

    @property
    def n_treated(self) -> int:
        return len(self.treated)

    @property
    def n_control(self) -> int:
        return len(self.controls)

    def blocks(self, treated=None, controls=None):
        """(treated pre, treated post, control pre, control post) sub-matrices"""
        treated = self.treated if treated is None else treated
        controls = self.controls if controls is None else controls
        Y = self.Y
        return (Y[np.ix_(treated, self.pre)], Y[np.ix_(treated, self.post)],
                Y[np.ix_(controls, self.pre)], Y[np.ix_(controls, self.post)])

    def with_sets(self, treated, controls) -> "SdidProblem":
        return SdidProblem(self.Y, tuple(treated), self.t0, self.zeta_unit, self.zeta_time, self.intercept,
                           tuple(controls), self.pre, self.post, self.entity_ids, self.quarters)


@dataclass
class SdidResult:
    """ATT with bootstrap SE and the fitted weights"""

    att: float
    se: float
    ci_lower: float
    ci_upper: float
    omega: np.ndarray
    lambda_: np.ndarray
    bootstrap_draws: np.ndarray = field(default_factory=lambda: np.empty(0))
    did: float = float("nan")
    pre_fit_rmse: float = float("nan")
    zeta_unit: float = float("nan")
    zeta_time: float = float("nan")
    n_treated: int = 0
    n_control: int = 0
    control_ids: Tuple[str, ...] = ()
    pre_quarters: Tuple[str, ...] = ()

    def __post_init__(self):
        for name, w in (("omega", self.omega), ("lambda", self.lambda_)):
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
                raise SdidError(f"{name} weights are off the simplex")

    def to_dict(self) -> Dict:
        return {
            "att": self.att,
            "se": self.se,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "did": self.did,
            "pre_fit_rmse": self.pre_fit_rmse,
            "zeta_unit": self.zeta_unit,
            "zeta_time": self.zeta_time,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "bootstrap_reps": int(self.bootstrap_draws.size),
        }

    def weights_frame(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        units = pd.DataFrame({"entity": list(self.control_ids) or list(range(self.omega.size)),
                              "omega": self.omega})
        periods = pd.DataFrame({"quarter": list(self.pre_quarters) or list(range(self.lambda_.size)),
                                "lambda": self.lambda_})
        return units, periods


def noise_scale(control_pre: np.ndarray) -> float:
    """Standard deviation of first-differenced control outcomes over pre-periods"""
    diffs = np.diff(control_pre, axis=1).ravel()
    if diffs.size < 2:
        return 0.0
    return float(np.std(diffs, ddof=1))


def default_zetas(problem: SdidProblem, n_treated: int, control_pre: np.ndarray) -> Tuple[float, float]:
    """zeta_unit = (N_treated * T_post)^(1/4) * sigma, zeta_time = 1e-6 * sigma unless set"""
    sigma = noise_scale(control_pre)
    zeta_unit = problem.zeta_unit
    if zeta_unit is None:
        zeta_unit = (n_treated * len(problem.post)) ** 0.25 * sigma
    zeta_time = problem.zeta_time
    if zeta_time is None:
        zeta_time = TIME_ZETA_SCALE * sigma
    return zeta_unit, zeta_time


def _estimate(problem: SdidProblem, treated, controls) -> Dict:
    tr_pre, tr_post, co_pre, co_post = problem.blocks(treated, controls)
    n_co, t_pre = co_pre.shape
    if n_co < 2:
        raise SdidError(f"SDID needs at least 2 controls, got {n_co}")
    if t_pre < 2:
        raise SdidError(f"SDID needs at least 2 pre-periods, got {t_pre}")
    zeta_unit, zeta_time = default_zetas(problem, len(treated), co_pre)

    target = tr_pre.mean(axis=0)
    omega = solve_simplex_ridge(co_pre.T, target, zeta_unit ** 2 * t_pre, intercept=problem.intercept)
    lam = solve_simplex_ridge(co_pre, co_post.mean(axis=1), zeta_time ** 2 * n_co, intercept=problem.intercept)

    treated_diff = tr_post.mean() - tr_pre.mean(axis=0) @ lam
    control_diff = omega @ co_post.mean(axis=1) - omega @ co_pre @ lam
    synthetic = omega @ co_pre
    return {
        "att": float(treated_diff - control_diff),
        "omega": omega,
        "lambda": lam,
        "zeta_unit": float(zeta_unit),
        "zeta_time": float(zeta_time),
        "rmse": float(np.sqrt(np.mean((target - synthetic) ** 2))),
    }


def did_estimate(problem: SdidProblem) -> float:
    """Two-by-two difference in differences with uniform weights"""
    tr_pre, tr_post, co_pre, co_post = problem.blocks()
    return float((tr_post.mean() - tr_pre.mean()) - (co_post.mean() - co_pre.mean()))


def _child_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def resample_sizes(n_treated: int, n_control: int) -> Tuple[int, int]:
    """Draws per stratum: n - 1, so the bootstrap variance of a stratum mean is unbiased"""
    return max(n_treated - 1, 1), max(n_control - 1, 2)


def _bootstrap_replicate(problem: SdidProblem, seed: int, index: int, max_redraws: int) -> float:
    """One stratified resample: treated from treated, controls from controls"""
    rng = _child_rng(seed, index)
    treated = np.asarray(problem.treated)
    controls = np.asarray(problem.controls)
    n_tr, n_co = resample_sizes(treated.size, controls.size)
    for _ in range(max_redraws):
        tr = rng.choice(treated, size=n_tr, replace=True)
        co = rng.choice(controls, size=n_co, replace=True)
        if np.unique(co).size >= 2:
            return _estimate(problem, tr, co)["att"]
    raise SdidError(f"Bootstrap draw {index} found fewer than 2 distinct controls in {max_redraws} tries")


def bootstrap_se(problem: SdidProblem, B: int = 200, seed: int = 42, n_jobs: int = 1) -> Tuple[float, np.ndarray]:
    """Standard deviation (n - 1) of B stratified-bootstrap ATTs, plus the draws"""
    if B < 2:
        raise SdidError(f"bootstrap needs B >= 2, got {B}")
    draws = Parallel(n_jobs=n_jobs)(
        delayed(_bootstrap_replicate)(problem, seed, b, 10 * B) for b in range(B)
    )
    draws = np.asarray(draws, dtype=float)
    return float(np.std(draws, ddof=1)), draws


def fit_sdid(problem: SdidProblem, bootstrap: int = 0, seed: int = 42, n_jobs: int = 1) -> SdidResult:
    """SDID point estimate; bootstrap > 0 adds SE and the normal 95% interval"""
    estimate = _estimate(problem, problem.treated, problem.controls)
    att = estimate["att"]
    se, draws = float("nan"), np.empty(0)
    if bootstrap:
        se, draws = bootstrap_se(problem, bootstrap, seed, n_jobs)
    control_ids = tuple(problem.entity_ids[i] for i in problem.controls) if problem.entity_ids else ()
    pre_quarters = tuple(problem.quarters[c] for c in problem.pre) if problem.quarters else ()
    result = SdidResult(
        att=att,
        se=se,
        ci_lower=att - Z_95 * se,
        ci_upper=att + Z_95 * se,
        omega=estimate["omega"],
        lambda_=estimate["lambda"],
        bootstrap_draws=draws,
        did=did_estimate(problem),
        pre_fit_rmse=estimate["rmse"],
        zeta_unit=estimate["zeta_unit"],
        zeta_time=estimate["zeta_time"],
        n_treated=problem.n_treated,
        n_control=problem.n_control,
        control_ids=control_ids,
        pre_quarters=pre_quarters,
    )
    LOGGER.info("SDID: ATT=%.4f (se %.4f), DiD=%.4f, %d treated, %d controls", att, se, result.did,
                problem.n_treated, problem.n_control)
    return result


def problem_from_panel(panel: PanelDataset, config: Optional[SdidConfig] = None) -> SdidProblem:
    """Block design at config.t0: adopters from t0 onward against never-treated entities.

    Excluded (always-treated) entities, entities adopting before t0 and
    entities with missing outcomes are left out.
    """
    config = config or SdidConfig()
    panel = complete_entities(panel, [config.outcome])
    t0 = quarter_position(panel.quarters, config.t0)
    first = panel.first_treated()
    keep = ~panel.excluded
    early = keep & (first >= 0) & (first < t0)
    if early.any():
        LOGGER.info("%d entities adopt before %s and are left out", int(early.sum()), config.t0)
    treated = np.flatnonzero(keep & (first >= t0))
    controls = np.flatnonzero(keep & (first < 0))
    if treated.size == 0:
        raise SdidError(f"No entity adopts on or after {config.t0}")
    if controls.size < 2:
        raise SdidError(f"SDID needs at least 2 never-treated controls, got {controls.size}")
    return SdidProblem(
        Y=panel.outcome(config.outcome),
        treated=tuple(treated),
        t0=t0,
        zeta_unit=config.zeta_unit,
        zeta_time=config.zeta_time,
        intercept=config.intercept,
        controls=tuple(controls),
        entity_ids=panel.entity_ids,
        quarters=panel.quarters,
    )


def size_split_table(panel: PanelDataset, config: Optional[SdidConfig] = None,
                     quantile: float = 0.75) -> pd.DataFrame:
    """ATT for the full sample and the large / small size groups"""
    config = config or SdidConfig()
    large, small = size_split(panel, quantile)
    rows = []
    for label, group in (("Full Sample", panel), (large.metadata["group"], large), (small.metadata["group"], small)):
        try:
            result = fit_sdid(problem_from_panel(group, config), config.bootstrap, config.seed, config.n_jobs)
        except SdidError as exc:
            LOGGER.warning("Size group '%s' not estimable: %s", label, exc.message)
            rows.append([label, np.nan, np.nan, np.nan, np.nan, 0, 0])
            continue
        rows.append([label, result.att, result.se, result.ci_lower, result.ci_upper,
                     result.n_treated, result.n_control])
    return pd.DataFrame(rows, columns=["group", "att", "se", "ci_lower", "ci_upper", "n_treated", "n_control"])
