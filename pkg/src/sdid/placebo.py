"""
Placebo robustness checks: a shifted treatment date and random reassignment
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from joblib import Parallel, delayed

from src.core.config import SdidConfig
from src.core.errors import SdidError
from src.panel import PanelDataset, quarter_position
from .estimator import SdidProblem, SdidResult, _estimate, fit_sdid, problem_from_panel

LOGGER = logging.getLogger(__name__)

MIN_RANDOM_REPS = 100


@dataclass
class PlaceboDistribution:
    """Permutation distribution of ATTs around the actual estimate"""

    actual: float
    draws: np.ndarray
    p_value: float
    seed: int

    def to_dict(self) -> Dict:
        return {
            "actual_att": self.actual,
            "p_value": self.p_value,
            "reps": int(self.draws.size),
            "mean": float(self.draws.mean()),
            "sd": float(self.draws.std(ddof=1)),
            "seed": self.seed,
        }


def placebo_shift(panel: PanelDataset, fake_t0: str, config: Optional[SdidConfig] = None) -> SdidResult:
    """Refit with adoption moved to fake_t0, using only quarters before true adoption"""
    config = config or SdidConfig()
    problem = problem_from_panel(panel, config)
    true_start = problem.t0
    fake = quarter_position(problem.quarters, fake_t0)
    if fake >= true_start:
        raise SdidError(f"Placebo date {fake_t0} must precede the true adoption quarter {config.t0}")
    if fake < 2:
        raise SdidError(f"Placebo date {fake_t0} leaves {fake} pre-periods; at least 2 are needed")
    shifted = SdidProblem(
        Y=problem.Y[:, :true_start],
        treated=problem.treated,
        t0=fake,
        zeta_unit=config.zeta_unit,
        zeta_time=config.zeta_time,
        intercept=config.intercept,
        controls=problem.controls,
        entity_ids=problem.entity_ids,
        quarters=problem.quarters[:true_start],
    )
    LOGGER.info("Placebo shift: adoption moved from %s to %s", config.t0, fake_t0)
    return fit_sdid(shifted, bootstrap=config.bootstrap, seed=config.seed, n_jobs=config.n_jobs)


def _reassigned_att(problem: SdidProblem, seed: int, index: int) -> float:
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    pool = np.asarray(problem.treated + problem.controls)
    order = rng.permutation(pool)
    n_treated = problem.n_treated
    return _estimate(problem, tuple(order[:n_treated]), tuple(order[n_treated:]))["att"]


def placebo_random(panel: PanelDataset, config: Optional[SdidConfig] = None, reps: int = 500,
                   seed: Optional[int] = None) -> PlaceboDistribution:
    """ATTs under random reassignment of the treated label and the rank p-value of the actual ATT.

    p = (1 + #{|placebo| >= |actual|}) / (reps + 1)
    """
    config = config or SdidConfig()
    if reps < MIN_RANDOM_REPS:
        raise SdidError(f"Random placebo needs at least {MIN_RANDOM_REPS} reps, got {reps}")
    seed = config.seed if seed is None else seed
    problem = problem_from_panel(panel, config)
    if problem.n_control < 2:
        raise SdidError("Random placebo needs at least 2 controls")
    actual = _estimate(problem, problem.treated, problem.controls)["att"]
    draws = Parallel(n_jobs=config.n_jobs)(
        delayed(_reassigned_att)(problem, seed, r) for r in range(reps)
    )
    draws = np.asarray(draws, dtype=float)
    exceed = int(np.sum(np.abs(draws) >= abs(actual)))
    p_value = (1.0 + exceed) / (reps + 1.0)
    LOGGER.info("Random placebo: actual ATT %.4f, %d of %d placebo ATTs as extreme, p=%.3f",
                actual, exceed, reps, p_value)
    return PlaceboDistribution(actual=actual, draws=draws, p_value=p_value, seed=seed)
