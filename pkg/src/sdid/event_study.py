"""
Relative-time event study built from per-cohort SDID fits, bootstrapped jointly
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.core.config import EventStudyConfig
from src.core.errors import SdidError
from src.panel import PanelDataset, complete_entities, quarter_position
from .estimator import Z_95, SdidProblem, _estimate, resample_sizes

LOGGER = logging.getLogger(__name__)


@dataclass
class EventStudyResult:
    """Per-horizon ATTs aggregated across adoption cohorts by treated count"""

    horizons: List[int]
    att: np.ndarray
    se: np.ndarray
    n_cohorts: np.ndarray
    n_treated: np.ndarray
    cohort_sizes: Dict[str, int] = field(default_factory=dict)
    bootstrap: int = 0

    @property
    def ci_lower(self) -> np.ndarray:
        return self.att - Z_95 * self.se

    @property
    def ci_upper(self) -> np.ndarray:
        return self.att + Z_95 * self.se

    def at(self, horizon: int) -> float:
        return float(self.att[self.horizons.index(horizon)])

    def to_frame(self) -> pd.DataFrame:
        """One plot-ready row per horizon"""
        return pd.DataFrame({
            "horizon": self.horizons,
            "att": self.att,
            "se": self.se,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "n_cohorts": self.n_cohorts,
            "n_treated": self.n_treated,
        })


def _cohort_problem(Y, members, controls, adoption: int, horizon: int, config: EventStudyConfig,
                    entity_ids, quarters) -> Optional[SdidProblem]:
    """SDID design for one cohort at one horizon, None when the horizon is out of reach.

    k >= 0 compares quarter adoption + k against all pre-adoption quarters;
    k < 0 is a placebo at adoption + k against the quarters before it.
    """
    n_periods = Y.shape[1]
    target = adoption + horizon
    if target < 0 or target >= n_periods:
        return None
    t0 = adoption if horizon >= 0 else target
    if t0 < 2:
        return None
    return SdidProblem(
        Y=Y,
        treated=tuple(members),
        t0=t0,
        zeta_unit=config.zeta_unit,
        zeta_time=config.zeta_time,
        controls=tuple(controls),
        pre=tuple(range(t0)),
        post=(target,),
        entity_ids=entity_ids,
        quarters=quarters,
    )


def _aggregate(problems: Dict, counts: Dict, n_horizons: int, treated_sets: Dict, controls) -> np.ndarray:
    """Treated-count weighted ATT per horizon for the given treated and control draws"""
    out = np.full(n_horizons, np.nan)
    for h in range(n_horizons):
        pairs = [(c, p) for (c, hh), p in problems.items() if hh == h]
        if not pairs:
            continue
        weights = np.asarray([counts[c] for c, _ in pairs], dtype=float)
        estimates = [_estimate(p, treated_sets[c], controls)["att"] for c, p in pairs]
        out[h] = float(weights @ np.asarray(estimates) / weights.sum())
    return out


def _joint_replicate(problems: Dict, members: Dict, controls: np.ndarray, n_horizons: int, seed: int,
                     index: int, max_redraws: int) -> np.ndarray:
    """One bootstrap draw of the whole series: shared controls resampled once, each cohort within itself"""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    _, n_co = resample_sizes(1, controls.size)
    for _ in range(max_redraws):
        co = rng.choice(controls, size=n_co, replace=True)
        if np.unique(co).size >= 2:
            break
    else:
        raise SdidError(f"Event-study bootstrap draw {index} found fewer than 2 distinct controls")
    treated_sets = {c: rng.choice(m, size=resample_sizes(m.size, 2)[0], replace=True) for c, m in members.items()}
    counts = {c: m.size for c, m in members.items()}
    return _aggregate(problems, counts, n_horizons, treated_sets, co)


def event_study(panel: PanelDataset, config: Optional[EventStudyConfig] = None) -> EventStudyResult:
    """Staggered-adoption event study; horizon 0 is each entity's first treated quarter.

    Controls are never-treated entities. Standard errors come from a joint
    stratified bootstrap of the whole series, so cohorts sharing controls
    are not treated as independent.
    """
    config = config or EventStudyConfig()
    panel = complete_entities(panel, [config.outcome])
    Y = panel.outcome(config.outcome)
    first = panel.first_treated()
    keep = ~panel.excluded
    controls = np.flatnonzero(keep & (first < 0))
    if controls.size < 2:
        raise SdidError(f"Event study needs at least 2 never-treated controls, got {controls.size}")

    earliest = 0
    if config.earliest_quarter is not None:
        earliest = quarter_position(panel.quarters, config.earliest_quarter)
    cohorts = {}
    for adoption in sorted(set(first[keep & (first >= 0)].tolist())):
        if adoption < max(2, earliest):
            LOGGER.info("Cohort %s skipped: fewer than 2 pre-periods or before the earliest quarter",
                        panel.quarters[adoption])
            continue
        cohorts[adoption] = np.flatnonzero(keep & (first == adoption))
    if not cohorts:
        raise SdidError("No adoption cohort has a treated entity with at least 2 pre-periods")

    horizons = list(config.horizons)
    problems = {}
    for h, horizon in enumerate(horizons):
        for c, (adoption, members) in enumerate(cohorts.items()):
            problem = _cohort_problem(Y, members, controls, adoption, horizon, config,
                                      panel.entity_ids, panel.quarters)
            if problem is not None:
                problems[(c, h)] = problem
    members = {c: m for c, m in enumerate(cohorts.values())}
    counts = {c: m.size for c, m in members.items()}

    att = _aggregate(problems, counts, len(horizons), members, controls)
    n_cohorts = np.zeros(len(horizons), dtype=int)
    n_treated = np.zeros(len(horizons), dtype=int)
    for (c, h) in problems:
        n_cohorts[h] += 1
        n_treated[h] += counts[c]
    for h in np.flatnonzero(n_cohorts == 0):
        LOGGER.warning("Horizon %d is outside the panel for every cohort", horizons[h])

    se = np.full(len(horizons), np.nan)
    if config.bootstrap:
        draws = Parallel(n_jobs=config.n_jobs)(
            delayed(_joint_replicate)(problems, members, controls, len(horizons), config.seed, b,
                                      10 * config.bootstrap)
            for b in range(config.bootstrap)
        )
        draws = np.asarray(draws, dtype=float)
        reached = n_cohorts > 0
        se[reached] = np.std(draws[:, reached], axis=0, ddof=1)
    for h, horizon in enumerate(horizons):
        if n_cohorts[h]:
            LOGGER.info("Horizon %+d: ATT %.4f (se %.4f) over %d cohorts", horizon, att[h], se[h], n_cohorts[h])

    return EventStudyResult(
        horizons=horizons,
        att=att,
        se=se,
        n_cohorts=n_cohorts,
        n_treated=n_treated,
        cohort_sizes={panel.quarters[a]: int(m.size) for a, m in cohorts.items()},
        bootstrap=config.bootstrap,
    )
