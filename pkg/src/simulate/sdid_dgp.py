"""
Potential-outcomes panels for synthetic difference-in-differences checks
"""

import logging
from typing import List

import numpy as np
from joblib import Parallel, delayed

from src.panel import PanelDataset, quarter_sequence
from .dgp import DgpSpec, assign_treated, derive_seed, entity_label, innovation_draws

LOGGER = logging.getLogger(__name__)


def _adoption_columns(spec: DgpSpec, treated: np.ndarray) -> np.ndarray:
    """First treated column per entity, -1 for never treated; 'step' staggers cohorts one quarter apart"""
    adoption = np.full(spec.n, -1)
    members = np.flatnonzero(treated)
    if spec.sdid_variant == "step" and spec.cohorts > 1:
        for c, group in enumerate(np.array_split(members, spec.cohorts)):
            adoption[group] = min(spec.t0 + c, spec.t - 1)
    else:
        adoption[members] = spec.t0
    return adoption


def gen_sdid(spec: DgpSpec) -> PanelDataset:
    """Y = Y(0) + D * effect with Y(0) = mu_i + delta_t + kappa_i * t + noise.

    parallel: kappa = 0. trends: control slopes uniform on
    [-trend_scale, trend_scale], treated slopes on [trend_scale / 2,
    trend_scale]. step: parallel trends with staggered cohorts.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    mu = rng.normal(0.0, 1.0, size=spec.n) * spec.fe_scale
    delta = rng.normal(0.0, 1.0, size=spec.t) * spec.fe_scale
    noise = innovation_draws(rng, (spec.n, spec.t), spec.sigma, spec.errors)
    treated = assign_treated(rng, spec, mu)

    slopes = np.zeros(spec.n)
    if spec.sdid_variant == "trends" and spec.trend_scale > 0:
        slopes = rng.uniform(-spec.trend_scale, spec.trend_scale, size=spec.n)
        slopes[treated] = rng.uniform(spec.trend_scale / 2.0, spec.trend_scale, size=int(treated.sum()))

    adoption = _adoption_columns(spec, treated)
    columns = np.arange(spec.t)
    treatment = ((adoption[:, None] >= 0) & (columns[None, :] >= adoption[:, None])).astype(float)
    untreated = mu[:, None] + delta[None, :] + slopes[:, None] * columns[None, :] + noise
    Y = untreated + spec.effect * treatment

    panel = PanelDataset(
        entity_ids=[entity_label(i) for i in range(spec.n)],
        quarters=quarter_sequence(spec.start_quarter, spec.t),
        outcomes={spec.outcome: Y},
        treatment=treatment,
        metadata={"truth": spec.truth(), "dgp": "sdid", "untreated": untreated},
    )
    LOGGER.info("Simulated SDID panel %d x %d (%s, %d treated, effect %.4g, seed %d)", spec.n, spec.t,
                spec.sdid_variant, int(treated.sum()), spec.effect, spec.seed)
    return panel


def generate_batch(spec: DgpSpec, reps: int, generator=gen_sdid, n_jobs: int = 1) -> List[PanelDataset]:
    """Independent panels with seeds derived from spec.seed"""
    return Parallel(n_jobs=n_jobs)(
        delayed(generator)(spec.with_seed(derive_seed(spec.seed, i))) for i in range(reps)
    )
