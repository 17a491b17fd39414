"""
Forward simulation of the dynamic spatial Durbin model
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy import linalg

from src.core.errors import SimulationError
from src.panel import PanelDataset, quarter_sequence
from .dgp import DgpSpec, assign_treated, entity_label, innovation_draws

LOGGER = logging.getLogger(__name__)

EXPLOSIVE_LIMIT = 1e8


@dataclass(frozen=True)
class DsdmInnovations:
    """Every random draw behind one simulated panel, burn-in periods included"""

    entity_effects: np.ndarray
    time_effects: np.ndarray
    controls: np.ndarray
    shocks: np.ndarray
    treatment: np.ndarray

    @property
    def periods(self) -> int:
        return self.shocks.shape[1]


def dsdm_innovations(spec: DgpSpec) -> DsdmInnovations:
    """Draw fixed effects, controls, shocks and treatment in a fixed order from the settings' seed"""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    periods = spec.burn_in + spec.t
    mu = rng.normal(0.0, 1.0, size=spec.n) * spec.fe_scale
    delta = rng.normal(0.0, 1.0, size=periods) * spec.fe_scale
    controls = rng.normal(0.0, 1.0, size=(len(spec.gamma), spec.n, periods))
    shocks = innovation_draws(rng, (spec.n, periods), spec.sigma, spec.errors)
    treated = assign_treated(rng, spec, mu)
    treatment = np.zeros((spec.n, periods))
    treatment[treated, spec.burn_in + spec.t0:] = 1.0
    return DsdmInnovations(mu, delta, controls, shocks, treatment)


def gen_dsdm(spec: DgpSpec) -> PanelDataset:
    """Simulate (I - rho W) Y_t = tau Y_{t-1} + eta W Y_{t-1} + beta D_t + theta W D_t + Gamma X_t + mu + delta_t + e_t.

    Starts from Y = 0, discards spec.burn_in periods and stores the
    ground truth in metadata["truth"].
    """
    weights = spec.weight_matrix()
    W = weights.matrix
    draws = dsdm_innovations(spec)
    factor = linalg.lu_factor(np.eye(spec.n) - spec.rho * W)
    gamma = np.asarray(spec.gamma)

    Y = np.zeros((spec.n, draws.periods))
    previous = np.zeros(spec.n)
    for t in range(draws.periods):
        d = draws.treatment[:, t]
        rhs = (spec.tau * previous + spec.eta * (W @ previous) + spec.beta * d + spec.theta * (W @ d)
               + draws.entity_effects + draws.time_effects[t] + draws.shocks[:, t])
        if gamma.size:
            rhs = rhs + np.tensordot(gamma, draws.controls[:, :, t], axes=1)
        current = linalg.lu_solve(factor, rhs)
        if not np.all(np.isfinite(current)) or np.abs(current).max() > EXPLOSIVE_LIMIT:
            raise SimulationError(
                f"Explosive trajectory at period {t}: |Y| exceeds {EXPLOSIVE_LIMIT:.0e}; "
                f"reduce tau, rho or eta (tau={spec.tau}, rho={spec.rho}, eta={spec.eta})"
            )
        Y[:, t] = current
        previous = current

    keep = slice(spec.burn_in, None)
    labels = [entity_label(i) for i in range(spec.n)]
    panel = PanelDataset(
        entity_ids=labels,
        quarters=quarter_sequence(spec.start_quarter, spec.t),
        outcomes={spec.outcome: Y[:, keep]},
        treatment=draws.treatment[:, keep],
        controls={name: draws.controls[k][:, keep] for k, name in enumerate(spec.control_names)},
        metadata={"truth": spec.truth(), "dgp": "dsdm"},
    )
    LOGGER.info("Simulated DSDM panel %d x %d (seed %d, %d burn-in periods)", spec.n, spec.t, spec.seed,
                spec.burn_in)
    return panel


def truth_table(spec: DgpSpec) -> Dict[str, float]:
    """True values keyed by DSDM parameter name"""
    values = {"tau": spec.tau, "rho": spec.rho, "eta": spec.eta, "beta": spec.beta, "theta": spec.theta}
    values.update({f"gamma_{name}": g for name, g in zip(spec.control_names, spec.gamma)})
    values["sigma2"] = spec.sigma ** 2
    return values
