"""
Data-generating process settings shared by the DSDM and SDID simulators
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from src.core.errors import SimulationError
from src.spatial import WeightMatrix, row_normalize

TREATMENT_RULES = ("none", "random", "selection")
SDID_VARIANTS = ("parallel", "trends", "step")
ERROR_DISTRIBUTIONS = ("normal", "t5")
MIN_BURN_IN = 50


def derive_seed(seed: int, index: int) -> int:
    """Child seed for replication `index` of a run seeded with `seed`"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def ring_weights(n: int, neighbours: int = 1) -> WeightMatrix:
    """Each entity linked to the `neighbours` nearest entities on either side of a ring"""
    if n < 3:
        raise SimulationError("ring weights need at least 3 entities")
    if not 1 <= neighbours <= (n - 1) // 2:
        raise SimulationError(f"neighbours must lie in [1, {(n - 1) // 2}] for n={n}")
    raw = np.zeros((n, n))
    for i in range(n):
        for k in range(1, neighbours + 1):
            raw[i, (i + k) % n] = 1.0
            raw[i, (i - k) % n] = 1.0
    return row_normalize(raw, labels=[entity_label(i) for i in range(n)], kind="ring")


def entity_label(i: int) -> str:
    return f"B{i + 1:03d}"


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of a synthetic panel; `t0` is the treatment-onset column of the retained panel"""

    n: int = 50
    t: int = 40
    tau: float = 0.0
    rho: float = 0.0
    eta: float = 0.0
    beta: float = 0.0
    theta: float = 0.0
    gamma: Tuple[float, ...] = ()
    sigma: float = 1.0
    weights: Optional[WeightMatrix] = field(default=None, compare=False)
    fe_scale: float = 0.0

    treatment: str = "random"
    treat_share: float = 0.5
    t0: Optional[int] = None
    selection_strength: float = 2.0

    sdid_variant: str = "parallel"
    effect: float = 0.0
    trend_scale: float = 0.0
    cohorts: int = 1

    errors: str = "normal"
    burn_in: int = MIN_BURN_IN
    seed: int = 0
    start_quarter: str = "2015Q1"
    outcome: str = "ROE"

    def __post_init__(self):
        if self.n < 3 or self.t < 2:
            raise SimulationError(f"need n >= 3 and t >= 2, got n={self.n}, t={self.t}")
        if abs(self.tau) >= 1:
            raise SimulationError(f"|tau| must be below 1, got tau={self.tau}")
        if self.sigma < 0:
            raise SimulationError(f"sigma must be nonnegative, got {self.sigma}")
        if self.fe_scale < 0 or self.trend_scale < 0:
            raise SimulationError("fe_scale and trend_scale must be nonnegative")
        if self.burn_in < MIN_BURN_IN:
            raise SimulationError(f"burn_in must be at least {MIN_BURN_IN}, got {self.burn_in}")
        if self.treatment not in TREATMENT_RULES:
            raise SimulationError(f"treatment must be one of {TREATMENT_RULES}")
        if self.sdid_variant not in SDID_VARIANTS:
            raise SimulationError(f"sdid_variant must be one of {SDID_VARIANTS}")
        if self.errors not in ERROR_DISTRIBUTIONS:
            raise SimulationError(f"errors must be one of {ERROR_DISTRIBUTIONS}")
        if not 0 < self.treat_share < 1:
            raise SimulationError(f"treat_share must lie in (0, 1), got {self.treat_share}")
        if self.cohorts < 1:
            raise SimulationError("cohorts must be at least 1")
        t0 = self.t // 2 if self.t0 is None else self.t0
        if not 0 <= t0 < self.t:
            raise SimulationError(f"t0={t0} outside the retained periods 0..{self.t - 1}")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if self.weights is not None:
            if self.weights.n != self.n:
                raise SimulationError(f"weight matrix has {self.weights.n} entities, settings have n={self.n}")
            if not self.weights.contains_rho(self.rho):
                lower, upper = self.weights.rho_bounds()
                raise SimulationError(
                    f"rho={self.rho} outside the admissible interval ({lower:.4g}, {upper:.4g})"
                )
        elif not -1 < self.rho < 1:
            raise SimulationError(f"rho={self.rho} outside the admissible interval (-1, 1)")

    @property
    def control_names(self) -> Tuple[str, ...]:
        return tuple(f"x{k + 1}" for k in range(len(self.gamma)))

    def weight_matrix(self) -> WeightMatrix:
        """W labeled with the simulated entity ids"""
        if self.weights is None:
            return ring_weights(self.n, min(2, (self.n - 1) // 2))
        labels = tuple(entity_label(i) for i in range(self.n))
        if self.weights.labels == labels:
            return self.weights
        return replace(self.weights, labels=labels)

    def with_seed(self, seed: int) -> "DgpSpec":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values["seed"] = seed
        return DgpSpec(**values)

    def truth(self) -> Dict:
        """Ground-truth parameters stored with every simulated panel"""
        values = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "weights"}
        values["gamma"] = {name: g for name, g in zip(self.control_names, self.gamma)}
        values["sigma2"] = self.sigma ** 2
        values["att"] = self.effect
        values["weights_checksum"] = self.weight_matrix().checksum
        return values


def innovation_draws(rng: np.random.Generator, size, sigma: float, errors: str) -> np.ndarray:
    """Normal shocks, or Student t(5) shocks scaled to variance sigma^2"""
    if errors == "t5":
        return rng.standard_t(5, size=size) * sigma * np.sqrt(3.0 / 5.0)
    return rng.normal(0.0, 1.0, size=size) * sigma


def assign_treated(rng: np.random.Generator, spec: DgpSpec, entity_effects: np.ndarray) -> np.ndarray:
    """Boolean treated flags per entity under the configured treatment rule"""
    n = spec.n
    if spec.treatment == "none":
        return np.zeros(n, dtype=bool)
    count = int(np.clip(round(spec.treat_share * n), 1, n - 2))
    if spec.treatment == "random":
        chosen = rng.permutation(n)[:count]
    else:
        scale = entity_effects.std() if entity_effects.std() > 0 else 1.0
        score = spec.selection_strength * entity_effects / scale
        probability = np.exp(score) / np.exp(score).sum()
        chosen = rng.choice(n, size=count, replace=False, p=probability)
    treated = np.zeros(n, dtype=bool)
    treated[chosen] = True
    return treated
