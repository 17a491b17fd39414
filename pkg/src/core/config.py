"""
Configuration settings for estimation runs
"""

import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .errors import ConfigError


def default_workers() -> int:
    """Worker count from BANKSPILL_WORKERS, 1 when unset"""
    raw = os.environ.get("BANKSPILL_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"BANKSPILL_WORKERS must be an integer, got '{raw}'")
    return workers if workers != 0 else 1


def default_log_level() -> str:
    return os.environ.get("BANKSPILL_LOG_LEVEL", "INFO").upper()


@dataclass(frozen=True)
class McmcConfig:
    """Configuration for the Metropolis-within-Gibbs sampler"""

    iterations: int = 10000
    burn_in: int = 5000
    seed: int = 42

    # Random-walk scale for rho; the coefficient block and sigma2 are Gibbs steps
    step_sizes: Dict[str, float] = field(default_factory=lambda: {"rho": 0.05})
    adapt: bool = True
    target_acceptance: float = 0.3
    adapt_every: int = 50

    # Test hook: sample from the prior alone
    use_likelihood: bool = True

    def __post_init__(self):
        if self.iterations < 2:
            raise ConfigError("iterations must be at least 2")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError(
                f"burn_in ({self.burn_in}) must be nonnegative and below iterations ({self.iterations})"
            )
        for name, step in self.step_sizes.items():
            if step <= 0:
                raise ConfigError(f"step size for '{name}' must be positive")

    @property
    def rho_step(self) -> float:
        return float(self.step_sizes.get("rho", 0.05))


@dataclass(frozen=True)
class SdidConfig:
    """Configuration for synthetic difference-in-differences runs"""

    outcome: str = "ROE"
    t0: str = "2023Q1"
    bootstrap: int = 200
    seed: int = 42
    zeta_unit: Optional[float] = None
    zeta_time: Optional[float] = None
    intercept: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.bootstrap == 1 or self.bootstrap < 0:
            raise ConfigError("bootstrap must be 0 (no inference) or at least 2")
        for name in ("zeta_unit", "zeta_time"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class EventStudyConfig:
    """Configuration for the relative-time event study"""

    outcome: str = "ROE"
    horizons: Tuple[int, ...] = (-4, -3, -2, -1, 0, 1, 2, 3, 4)
    earliest_quarter: Optional[str] = None
    bootstrap: int = 200
    seed: int = 42
    zeta_unit: Optional[float] = None
    zeta_time: Optional[float] = None
    n_jobs: int = 1

    def __post_init__(self):
        if not self.horizons:
            raise ConfigError("event study needs at least one horizon")
        if self.bootstrap == 1 or self.bootstrap < 0:
            raise ConfigError("bootstrap must be 0 or at least 2")


@dataclass(frozen=True)
class RunConfig:
    """Global settings shared by every CLI subcommand"""

    command: str
    params: Dict[str, object]
    seed: int = 42
    output_dir: str = "results"
    log_level: str = "INFO"
    workers: int = 1
