"""
Panel data model: a balanced entity x quarter rectangle of outcomes,
treatment and controls
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import PanelError
from .quarters import quarter_ordinal

OUTCOMES = ("ROA", "ROE")
DEFAULT_CONTROLS = ("log_assets", "tier1_ratio", "digital_index", "ceo_age")


def _frozen(array, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SampleFilter:
    """Entity-level sample requirements"""

    min_quarters: int = 4
    required_fields: Tuple[str, ...] = ("ROA", "ROE")

    def __post_init__(self):
        if self.min_quarters < 1:
            raise PanelError("min_quarters must be at least 1")


@dataclass(frozen=True)
class PanelDataset:
    """Immutable entity x quarter panel; missing cells are NaN"""

    entity_ids: Tuple[str, ...]
    quarters: Tuple[str, ...]
    outcomes: Dict[str, np.ndarray]
    treatment: np.ndarray
    controls: Dict[str, np.ndarray] = field(default_factory=dict)
    avg_log_assets: Optional[np.ndarray] = None
    coordinates: Optional[np.ndarray] = None
    mentions: Optional[np.ndarray] = None
    excluded: Optional[np.ndarray] = None
    imputed: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        entity_ids = tuple(str(e) for e in self.entity_ids)
        quarters = tuple(self.quarters)
        if len(set(entity_ids)) != len(entity_ids):
            raise PanelError("Entity keys must be unique")
        ordinals = [quarter_ordinal(q) for q in quarters]
        if any(b <= a for a, b in zip(ordinals, ordinals[1:])):
            raise PanelError("Quarter labels must be strictly increasing")
        shape = (len(entity_ids), len(quarters))

        def checked(name, array, dtype=float):
            array = _frozen(array, dtype)
            if array.shape != shape:
                raise PanelError(f"{name} has shape {array.shape}, expected {shape}")
            return array

        outcomes = {k: checked(k, v) for k, v in self.outcomes.items()}
        controls = {k: checked(k, v) for k, v in self.controls.items()}
        treatment = checked("treatment", self.treatment)
        if np.any(~np.isin(treatment, (0.0, 1.0))):
            raise PanelError("treatment must be binary 0/1")
        mentions = None if self.mentions is None else checked("mentions", self.mentions)
        imputed = {k: checked(f"imputed[{k}]", v, bool) for k, v in self.imputed.items()}

        avg = None if self.avg_log_assets is None else _frozen(self.avg_log_assets)
        if "log_assets" in controls:
            log_assets = controls["log_assets"]
            observed = ~np.isnan(log_assets)
            counts = observed.sum(axis=1)
            sums = np.where(observed, log_assets, 0.0).sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                derived = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
            if avg is not None and not np.allclose(avg, derived, rtol=1e-9, atol=1e-9, equal_nan=True):
                raise PanelError("avg_log_assets disagrees with the time-mean of log_assets")
            avg = _frozen(derived)
        if avg is not None and avg.shape != (shape[0],):
            raise PanelError(f"avg_log_assets has shape {avg.shape}, expected ({shape[0]},)")

        coordinates = None
        if self.coordinates is not None:
            coordinates = _frozen(self.coordinates)
            if coordinates.shape != (shape[0], 2):
                raise PanelError("coordinates must be N x 2 (latitude, longitude)")

        excluded = _frozen(np.zeros(shape[0]) if self.excluded is None else self.excluded, bool)
        if excluded.shape != (shape[0],):
            raise PanelError("excluded flags must have one entry per entity")

        object.__setattr__(self, "entity_ids", entity_ids)
        object.__setattr__(self, "quarters", quarters)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "treatment", treatment)
        object.__setattr__(self, "mentions", mentions)
        object.__setattr__(self, "imputed", imputed)
        object.__setattr__(self, "avg_log_assets", avg)
        object.__setattr__(self, "coordinates", coordinates)
        object.__setattr__(self, "excluded", excluded)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def n_quarters(self) -> int:
        return len(self.quarters)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_entities, self.n_quarters

    def outcome(self, name: str) -> np.ndarray:
        """Outcome matrix by case-insensitive name ('roa' -> ROA)"""
        key = name.upper()
        if key not in self.outcomes:
            raise PanelError(f"Outcome '{name}' not in panel (has {sorted(self.outcomes)})")
        return self.outcomes[key]

    def variable(self, name: str) -> np.ndarray:
        """Any N x T variable by name: outcome, control, 'treatment' or 'mentions'"""
        if name.upper() in self.outcomes:
            return self.outcomes[name.upper()]
        if name in self.controls:
            return self.controls[name]
        if name == "treatment":
            return self.treatment
        if name == "mentions" and self.mentions is not None:
            return self.mentions
        raise PanelError(f"Variable '{name}' not in panel")

    def missing_mask(self, name: str) -> np.ndarray:
        return np.isnan(self.variable(name))

    @property
    def ever_treated(self) -> np.ndarray:
        return self.treatment.max(axis=1) > 0

    def first_treated(self) -> np.ndarray:
        """Column of each entity's first treated quarter, -1 for never-treated"""
        treated = self.treatment > 0
        first = np.argmax(treated, axis=1)
        return np.where(treated.any(axis=1), first, -1)

    def replace(self, **changes) -> "PanelDataset":
        return replace(self, **changes)

    def select_entities(self, index: Sequence[int]) -> "PanelDataset":
        """Sub-panel of the given entity rows (order preserved)"""
        index = np.asarray(index, dtype=int)

        def rows(array):
            return None if array is None else array[index]

        return replace(
            self,
            entity_ids=tuple(self.entity_ids[i] for i in index),
            outcomes={k: v[index] for k, v in self.outcomes.items()},
            treatment=self.treatment[index],
            controls={k: v[index] for k, v in self.controls.items()},
            avg_log_assets=None if "log_assets" in self.controls else rows(self.avg_log_assets),
            coordinates=rows(self.coordinates),
            mentions=rows(self.mentions),
            excluded=self.excluded[index],
            imputed={k: v[index] for k, v in self.imputed.items()},
        )

    def select_quarters(self, columns: Sequence[int]) -> "PanelDataset":
        """Sub-panel of the given quarter columns"""
        columns = np.asarray(columns, dtype=int)
        return replace(
            self,
            quarters=tuple(self.quarters[j] for j in columns),
            outcomes={k: v[:, columns] for k, v in self.outcomes.items()},
            treatment=self.treatment[:, columns],
            controls={k: v[:, columns] for k, v in self.controls.items()},
            avg_log_assets=None if "log_assets" in self.controls else self.avg_log_assets,
            mentions=None if self.mentions is None else self.mentions[:, columns],
            imputed={k: v[:, columns] for k, v in self.imputed.items()},
        )

    def equals(self, other: "PanelDataset") -> bool:
        """Structural equality with NaN == NaN"""
        if self.entity_ids != other.entity_ids or self.quarters != other.quarters:
            return False
        if set(self.outcomes) != set(other.outcomes) or set(self.controls) != set(other.controls):
            return False
        pairs = [(self.treatment, other.treatment)]
        pairs += [(self.outcomes[k], other.outcomes[k]) for k in self.outcomes]
        pairs += [(self.controls[k], other.controls[k]) for k in self.controls]
        for a, b in ((self.avg_log_assets, other.avg_log_assets), (self.coordinates, other.coordinates),
                     (self.mentions, other.mentions)):
            if (a is None) != (b is None):
                return False
            if a is not None:
                pairs.append((a, b))
        if not np.array_equal(self.excluded, other.excluded):
            return False
        return all(np.array_equal(a, b, equal_nan=True) for a, b in pairs)
