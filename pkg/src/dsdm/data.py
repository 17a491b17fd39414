"""
Design arrays for the dynamic spatial Durbin model
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from src.core.errors import EstimationError
from src.panel import PanelDataset, impute_within_entity
from src.spatial import WeightMatrix

LOGGER = logging.getLogger(__name__)

FIXED_EFFECTS = ("entity", "time", "both", "none")
ESTIMATORS = ("mle", "qmle", "bayes")
BIAS_CORRECTIONS = ("none", "analytic")


@dataclass(frozen=True)
class DsdmSpec:
    """Model choices for one DSDM fit"""

    outcome: str
    weights: WeightMatrix
    controls: Tuple[str, ...] = ()
    fixed_effects: str = "both"
    estimator: str = "mle"
    bias_correction: str = "none"

    def __post_init__(self):
        if self.outcome.upper() not in ("ROA", "ROE"):
            raise EstimationError(f"outcome must be ROA or ROE, got '{self.outcome}'")
        if self.fixed_effects not in FIXED_EFFECTS:
            raise EstimationError(f"fixed_effects must be one of {FIXED_EFFECTS}")
        if self.estimator not in ESTIMATORS:
            raise EstimationError(f"estimator must be one of {ESTIMATORS}")
        if self.bias_correction not in BIAS_CORRECTIONS:
            raise EstimationError(f"bias_correction must be one of {BIAS_CORRECTIONS}")
        if self.bias_correction != "none" and self.estimator == "bayes":
            raise EstimationError("bias_correction applies to the mle and qmle estimators only")
        object.__setattr__(self, "outcome", self.outcome.upper())
        object.__setattr__(self, "controls", tuple(self.controls))

    @property
    def param_names(self) -> List[str]:
        return ["tau", "rho", "eta", "beta", "theta"] + [f"gamma_{c}" for c in self.controls] + ["sigma2"]

    @property
    def regressor_names(self) -> List[str]:
        """Columns of the concentrated design, in coefficient order"""
        return ["tau", "eta", "beta", "theta"] + [f"gamma_{c}" for c in self.controls]


def demean_two_way(matrix: np.ndarray, effects: str = "both") -> np.ndarray:
    """Within transformation x_it - x_i. - x_.t + x_.. of a balanced N x T matrix"""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise EstimationError("demean_two_way expects an N x T matrix")
    if np.isnan(x).any():
        raise EstimationError("demean_two_way needs a balanced panel without missing cells")
    if effects == "none":
        return x.copy()
    if effects == "entity":
        return x - x.mean(axis=1, keepdims=True)
    if effects == "time":
        return x - x.mean(axis=0, keepdims=True)
    return x - x.mean(axis=1, keepdims=True) - x.mean(axis=0, keepdims=True) + x.mean()


@dataclass(frozen=True)
class DsdmData:
    """Demeaned N x (T-1) arrays; the first quarter is consumed by the temporal lag"""

    y: np.ndarray
    wy: np.ndarray
    regressors: Dict[str, np.ndarray]
    weights: WeightMatrix
    param_names: List[str]
    entity_ids: Tuple[str, ...] = ()
    quarters: Tuple[str, ...] = ()
    imputed_cells: int = 0
    fixed_effects: str = "both"
    cross: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_entities(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        """Quarters entering the likelihood (T - 1)"""
        return self.y.shape[1]

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def regressor_names(self) -> List[str]:
        return list(self.regressors)

    def design(self) -> np.ndarray:
        """n x k regressor matrix, quarter-major (all entities of quarter 1 first)"""
        return np.column_stack([v.ravel(order="F") for v in self.regressors.values()])

    def vector(self, name: str) -> np.ndarray:
        return getattr(self, name).ravel(order="F")

    def permuted(self, order) -> "DsdmData":
        """Same data with entity rows relabeled and W conjugated"""
        order = np.asarray(order, dtype=int)
        return build_data(self.y[order], self.wy[order], {k: v[order] for k, v in self.regressors.items()},
                          self.weights.permuted(order), self.param_names,
                          tuple(self.entity_ids[i] for i in order) if self.entity_ids else (),
                          self.quarters, self.imputed_cells, self.fixed_effects)


def build_data(y, wy, regressors, weights, param_names, entity_ids=(), quarters=(), imputed_cells=0,
               fixed_effects="both") -> DsdmData:
    """Assemble DsdmData and its cross-product cache"""
    z = np.column_stack([v.ravel(order="F") for v in regressors.values()])
    yv = y.ravel(order="F")
    wyv = wy.ravel(order="F")
    cross = {
        "zz": z.T @ z,
        "zy": z.T @ yv,
        "zwy": z.T @ wyv,
        "yy": float(yv @ yv),
        "ywy": float(yv @ wyv),
        "wywy": float(wyv @ wyv),
    }
    return DsdmData(y=y, wy=wy, regressors=dict(regressors), weights=weights, param_names=list(param_names),
                    entity_ids=tuple(entity_ids), quarters=tuple(quarters), imputed_cells=imputed_cells,
                    fixed_effects=fixed_effects, cross=cross)


def prepare_data(panel: PanelDataset, spec: DsdmSpec) -> DsdmData:
    """Lags and spatial lags on the raw panel, then fixed-effect demeaning.

    Remaining missing cells are mean-imputed within entity.
    """
    missing_controls = [c for c in spec.controls if c not in panel.controls]
    if missing_controls:
        raise EstimationError(f"Controls not in panel: {', '.join(missing_controls)}")
    weights = spec.weights
    if weights.labels is not None:
        weights = weights.restrict(panel.entity_ids)
    if weights.n != panel.n_entities:
        raise EstimationError(f"W is {weights.n} x {weights.n} but the panel has {panel.n_entities} entities")
    if panel.n_quarters < 3:
        raise EstimationError("DSDM needs at least 3 quarters")
    if panel.n_entities < 10 or panel.n_quarters < 5:
        LOGGER.warning("Panel N=%d, T=%d is below the recommended N >= 10, T >= 5",
                       panel.n_entities, panel.n_quarters)

    fields = [spec.outcome] + list(spec.controls)
    imputed_cells = sum(int(panel.missing_mask(f).sum()) for f in fields)
    if imputed_cells:
        panel = impute_within_entity(panel, fields)

    Y = panel.outcome(spec.outcome)
    D = panel.treatment
    W = weights.matrix
    WY = W @ Y
    WD = W @ D

    def within(x):
        return demean_two_way(x, spec.fixed_effects)

    regressors = {
        "tau": within(Y[:, :-1]),
        "eta": within(WY[:, :-1]),
        "beta": within(D[:, 1:]),
        "theta": within(WD[:, 1:]),
    }
    for name in spec.controls:
        regressors[f"gamma_{name}"] = within(panel.controls[name][:, 1:])

    LOGGER.info("DSDM data: %s on %d entities x %d quarters (%d imputed cells)",
                spec.outcome, panel.n_entities, panel.n_quarters - 1, imputed_cells)
    return build_data(within(Y[:, 1:]), within(WY[:, 1:]), regressors, weights, spec.param_names,
                      panel.entity_ids, panel.quarters[1:], imputed_cells, spec.fixed_effects)
