from .errors import (BankSpillError, ConfigError, PanelError, IngestError, SpatialWeightsError,
                     EstimationError, ConvergenceError, EffectsError, SdidError, SimulationError,
                     NetRiskError, EstimationWarning)
from .config import McmcConfig, SdidConfig, EventStudyConfig, RunConfig
from .results import ResultStore
