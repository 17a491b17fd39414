"""
Exception and warning types shared by every BankSpill module
"""


class BankSpillError(ValueError):
    """Base error; `module` names the component that raised it"""

    module = "core"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def structured(self) -> str:
        return f"error[{self.module}]: {self.message}"


class ConfigError(BankSpillError):
    module = "config"


class PanelError(BankSpillError):
    module = "panel"


class IngestError(PanelError):
    module = "panel.ingest"


class SpatialWeightsError(BankSpillError):
    module = "spatial_weights"


class EstimationError(BankSpillError):
    module = "dsdm"


class ConvergenceError(EstimationError):
    """Optimizer or solver stopped without meeting its tolerance"""

    def __init__(self, message: str, trace=None, module: str = None):
        super().__init__(message)
        self.trace = trace
        if module is not None:
            self.module = module


class EffectsError(BankSpillError):
    module = "effects"


class SdidError(BankSpillError):
    module = "sdid"


class SimulationError(BankSpillError):
    module = "simulate"


class NetRiskError(BankSpillError):
    module = "netrisk"


class EstimationWarning(UserWarning):
    """Non-fatal statistical condition a user should see"""
