"""
Treatment indicator construction from mention counts
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.core.errors import PanelError
from .quarters import quarter_position

LOGGER = logging.getLogger(__name__)

MODES = ("raw", "absorbing")


@dataclass(frozen=True)
class TreatmentAssignment:
    """Binary indicator plus the always-treated flags used to exclude entities from SDID"""

    indicator: np.ndarray
    excluded: np.ndarray
    first_treated: np.ndarray

    @property
    def adopters(self) -> np.ndarray:
        return (self.indicator.max(axis=1) > 0) & ~self.excluded

    @property
    def controls(self) -> np.ndarray:
        return (self.indicator.max(axis=1) == 0) & ~self.excluded


def build_treatment(mentions: np.ndarray, mode: str = "absorbing", earliest: int = 0) -> TreatmentAssignment:
    """Indicator from an N x T mention matrix.

    raw: 1 wherever mentions > 0.
    absorbing: 1 from the first column >= earliest with mentions > 0 onward.
    Entities mentioning before `earliest` are flagged excluded in both modes.
    Missing counts are read as no mention.
    """
    if mode not in MODES:
        raise PanelError(f"Unknown treatment mode '{mode}', expected one of {MODES}")
    mentions = np.nan_to_num(np.asarray(mentions, dtype=float), nan=0.0)
    if mentions.ndim != 2:
        raise PanelError("mentions must be an N x T matrix")
    if np.any(mentions < 0):
        raise PanelError("mention counts must be nonnegative")
    n, t = mentions.shape
    if not 0 <= earliest < t:
        raise PanelError(f"earliest column {earliest} outside panel of {t} quarters")

    positive = mentions > 0
    excluded = positive[:, :earliest].any(axis=1)

    eligible = positive.copy()
    eligible[:, :earliest] = False
    has_first = eligible.any(axis=1)
    first = np.where(has_first, np.argmax(eligible, axis=1), -1)

    if mode == "raw":
        indicator = positive.astype(float)
    else:
        columns = np.arange(t)[None, :]
        indicator = (has_first[:, None] & (columns >= first[:, None])).astype(float)

    if excluded.any():
        LOGGER.info("%d entities mention before the earliest quarter and are excluded from SDID",
                    int(excluded.sum()))
    return TreatmentAssignment(indicator=indicator, excluded=excluded, first_treated=first)


def build_treatment_for_quarters(mentions: np.ndarray, quarters: Sequence[str], mode: str = "absorbing",
                                 earliest_quarter: str = None) -> TreatmentAssignment:
    """Label-based wrapper: earliest_quarter defaults to the first panel quarter"""
    earliest = 0 if earliest_quarter is None else quarter_position(quarters, earliest_quarter)
    return build_treatment(mentions, mode=mode, earliest=earliest)
