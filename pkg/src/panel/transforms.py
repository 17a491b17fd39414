"""
Sample construction: winsorization, filters, size splits and the
missing-data policies used by the two estimators
"""

import logging
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.errors import PanelError
from .dataset import PanelDataset, SampleFilter


LOGGER = logging.getLogger(__name__)


def winsorize(series: np.ndarray, lower_pct: float = 1.0, upper_pct: float = 99.0) -> np.ndarray:
    """Clip at pooled percentiles of the non-missing sample.

    Percentiles are order statistics (method='nearest'), which keeps the
    operation idempotent. Missing cells stay missing.
    """
    if not 0 <= lower_pct < upper_pct <= 100:
        raise PanelError(f"Invalid winsorization percentiles ({lower_pct}, {upper_pct})")
    values = np.asarray(series, dtype=float)
    observed = values[~np.isnan(values)]
    if observed.size == 0:
        raise PanelError("Cannot winsorize an all-missing series")
    if observed.size < 2:
        raise PanelError("Winsorization needs at least 2 non-missing values")
    low, high = np.percentile(observed, [lower_pct, upper_pct], method="nearest")
    return np.where(np.isnan(values), np.nan, np.clip(values, low, high))


def winsorize_panel(panel: PanelDataset, fields: Optional[Sequence[str]] = None,
                    lower_pct: float = 1.0, upper_pct: float = 99.0) -> PanelDataset:
    """Winsorize outcomes (default) or the named variables"""
    fields = list(fields) if fields is not None else list(panel.outcomes)
    outcomes = dict(panel.outcomes)
    controls = dict(panel.controls)
    for name in fields:
        if name.upper() in outcomes:
            outcomes[name.upper()] = winsorize(outcomes[name.upper()], lower_pct, upper_pct)
        elif name in controls:
            controls[name] = winsorize(controls[name], lower_pct, upper_pct)
        else:
            raise PanelError(f"Cannot winsorize unknown variable '{name}'")
    avg = None if "log_assets" in controls else panel.avg_log_assets
    return panel.replace(outcomes=outcomes, controls=controls, avg_log_assets=avg)


def treatment_groups(panel: PanelDataset) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices of adopters, never-adopters and always-treated (excluded) entities"""
    excluded = panel.excluded
    ever = panel.ever_treated
    adopters = np.flatnonzero(ever & ~excluded)
    controls = np.flatnonzero(~ever & ~excluded)
    return adopters, controls, np.flatnonzero(excluded)


def _observed_quarters(panel: PanelDataset, fields: Iterable[str]) -> np.ndarray:
    complete = np.ones(panel.shape, dtype=bool)
    for name in fields:
        complete &= ~panel.missing_mask(name)
    return complete.sum(axis=1)


def apply_filter(panel: PanelDataset, sample_filter: Optional[SampleFilter] = None) -> PanelDataset:
    """Drop entities with fewer than min_quarters quarters where every required field is observed"""
    sample_filter = sample_filter or SampleFilter()
    if sample_filter.min_quarters > panel.n_quarters:
        raise PanelError(
            f"min_quarters={sample_filter.min_quarters} exceeds the panel's {panel.n_quarters} quarters"
        )
    counts = _observed_quarters(panel, sample_filter.required_fields)
    keep = np.flatnonzero(counts >= sample_filter.min_quarters)
    if keep.size == 0:
        raise PanelError(
            f"No entity has {sample_filter.min_quarters} complete quarters of "
            f"{', '.join(sample_filter.required_fields)}"
        )
    filtered = panel.select_entities(keep)
    adopters, controls, excluded = treatment_groups(filtered)
    report = {
        "retained": int(keep.size),
        "dropped": int(panel.n_entities - keep.size),
        "adopters": int(adopters.size),
        "controls": int(controls.size),
        "excluded": int(excluded.size),
        "min_quarters": sample_filter.min_quarters,
        "required_fields": list(sample_filter.required_fields),
    }
    LOGGER.info("Sample filter kept %d of %d entities (%d adopters, %d controls, %d excluded)",
                report["retained"], panel.n_entities, report["adopters"], report["controls"],
                report["excluded"])
    metadata = dict(filtered.metadata)
    metadata["filter_report"] = report
    return filtered.replace(metadata=metadata)


def size_split(panel: PanelDataset, quantile: float = 0.75) -> Tuple[PanelDataset, PanelDataset]:
    """Partition into (large, small) at the cross-entity quantile of avg_log_assets.

    Entities exactly at the threshold go to the large group.
    """
    if not 0 < quantile < 1:
        raise PanelError(f"quantile must lie in (0, 1), got {quantile}")
    if panel.n_entities < 4:
        raise PanelError(f"Size split needs at least 4 entities, got {panel.n_entities}")
    avg = panel.avg_log_assets
    if avg is None or np.isnan(avg).any():
        raise PanelError("Size split needs avg_log_assets for every entity")
    threshold = float(np.quantile(avg, quantile))
    large = np.flatnonzero(avg >= threshold)
    small = np.flatnonzero(avg < threshold)
    if small.size == 0:
        raise PanelError("Size split left the small group empty (all sizes tie at the threshold)")
    share = int(round((1 - quantile) * 100))
    large_panel = panel.select_entities(large)
    small_panel = panel.select_entities(small)
    large_panel = large_panel.replace(metadata={**large_panel.metadata, "group": f"Large (Top {share}%)",
                                                "size_threshold": threshold})
    small_panel = small_panel.replace(metadata={**small_panel.metadata, "group": f"Small (Bottom {100 - share}%)",
                                                "size_threshold": threshold})
    LOGGER.info("Size split at avg log assets %.4f: %d large, %d small", threshold, large.size, small.size)
    return large_panel, small_panel


def impute_within_entity(panel: PanelDataset, fields: Optional[Sequence[str]] = None) -> PanelDataset:
    """Fill missing cells with the entity's own mean and flag them in `imputed`"""
    fields = list(fields) if fields is not None else list(panel.outcomes) + list(panel.controls)
    outcomes = dict(panel.outcomes)
    controls = dict(panel.controls)
    imputed = dict(panel.imputed)
    total = 0
    for name in fields:
        values = np.array(panel.variable(name), dtype=float)
        missing = np.isnan(values)
        if not missing.any():
            continue
        empty = missing.all(axis=1)
        if empty.any():
            entity = panel.entity_ids[int(np.flatnonzero(empty)[0])]
            raise PanelError(f"Entity '{entity}' has no observed '{name}' to impute from")
        means = np.nanmean(values, axis=1)
        values[missing] = np.broadcast_to(means[:, None], values.shape)[missing]
        if name.upper() in outcomes:
            outcomes[name.upper()] = values
        else:
            controls[name] = values
        imputed[name] = missing | imputed.get(name, np.zeros(panel.shape, dtype=bool))
        total += int(missing.sum())
    if total:
        LOGGER.info("Mean-imputed %d cells within entity", total)
    avg = None if "log_assets" in controls else panel.avg_log_assets
    return panel.replace(outcomes=outcomes, controls=controls, imputed=imputed, avg_log_assets=avg)


def complete_entities(panel: PanelDataset, fields: Optional[Sequence[str]] = None) -> PanelDataset:
    """Listwise-complete entities over the given fields (outcomes by default)"""
    fields = list(fields) if fields is not None else list(panel.outcomes)
    complete = np.ones(panel.n_entities, dtype=bool)
    for name in fields:
        complete &= ~panel.missing_mask(name).any(axis=1)
    keep = np.flatnonzero(complete)
    if keep.size == 0:
        raise PanelError(f"No entity is complete over {', '.join(fields)}")
    if keep.size < panel.n_entities:
        LOGGER.info("Dropped %d incomplete entities", panel.n_entities - keep.size)
    return panel.select_entities(keep)


def summary_statistics(panel: PanelDataset) -> pd.DataFrame:
    """N, mean, SD and quartiles of every outcome and control over observed cells"""
    rows = {}
    for name in list(panel.outcomes) + list(panel.controls):
        values = panel.variable(name)
        observed = values[~np.isnan(values)]
        if observed.size == 0:
            rows[name] = [0] + [np.nan] * 5
            continue
        p25, p50, p75 = np.percentile(observed, [25, 50, 75])
        sd = observed.std(ddof=1) if observed.size > 1 else np.nan
        rows[name] = [observed.size, observed.mean(), sd, p25, p50, p75]
    table = pd.DataFrame.from_dict(rows, orient="index", columns=["N", "Mean", "SD", "P25", "Median", "P75"])
    table.index.name = "variable"
    return table
