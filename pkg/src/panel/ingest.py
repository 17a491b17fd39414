"""
Delimited-file ingestion and canonical dumps of the panel
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.core.errors import IngestError, PanelError
from .dataset import PanelDataset
from .quarters import normalize_quarter, quarter_range
from .treatment import build_treatment_for_quarters

LOGGER = logging.getLogger(__name__)

MISSING_TOKENS = {"", "na", "nan", "null", "."}


@dataclass(frozen=True)
class PanelSchema:
    """Maps canonical variable names to file columns; None means absent"""

    entity: str = "entity"
    quarter: str = "quarter"
    roa: Optional[str] = "ROA"
    roe: Optional[str] = "ROE"
    net_income: Optional[str] = None
    total_assets: Optional[str] = None
    total_equity: Optional[str] = None
    treatment: Optional[str] = "treatment"
    mentions: Optional[str] = "mentions"
    controls: Dict[str, str] = field(default_factory=lambda: {
        "log_assets": "log_assets",
        "tier1_ratio": "tier1_ratio",
        "digital_index": "digital_index",
        "ceo_age": "ceo_age",
    })
    latitude: Optional[str] = "latitude"
    longitude: Optional[str] = "longitude"
    avg_log_assets: Optional[str] = "avg_log_assets"
    excluded: Optional[str] = "excluded"

    @classmethod
    def from_dict(cls, mapping: Dict) -> "PanelSchema":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise IngestError(f"Unknown schema keys: {', '.join(unknown)}")
        return cls(**mapping)

    @classmethod
    def from_json(cls, path: str) -> "PanelSchema":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def compute_returns(net_income, total_assets, total_equity) -> Tuple[np.ndarray, np.ndarray]:
    """ROA and ROE in percentage points; non-positive denominators give missing"""
    income = np.asarray(net_income, dtype=float)
    assets = np.asarray(total_assets, dtype=float)
    equity = np.asarray(total_equity, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        roa = np.where(assets > 0, income / assets * 100.0, np.nan)
        roe = np.where(equity > 0, income / equity * 100.0, np.nan)
    return roa, roe


def _exact_float(text) -> float:
    # Correctly rounded, so a %.17g dump reads back bit-identical
    try:
        return float(text)
    except (TypeError, ValueError):
        return np.nan


def _parse_numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    """Numeric column with missing tokens as NaN; anything else unparseable is rejected"""
    raw = frame[column].fillna("").astype(str).str.strip()
    missing = raw.str.lower().isin(MISSING_TOKENS)
    values = raw.where(~missing).map(_exact_float).astype(float)
    bad = values.isna() & ~missing
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        raise IngestError(
            f"Unparseable numeric '{raw.iloc[position]}' in column '{column}' at row {position + 2}"
        )
    return values.to_numpy(dtype=float)


def _entity_level(values: np.ndarray, rows: np.ndarray, n: int) -> np.ndarray:
    """First non-missing value per entity"""
    out = np.full(n, np.nan)
    for value, row in zip(values, rows):
        if np.isnan(out[row]) and not np.isnan(value):
            out[row] = value
    return out


def ingest_panel(path: str, schema: Optional[PanelSchema] = None, sep: str = ",",
                 treatment_mode: str = "absorbing", earliest_quarter: Optional[str] = None) -> PanelDataset:
    """Read one row per entity-quarter into a rectangular panel.

    Entities are sorted by key and quarters completed to a consecutive run,
    so quarters absent from the file appear as missing columns.
    """
    schema = schema or PanelSchema()
    try:
        frame = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"Cannot read {path}: {exc}")

    for role in ("entity", "quarter"):
        column = getattr(schema, role)
        if column not in frame.columns:
            raise IngestError(f"Missing {role} column '{column}' in {path}")

    def present(column: Optional[str]) -> bool:
        return column is not None and column in frame.columns

    entities = frame[schema.entity].astype(str).str.strip()
    quarters = []
    for i, label in enumerate(frame[schema.quarter]):
        try:
            quarters.append(normalize_quarter(label))
        except PanelError:
            raise IngestError(f"Invalid quarter label '{label}' at row {i + 2}")
    keys = pd.DataFrame({"entity": entities, "quarter": quarters})

    duplicated = keys.duplicated(keep=False)
    if duplicated.any():
        first = int(np.flatnonzero(duplicated.to_numpy())[0])
        same = keys[(keys["entity"] == keys["entity"].iloc[first]) & (keys["quarter"] == keys["quarter"].iloc[first])]
        rows = [int(r) + 2 for r in same.index[:2]]
        raise IngestError(
            f"Duplicate (entity, quarter) = ({keys['entity'].iloc[first]}, {keys['quarter'].iloc[first]}) "
            f"at rows {rows[0]} and {rows[1]}"
        )

    entity_ids = sorted(entities.unique())
    all_quarters = quarter_range(min(quarters), max(quarters))
    row_of = {e: i for i, e in enumerate(entity_ids)}
    col_of = {q: j for j, q in enumerate(all_quarters)}
    rows = np.array([row_of[e] for e in entities], dtype=int)
    cols = np.array([col_of[q] for q in quarters], dtype=int)
    shape = (len(entity_ids), len(all_quarters))

    def matrix(column: str) -> np.ndarray:
        out = np.full(shape, np.nan)
        out[rows, cols] = _parse_numeric(frame, column)
        return out

    outcomes = {}
    if present(schema.roa):
        outcomes["ROA"] = matrix(schema.roa)
    if present(schema.roe):
        outcomes["ROE"] = matrix(schema.roe)
    if not outcomes and all(present(c) for c in (schema.net_income, schema.total_assets, schema.total_equity)):
        outcomes["ROA"], outcomes["ROE"] = compute_returns(
            matrix(schema.net_income), matrix(schema.total_assets), matrix(schema.total_equity))
    if not outcomes:
        raise IngestError("Schema maps no outcome columns (ROA/ROE or net income, assets, equity)")

    controls = {name: matrix(column) for name, column in schema.controls.items() if present(column)}
    mentions = matrix(schema.mentions) if present(schema.mentions) else None

    excluded = None
    if present(schema.treatment):
        treatment = matrix(schema.treatment)
        n_missing = int(np.isnan(treatment).sum())
        if n_missing:
            LOGGER.info("%d treatment cells missing, read as untreated", n_missing)
        treatment = np.nan_to_num(treatment, nan=0.0)
    elif mentions is not None:
        assignment = build_treatment_for_quarters(mentions, all_quarters, treatment_mode, earliest_quarter)
        treatment, excluded = assignment.indicator, assignment.excluded
    else:
        LOGGER.warning("No treatment or mentions column; treatment set to zero")
        treatment = np.zeros(shape)

    if present(schema.excluded):
        flags = _entity_level(_parse_numeric(frame, schema.excluded), rows, shape[0])
        excluded = np.nan_to_num(flags, nan=0.0) > 0

    coordinates = None
    if present(schema.latitude) and present(schema.longitude):
        lat = _entity_level(_parse_numeric(frame, schema.latitude), rows, shape[0])
        lon = _entity_level(_parse_numeric(frame, schema.longitude), rows, shape[0])
        if not (np.isnan(lat).all() and np.isnan(lon).all()):
            coordinates = np.column_stack([lat, lon])

    avg_log_assets = None
    if present(schema.avg_log_assets) and "log_assets" not in controls:
        avg_log_assets = _entity_level(_parse_numeric(frame, schema.avg_log_assets), rows, shape[0])

    panel = PanelDataset(
        entity_ids=tuple(entity_ids),
        quarters=tuple(all_quarters),
        outcomes=outcomes,
        treatment=treatment,
        controls=controls,
        avg_log_assets=avg_log_assets,
        coordinates=coordinates,
        mentions=mentions,
        excluded=excluded,
    )
    n_missing = sum(int(np.isnan(v).sum()) for v in list(outcomes.values()) + list(controls.values()))
    LOGGER.info("Ingested %s: N=%d, T=%d, %d missing cells", os.path.basename(path),
                panel.n_entities, panel.n_quarters, n_missing)
    return panel


def panel_frame(panel: PanelDataset) -> pd.DataFrame:
    """Long-format canonical table, one row per entity-quarter"""
    n, t = panel.shape
    columns = {
        "entity": np.repeat(panel.entity_ids, t),
        "quarter": np.tile(panel.quarters, n),
    }
    for name in ("ROA", "ROE"):
        if name in panel.outcomes:
            columns[name] = panel.outcomes[name].ravel()
    columns["treatment"] = panel.treatment.ravel().astype(int)
    if panel.mentions is not None:
        columns["mentions"] = panel.mentions.ravel()
    for name, values in panel.controls.items():
        columns[name] = values.ravel()
    if panel.avg_log_assets is not None and "log_assets" not in panel.controls:
        columns["avg_log_assets"] = np.repeat(panel.avg_log_assets, t)
    if panel.coordinates is not None:
        columns["latitude"] = np.repeat(panel.coordinates[:, 0], t)
        columns["longitude"] = np.repeat(panel.coordinates[:, 1], t)
    columns["excluded"] = np.repeat(panel.excluded.astype(int), t)
    return pd.DataFrame(columns)


def canonical_schema(panel: PanelDataset) -> PanelSchema:
    """Schema that reads back a file written by write_panel"""
    return PanelSchema(controls={name: name for name in panel.controls})


def missing_report(panel: PanelDataset) -> pd.DataFrame:
    records = []
    names = list(panel.outcomes) + list(panel.controls)
    for name in names:
        values = panel.variable(name)
        imputed = panel.imputed.get(name)
        for i, t in zip(*np.nonzero(np.isnan(values))):
            records.append((panel.entity_ids[i], panel.quarters[t], name, "missing"))
        if imputed is not None:
            for i, t in zip(*np.nonzero(imputed)):
                records.append((panel.entity_ids[i], panel.quarters[t], name, "imputed"))
    return pd.DataFrame(records, columns=["entity", "quarter", "variable", "status"])


def write_panel(panel: PanelDataset, path: str, sep: str = ",") -> Tuple[str, str]:
    """Canonical dump plus a '<stem>_missing.csv' sidecar listing missing and imputed cells"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    panel_frame(panel).to_csv(path, sep=sep, index=False, float_format="%.17g", lineterminator="\n")
    stem, ext = os.path.splitext(path)
    sidecar = f"{stem}_missing{ext or '.csv'}"
    missing_report(panel).to_csv(sidecar, sep=sep, index=False, lineterminator="\n")
    LOGGER.info("Wrote panel dump %s and missing-cell report %s", path, sidecar)
    return path, sidecar


RESERVED_COLUMNS = ("entity", "quarter", "ROA", "ROE", "treatment", "mentions", "avg_log_assets",
                    "latitude", "longitude", "excluded")


def infer_schema(path: str, sep: str = ",") -> PanelSchema:
    """Canonical schema for a write_panel dump; every non-reserved column is a control"""
    try:
        header = pd.read_csv(path, sep=sep, nrows=0, encoding="utf-8").columns
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"Cannot read {path}: {exc}")
    controls = {str(c): str(c) for c in header if str(c) not in RESERVED_COLUMNS}
    return PanelSchema(controls=controls)
