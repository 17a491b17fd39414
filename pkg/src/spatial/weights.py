"""
Spatial weight matrices: network (asset-similarity), geographic,
group and similarity kernels, row normalization and cached spectra
"""

import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from src.core.errors import SpatialWeightsError

LOGGER = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
KINDS = ("network", "geographic", "group", "similarity", "ring", "custom")
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightMatrix:
    """Immutable N x N nonnegative weight matrix with a lazily cached spectrum"""

    matrix: np.ndarray
    kind: str = "custom"
    row_normalized: bool = True
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise SpatialWeightsError(f"Weight matrix must be square, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise SpatialWeightsError("Weight matrix has non-finite entries")
        if np.any(matrix < 0):
            raise SpatialWeightsError("Weight matrix entries must be nonnegative")
        if np.any(np.diag(matrix) != 0):
            raise SpatialWeightsError("Weight matrix must have a zero diagonal")
        if self.kind not in KINDS:
            raise SpatialWeightsError(f"Unknown weight kind '{self.kind}'")
        if self.row_normalized:
            sums = matrix.sum(axis=1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
            if bad.size:
                raise SpatialWeightsError(
                    f"Row {self._name(bad[0])} sums to {sums[bad[0]]:.15g}, not 1"
                )
        labels = None if self.labels is None else tuple(str(x) for x in self.labels)
        if labels is not None and len(labels) != matrix.shape[0]:
            raise SpatialWeightsError("labels must have one entry per row")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "labels", labels)

    def _name(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(int(i))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def checksum(self) -> str:
        return hashlib.sha256(self.matrix.tobytes()).hexdigest()

    @cached_property
    def _spectrum(self) -> Tuple[str, np.ndarray]:
        try:
            values = linalg.eigvals(self.matrix)
        except linalg.LinAlgError as exc:
            raise SpatialWeightsError(f"Eigen-decomposition failed: {exc}")
        values = np.asarray(values, dtype=complex)
        values.setflags(write=False)
        return self.checksum, values

    @property
    def eigenvalues(self) -> np.ndarray:
        cached_checksum, values = self._spectrum
        if cached_checksum != self.checksum:
            raise SpatialWeightsError("Eigenvalue cache does not match the weight matrix")
        return values

    def rho_bounds(self) -> Tuple[float, float]:
        """Admissible open interval for rho: (max(-1, 1/lambda_min), 1)"""
        values = self.eigenvalues
        real = values.real[np.abs(values.imag) < 1e-10]
        lower = -1.0
        if real.size and real.min() < 0:
            lower = max(-1.0, 1.0 / real.min())
        return lower, 1.0

    def contains_rho(self, rho: float) -> bool:
        lower, upper = self.rho_bounds()
        return lower < rho < upper

    def log_det(self, rho: float) -> float:
        """ln|I - rho W| as the real part of sum ln(1 - rho lambda_i)"""
        if not self.contains_rho(rho):
            lower, upper = self.rho_bounds()
            raise SpatialWeightsError(f"rho={rho:.6g} outside admissible interval ({lower:.6g}, {upper:.6g})")
        factors = 1.0 - rho * self.eigenvalues
        if np.any(np.abs(factors) < 1e-14):
            raise SpatialWeightsError(f"I - rho W is singular at rho={rho:.6g}")
        total = np.sum(np.log(factors))
        if abs(total.imag) > 1e-10 * max(1, self.n):
            raise SpatialWeightsError(f"log-determinant has imaginary part {total.imag:.3g}")
        return float(total.real)

    def lag(self, values: np.ndarray) -> np.ndarray:
        """Spatial lag W x of an N-vector or an N x T matrix"""
        return self.matrix @ values

    def permuted(self, order: Sequence[int]) -> "WeightMatrix":
        order = np.asarray(order, dtype=int)
        labels = None if self.labels is None else tuple(self.labels[i] for i in order)
        return WeightMatrix(self.matrix[np.ix_(order, order)], self.kind, self.row_normalized, labels)

    def restrict(self, entity_ids: Sequence[str]) -> "WeightMatrix":
        """Sub-matrix for the given entities, re-normalized by row"""
        if self.labels is None:
            raise SpatialWeightsError("Cannot align an unlabeled weight matrix to panel entities")
        position = {label: i for i, label in enumerate(self.labels)}
        missing = [e for e in entity_ids if e not in position]
        if missing:
            raise SpatialWeightsError(f"Weight matrix has no row for entity '{missing[0]}'")
        index = [position[e] for e in entity_ids]
        if index == list(range(self.n)):
            return self
        return row_normalize(self.matrix[np.ix_(index, index)], labels=entity_ids, kind=self.kind)

    def to_frame(self) -> pd.DataFrame:
        labels = list(self.labels) if self.labels is not None else [str(i) for i in range(self.n)]
        return pd.DataFrame(self.matrix, index=labels, columns=labels)


def spectrum(weights: WeightMatrix) -> np.ndarray:
    """Eigenvalues of a row-normalized W; asserts the largest modulus is at most 1"""
    if not weights.row_normalized:
        raise SpatialWeightsError("spectrum expects a row-normalized weight matrix")
    values = weights.eigenvalues
    largest = float(np.max(np.abs(values)))
    if largest > 1.0 + 1e-8:
        raise SpatialWeightsError(f"Largest eigenvalue modulus {largest:.12g} exceeds 1")
    return values


def log_det(weights: WeightMatrix, rho: float) -> float:
    return weights.log_det(rho)


def rho_bounds(weights: WeightMatrix) -> Tuple[float, float]:
    return weights.rho_bounds()


def row_normalize(raw: np.ndarray, labels: Optional[Sequence[str]] = None, kind: str = "custom") -> WeightMatrix:
    """Divide every row by its sum; a zero row is an isolated node and is rejected"""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise SpatialWeightsError(f"Raw weights must be square, got shape {raw.shape}")
    if np.any(raw < 0):
        raise SpatialWeightsError("Raw weights must be nonnegative")
    if np.any(np.diag(raw) != 0):
        raise SpatialWeightsError("Raw weights must have a zero diagonal")
    sums = raw.sum(axis=1)
    isolated = np.flatnonzero(sums <= 0)
    if isolated.size:
        i = int(isolated[0])
        name = labels[i] if labels is not None else str(i)
        raise SpatialWeightsError(f"Entity '{name}' has no neighbours (zero row in the weight matrix)")
    return WeightMatrix(raw / sums[:, None], kind=kind, row_normalized=True,
                        labels=None if labels is None else tuple(labels))


def network_weights(avg_log_assets: np.ndarray, bandwidth: Optional[float] = None,
                    labels: Optional[Sequence[str]] = None) -> WeightMatrix:
    """Gaussian kernel on average log assets: exp(-(a_i - a_j)^2 / (2 h^2)).

    Default bandwidth h is the sample standard deviation (n - 1) of the
    entity averages.
    """
    avg = np.asarray(avg_log_assets, dtype=float)
    if avg.ndim != 1 or avg.size < 2:
        raise SpatialWeightsError("network weights need at least 2 entities")
    if np.isnan(avg).any():
        raise SpatialWeightsError("avg_log_assets has missing entries")
    if bandwidth is None:
        bandwidth = float(np.std(avg, ddof=1))
        if bandwidth == 0:
            raise SpatialWeightsError("avg_log_assets has zero variance; supply an explicit bandwidth")
    elif bandwidth <= 0:
        raise SpatialWeightsError(f"bandwidth must be positive, got {bandwidth}")
    diff = avg[:, None] - avg[None, :]
    raw = np.exp(-diff ** 2 / (2.0 * bandwidth ** 2))
    np.fill_diagonal(raw, 0.0)
    LOGGER.debug("Network kernel bandwidth %.6g over %d entities", bandwidth, avg.size)
    return row_normalize(raw, labels=labels, kind="network")


def haversine_matrix(coords: np.ndarray, radius: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Great-circle distances in km between (latitude, longitude) rows in degrees"""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise SpatialWeightsError("coordinates must be N x 2 (latitude, longitude)")
    if np.isnan(coords).any():
        raise SpatialWeightsError("coordinates have missing entries")
    if np.any(np.abs(coords[:, 0]) > 90) or np.any(np.abs(coords[:, 1]) > 180):
        raise SpatialWeightsError("latitude must lie in [-90, 90] and longitude in [-180, 180]")
    lat = np.radians(coords[:, 0])
    lon = np.radians(coords[:, 1])
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    a = np.sin(0.5 * dlat) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(0.5 * dlon) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * radius * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))


def geographic_weights(coords: np.ndarray, labels: Optional[Sequence[str]] = None) -> WeightMatrix:
    """Exponential distance decay exp(-d_ij / median pairwise distance)"""
    coords = np.asarray(coords, dtype=float)
    if coords.shape[0] < 2:
        raise SpatialWeightsError("geographic weights need at least 2 entities")
    distances = haversine_matrix(coords)
    upper = distances[np.triu_indices(coords.shape[0], k=1)]
    median = float(np.median(upper))
    if median == 0:
        raise SpatialWeightsError("All entities are co-located; median distance is 0")
    raw = np.exp(-distances / median)
    np.fill_diagonal(raw, 0.0)
    LOGGER.debug("Geographic decay scale %.3f km", median)
    return row_normalize(raw, labels=labels, kind="geographic")


def group_weights(groups: Sequence, labels: Optional[Sequence[str]] = None) -> WeightMatrix:
    """Equal weight on every other member of the same group (e.g. supervisory district)"""
    groups = np.asarray([str(g) for g in groups])
    if groups.size < 2:
        raise SpatialWeightsError("group weights need at least 2 entities")
    raw = (groups[:, None] == groups[None, :]).astype(float)
    np.fill_diagonal(raw, 0.0)
    return row_normalize(raw, labels=labels, kind="group")


def similarity_weights(profiles: np.ndarray, labels: Optional[Sequence[str]] = None) -> WeightMatrix:
    """Cosine similarity of nonnegative composition vectors (e.g. loan portfolios)"""
    profiles = np.asarray(profiles, dtype=float)
    if profiles.ndim != 2 or profiles.shape[0] < 2:
        raise SpatialWeightsError("similarity weights need an N x K profile matrix with N >= 2")
    if np.any(profiles < 0) or np.isnan(profiles).any():
        raise SpatialWeightsError("profiles must be nonnegative and complete")
    norms = np.linalg.norm(profiles, axis=1)
    if np.any(norms == 0):
        i = int(np.flatnonzero(norms == 0)[0])
        name = labels[i] if labels is not None else str(i)
        raise SpatialWeightsError(f"Entity '{name}' has an all-zero profile")
    unit = profiles / norms[:, None]
    raw = np.clip(unit @ unit.T, 0.0, None)
    np.fill_diagonal(raw, 0.0)
    return row_normalize(raw, labels=labels, kind="similarity")


def _exact_float(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        return np.nan


def load_weights(path: str, normalize: bool = True, sep: str = ",") -> WeightMatrix:
    """Read a square matrix, either bare or with entity labels as header row and first column"""
    try:
        frame = pd.read_csv(path, sep=sep, header=None, dtype=str)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SpatialWeightsError(f"Cannot read weights file {path}: {exc}")
    labels = None
    body = frame
    if np.isnan(_exact_float(frame.iloc[0, 0])):
        labels = [str(x).strip() for x in frame.iloc[0, 1:]]
        body = frame.iloc[1:, 1:]
        row_labels = [str(x).strip() for x in frame.iloc[1:, 0]]
        if row_labels != labels:
            raise SpatialWeightsError("Row labels of the weights file differ from its column labels")
    # Exact parse: a %.17g dump reloads with the same checksum
    values = body.map(_exact_float).to_numpy(dtype=float)
    if np.isnan(values).any():
        r, c = np.argwhere(np.isnan(values))[0]
        raise SpatialWeightsError(f"Unparseable weight at row {r + 1}, column {c + 1} of {path}")
    if values.shape[0] != values.shape[1]:
        raise SpatialWeightsError(f"Weights file {path} is not square: {values.shape}")
    if normalize:
        weights = row_normalize(values, labels=labels, kind="custom")
    else:
        weights = WeightMatrix(values, kind="custom", row_normalized=True, labels=labels)
    LOGGER.info("Loaded %d x %d weight matrix from %s", weights.n, weights.n, path)
    return weights


def write_weights(weights: WeightMatrix, path: str, sep: str = ",") -> str:
    """Labeled dump readable by load_weights(normalize=False)"""
    frame = weights.to_frame()
    frame.index.name = "entity"
    frame.to_csv(path, sep=sep, float_format="%.17g", lineterminator="\n")
    return path
