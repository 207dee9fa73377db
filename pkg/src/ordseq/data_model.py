"""Data containers, standardisation, variable orderings and nested subset schedules.

Conventions used throughout the package:

* variable identities are 1-based (they map onto CSV column positions and
  appear in orderings, sparse supports and subset cutoffs);
* row indices (observations, CV folds) are 0-based numpy positions;
* ``mask`` entries are ``True`` where a value is observed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    InvalidLag,
    InvalidOrdering,
    InvalidSchedule,
)

POLICIES = ("center_only", "center_and_scale", "none")


def _frozen_array(values, dtype=float, ndim=None):
    arr = np.array(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"expected {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Response vector, design matrix and optional observation mask.

    Parameters
    ----------
    X : (n, p) array
        Rows are observations.
    Y : (n,) array
        Response values, fully observed.
    mask : (n, p) boolean array, optional
        True marks an observed entry of X.
    column_names : list of p strings, optional
    """

    X: np.ndarray
    Y: np.ndarray
    mask: np.ndarray | None = None
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = _frozen_array(self.X, ndim=2)
        Y = _frozen_array(self.Y, ndim=1)
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DimensionMismatch("X must have at least one row and one column")
        if Y.shape[0] != X.shape[0]:
            raise DimensionMismatch(
                f"Y has length {Y.shape[0]} but X has {X.shape[0]} rows"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if self.mask is not None:
            mask = _frozen_array(self.mask, dtype=bool, ndim=2)
            if mask.shape != X.shape:
                raise DimensionMismatch("mask must have the shape of X")
            object.__setattr__(self, "mask", mask)
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != X.shape[1]:
                raise DimensionMismatch("column_names must have one entry per column")
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def observed_mask(self) -> np.ndarray:
        """Mask as a plain boolean array, all-True when absent."""
        if self.mask is None:
            return np.ones(self.X.shape, dtype=bool)
        return np.asarray(self.mask)

    def take_rows(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            self.X[rows],
            self.Y[rows],
            None if self.mask is None else self.mask[rows],
            self.column_names,
        )


@dataclass(frozen=True)
class Ordering:
    """A permutation of the variables, most important first (1-based ids)."""

    perm: np.ndarray

    def __post_init__(self):
        perm = _frozen_array(self.perm, dtype=int, ndim=1)
        if not np.array_equal(np.sort(perm), np.arange(1, perm.shape[0] + 1)):
            raise InvalidOrdering("perm must be a permutation of 1..p")
        object.__setattr__(self, "perm", perm)

    @property
    def p(self) -> int:
        return self.perm.shape[0]

    def perm0(self) -> np.ndarray:
        """Permutation as 0-based column positions."""
        return self.perm - 1

    @classmethod
    def identity(cls, p: int) -> "Ordering":
        return cls(np.arange(1, p + 1))


@dataclass(frozen=True)
class SubsetSchedule:
    """Strictly decreasing cutoffs j_1 > ... > j_K; subset k keeps the first
    j_k variables of an ordering."""

    cutoffs: np.ndarray

    def __post_init__(self):
        cutoffs = _frozen_array(self.cutoffs, dtype=int, ndim=1)
        if cutoffs.shape[0] < 1:
            raise InvalidSchedule("schedule needs at least one cutoff")
        if np.any(np.diff(cutoffs) >= 0):
            raise InvalidSchedule("cutoffs must be strictly decreasing")
        if cutoffs[-1] < 1:
            raise InvalidSchedule("smallest cutoff must be >= 1")
        object.__setattr__(self, "cutoffs", cutoffs)

    @property
    def K(self) -> int:
        return self.cutoffs.shape[0]


@dataclass(frozen=True)
class StandardizationInfo:
    """Per-column centers/scales and the response center; inverts predictions
    and maps coefficients back to the original scale."""

    centers: np.ndarray
    scales: np.ndarray
    y_center: float
    policy: str

    def __post_init__(self):
        object.__setattr__(self, "centers", _frozen_array(self.centers, ndim=1))
        object.__setattr__(self, "scales", _frozen_array(self.scales, ndim=1))
        if self.policy not in POLICIES:
            raise InvalidSchedule(f"unknown policy {self.policy!r}")
        if self.policy == "center_and_scale" and np.any(self.scales <= 0):
            raise ConstantColumn("scales must be strictly positive")

    @property
    def p(self) -> int:
        return self.centers.shape[0]

    def transform_X(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.centers) / self.scales

    def predictions_to_original(self, yhat_centered: np.ndarray) -> np.ndarray:
        return np.asarray(yhat_centered) + self.y_center

    def coef_to_original(self, indices, values):
        """Map a standardized-space sparse coefficient vector to original
        units, returning (values, intercept)."""
        idx0 = np.asarray(indices, dtype=int) - 1
        vals = np.asarray(values, dtype=float) / self.scales[idx0]
        intercept = self.y_center - float(self.centers[idx0] @ vals)
        return vals, intercept

    @classmethod
    def identity(cls, p: int) -> "StandardizationInfo":
        return cls(np.zeros(p), np.ones(p), 0.0, "none")


def _observed_column_stats(data: Dataset):
    """Per-column mean and population variance over observed entries."""
    mask = data.observed_mask()
    counts = mask.sum(axis=0)
    Xz = np.where(mask, data.X, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, Xz.sum(axis=0) / np.maximum(counts, 1), 0.0)
        sq = np.where(mask, (data.X - means) ** 2, 0.0).sum(axis=0)
        variances = np.where(counts > 0, sq / np.maximum(counts, 1), 0.0)
    return means, variances, counts


def standardize(data: Dataset, policy: str = "center_and_scale"):
    """Center (and optionally scale to unit population variance) the columns
    of X and center Y.

    Variance uses the denominator-n convention. With a mask present, the
    statistics come from observed entries only. Returns the transformed
    dataset together with the StandardizationInfo needed to undo it.
    """
    if policy not in POLICIES:
        raise InvalidSchedule(f"unknown policy {policy!r}")
    p = data.p
    if policy == "none":
        info = StandardizationInfo.identity(p)
        return data, info
    means, variances, _ = _observed_column_stats(data)
    if policy == "center_and_scale":
        if np.any(variances <= 0):
            j = int(np.argmax(variances <= 0)) + 1
            raise ConstantColumn(f"column {j} has zero variance")
        scales = np.sqrt(variances)
    else:
        scales = np.ones(p)
    y_center = float(np.mean(data.Y))
    info = StandardizationInfo(means, scales, y_center, policy)
    X_new = (data.X - means) / scales
    out = Dataset(X_new, data.Y - y_center, data.mask, data.column_names)
    return out, info


def make_subset_schedule(p: int, K: int, min_size: int = 1) -> SubsetSchedule:
    """Geometric grid of K cutoffs from p down to min_size.

    Cutoffs are round(p * r**(k-1)) with r = (min_size/p)**(1/(K-1)), then
    repaired to strictly-decreasing integers so that exactly K distinct
    cutoffs are produced whenever K <= p - min_size + 1 (asking for K = p
    with min_size 1 yields every size p, p-1, ..., 1). Infeasible tails are
    dropped, reducing K.
    """
    if K < 1:
        raise InvalidSchedule("K must be >= 1")
    if not (1 <= min_size <= p):
        raise InvalidSchedule("min_size must be in [1, p]")
    if K == 1:
        return SubsetSchedule(np.array([p]))
    r = (min_size / p) ** (1.0 / (K - 1))
    vals = np.rint(p * r ** np.arange(K)).astype(int)
    # repair rounding: force strict decrease without leaving [min_size, p]
    vals[-1] = max(vals[-1], min_size)
    for k in range(K - 2, -1, -1):
        vals[k] = max(vals[k], vals[k + 1] + 1)
    vals[0] = p
    keep = [p]
    for v in vals[1:]:
        v = min(v, keep[-1] - 1)
        if v < min_size:
            break
        keep.append(v)
    return SubsetSchedule(np.array(keep))


def ordering_from_variance(data: Dataset) -> Ordering:
    """Order variables by descending raw column variance, ties by index."""
    _, variances, _ = _observed_column_stats(data)
    order = np.lexsort((np.arange(data.p), -variances))
    return Ordering(order + 1)


def ordering_from_missingness(mask: np.ndarray) -> Ordering:
    """Order variables by ascending per-column missing count, ties by index."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionMismatch("mask must be 2-d")
    missing = (~mask).sum(axis=0)
    order = np.lexsort((np.arange(mask.shape[1]), missing))
    return Ordering(order + 1)


def ordering_from_lags(
    n_series: int,
    max_lag: int,
    target_series: int,
    partner_series: int | None = None,
    season_lag: int | None = None,
) -> Ordering:
    """Three-group lag ordering for series-major lagged designs.

    Variables are (series s, lag l) flattened as id = (s-1)*max_lag + l.
    Group 1 is the target series, group 2 the optional partner series and
    group 3 everything else. Within a group the season_lag readings come
    first, then the remaining lags from newest to oldest; equal lags are
    ordered by series index.
    """
    if n_series < 1 or max_lag < 1:
        raise InvalidLag("n_series and max_lag must be >= 1")
    if season_lag is not None and not (1 <= season_lag <= max_lag):
        raise InvalidLag(f"season_lag {season_lag} outside 1..{max_lag}")
    if not (1 <= target_series <= n_series):
        raise InvalidOrdering(f"target_series {target_series} outside 1..{n_series}")
    if partner_series is not None:
        if not (1 <= partner_series <= n_series):
            raise InvalidOrdering("partner_series outside 1..n_series")
        if partner_series == target_series:
            raise InvalidOrdering("partner_series must differ from target_series")

    def lag_priority(lag):
        return -1 if (season_lag is not None and lag == season_lag) else lag

    groups = [[target_series]]
    if partner_series is not None:
        groups.append([partner_series])
    rest = [s for s in range(1, n_series + 1) if s not in {target_series, partner_series}]
    if rest:
        groups.append(rest)

    perm = []
    for members in groups:
        cells = [
            (lag_priority(lag), s, (s - 1) * max_lag + lag)
            for lag in range(1, max_lag + 1)
            for s in members
        ]
        cells.sort()
        perm.extend(var for _, _, var in cells)
    return Ordering(np.array(perm))


def sample_weighted_ordering(rho, rng: np.random.Generator) -> Ordering:
    """Sample a permutation by successive weighted draws without replacement
    (Plackett-Luce), implemented with Gumbel keys.

    Zero-weight entries are placed after all positive-weight entries, in
    index order.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1:
        raise DimensionMismatch("rho must be a vector")
    if np.any(rho < 0) or not np.any(rho > 0):
        raise InvalidOrdering("rho must be non-negative with positive sum")
    u = rng.uniform(low=np.finfo(float).tiny, high=1.0, size=rho.shape[0])
    with np.errstate(divide="ignore"):
        keys = np.log(rho) - np.log(-np.log(u))
    order = np.lexsort((np.arange(rho.shape[0]), -keys))
    return Ordering(order + 1)


def build_lag_matrix(series: np.ndarray, max_lag: int, target_series: int):
    """Lagged design from a (T, n_series) panel, series-major columns.

    Row t predicts series[target] at time t from lags 1..max_lag of every
    series; the first max_lag rows are consumed as history. Returns a
    Dataset with column names "s{series}_lag{lag}".
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    T, n_series = series.shape
    if max_lag >= T:
        raise InvalidLag("max_lag must be smaller than the series length")
    if not (1 <= target_series <= n_series):
        raise InvalidOrdering("target_series outside 1..n_series")
    n = T - max_lag
    X = np.empty((n, n_series * max_lag))
    names = []
    for s in range(1, n_series + 1):
        for lag in range(1, max_lag + 1):
            X[:, (s - 1) * max_lag + lag - 1] = series[max_lag - lag : T - lag, s - 1]
            names.append(f"s{s}_lag{lag}")
    Y = series[max_lag:, target_series - 1]
    return Dataset(X, Y, column_names=names)
