"""Continuous wavelet transform of irregularly sampled series.

Coefficients are computed on a regular (scale, location) grid with the
trapezoid rule

    d(u_i, v_j) = 1/2 sum_k X(t_k) psi(u_i, t_k - v_j) (t_{k+1} - t_{k-1}),

restricted to samples inside the wavelet's effective support. For a fixed
set of sample times the transform is a sparse linear map, which
:class:`CwtOperator` builds once and applies to any number of replicates.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import DataError, UsageError
from .fields import LocationGrid, Role, ScaleGrid, ScaleTimeField
from .kernels import WaveletKind, psi

# a cell whose support window holds fewer samples than this is flagged
MIN_COVERAGE = 3


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1 or times.size != values.size:
            raise DataError("times and values must be 1-d sequences of equal length")
        if times.size < 2:
            raise DataError("a time series needs at least two samples")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise DataError("times and values must be finite")
        bad = np.flatnonzero(np.diff(times) <= 0)
        if bad.size:
            raise DataError(f"times must be strictly increasing (violated at index {bad[0] + 1})")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    def location_grid(self, count: int) -> LocationGrid:
        return LocationGrid.spanning(self.times[0], self.times[-1], count)


class BoundaryRule(str, Enum):
    NONE = "none"
    SYMMETRIC = "symmetric"


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    """Half of ``t_{k+1} - t_{k-1}``; the end points use twice the adjacent gap."""
    t = np.asarray(times, dtype=float)
    w = np.empty_like(t)
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    w[0] = t[1] - t[0]
    w[-1] = t[-1] - t[-2]
    return w


def _reflect(times: np.ndarray):
    """Reflect the sampling once about both end points.

    Returns the extended times and, for each extended sample, the index of
    the original sample whose value it carries.
    """
    n = times.size
    t0, t1 = times[0], times[-1]
    ext = np.concatenate([2 * t0 - times[:0:-1], times, 2 * t1 - times[-2::-1]])
    idx = np.concatenate([np.arange(n - 1, 0, -1), np.arange(n), np.arange(n - 2, -1, -1)])
    return ext, idx


class CwtOperator:
    """Sparse linear map from sample values to wavelet coefficients.

    Rows are ordered scale-major, so ``matrix @ x`` reshapes to
    ``(M_u, M_v)``.
    """

    def __init__(self, times, grid: ScaleGrid, locations: LocationGrid,
                 kind=WaveletKind.HAAR, boundary=BoundaryRule.NONE):
        self.times = np.asarray(times, dtype=float)
        self.grid = grid
        self.locations = locations
        self.kind = WaveletKind.parse(kind)
        self.boundary = BoundaryRule(boundary)
        self.matrix, self.counts = self._build()

    def _build(self):
        t = self.times
        if self.boundary is BoundaryRule.SYMMETRIC:
            ext, idx = _reflect(t)
        else:
            ext, idx = t, np.arange(t.size)
        w = trapezoid_weights(ext)
        v = self.locations.locations
        m_v = v.size
        rows, cols, vals = [], [], []
        counts = np.zeros((self.grid.size, m_v), dtype=np.int64)
        for i, u in enumerate(self.grid.scales):
            lo, hi = self.kind.support(u)
            pad = 1e-12 * u
            start = np.searchsorted(ext, v + lo - pad, side="left")
            stop = np.searchsorted(ext, v + hi + pad, side="right")
            n_in = stop - start
            counts[i] = n_in
            total = int(n_in.sum())
            if total == 0:
                continue
            j = np.repeat(np.arange(m_v), n_in)
            offsets = np.arange(total) - np.repeat(np.cumsum(n_in) - n_in, n_in)
            k = start[j] + offsets
            vals.append(w[k] * psi(self.kind, u, ext[k] - v[j]))
            rows.append(i * m_v + j)
            cols.append(idx[k])
        shape = (self.grid.size * m_v, t.size)
        if rows:
            matrix = sparse.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=shape).tocsr()
        else:
            matrix = sparse.csr_matrix(shape)
        return matrix, counts

    @property
    def low_coverage(self) -> np.ndarray:
        return self.counts < MIN_COVERAGE

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Coefficients for one series ``(n,)`` or many ``(n, R)``."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.times.size:
            raise UsageError("values do not match the operator's sample times")
        out = self.matrix @ values
        return out.reshape((self.grid.size, self.locations.size) + values.shape[1:])


def _warn_support(series_span: float, grid: ScaleGrid, kind: WaveletKind) -> None:
    lo, hi = kind.support(grid.scales[-1])
    if hi - lo > series_span:
        warnings.warn(
            f"wavelet support at the largest scale ({hi - lo:g}) exceeds the data span "
            f"({series_span:g})", RuntimeWarning, stacklevel=3)


def cwt(series: TimeSeries, grid: ScaleGrid, locations: LocationGrid,
        kind=WaveletKind.HAAR, boundary=BoundaryRule.NONE) -> ScaleTimeField:
    """Wavelet coefficients of ``series`` on the (scale, location) grid.

    The sample count inside each support window is stored on
    ``field.coverage``; cells with fewer than ``MIN_COVERAGE`` samples are
    still computed.
    """
    kind = WaveletKind.parse(kind)
    _warn_support(series.span, grid, kind)
    op = CwtOperator(series.times, grid, locations, kind, boundary)
    return ScaleTimeField(Role.COEFFICIENTS, grid, locations, op.apply(series.values),
                          coverage=op.counts)


def raw_periodogram(coeffs: ScaleTimeField) -> ScaleTimeField:
    coeffs.require(Role.COEFFICIENTS)
    return coeffs.replace(data=coeffs.data ** 2, role=Role.PERIODOGRAM)


def average_periodograms(fields: Sequence[ScaleTimeField]) -> ScaleTimeField:
    """Entrywise mean of replicate periodograms on identical grids."""
    fields = list(fields)
    if not fields:
        raise UsageError("need at least one periodogram to average")
    first = fields[0]
    for f in fields:
        f.require(Role.PERIODOGRAM)
        if not f.same_grids(first):
            raise UsageError("periodograms must share scale and location grids")
    total = np.zeros(first.shape)
    for f in fields:
        total += f.data
    return first.replace(data=total / len(fields))


def mean_periodogram(times, replicates: np.ndarray, grid: ScaleGrid, locations: LocationGrid,
                     kind=WaveletKind.HAAR, boundary=BoundaryRule.NONE,
                     chunk: int = 64) -> ScaleTimeField:
    """Averaged raw periodogram of replicates observed at common ``times``.

    ``replicates`` has shape ``(R, n)``. Equivalent to ``cwt`` +
    ``raw_periodogram`` + ``average_periodograms`` but shares one operator.
    """
    replicates = np.atleast_2d(np.asarray(replicates, dtype=float))
    op = CwtOperator(times, grid, locations, kind, boundary)
    total = np.zeros((grid.size, locations.size))
    for start in range(0, replicates.shape[0], chunk):
        d = op.apply(replicates[start:start + chunk].T)
        total += (d ** 2).sum(axis=2)
    return ScaleTimeField(Role.PERIODOGRAM, grid, locations, total / replicates.shape[0],
                          coverage=op.counts)
