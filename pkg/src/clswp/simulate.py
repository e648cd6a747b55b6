"""Simulators with known ground truth and the built-in benchmark spectra.

All random draws are keyed by ``(seed, replicate)`` so a replicate can be
regenerated on its own, and batches equal their sequential counterparts.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from .errors import UsageError
from .fields import LocationGrid, Role, ScaleGrid, ScaleTimeField
from .kernels import WaveletKind, ipk, psi
from .transform import TimeSeries, trapezoid_weights

SAMPLING_SCHEMES = ("regular", "uniform-gaps", "missing25")


def _tanh_step(z):
    return 0.5 * np.tanh(z) + 0.5


def _three_band(u, z):
    u, z = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(z, dtype=float))
    b1 = (u > 0.5) & (u < 1.5)
    b2 = (u > 1.5) & (u < 2.5)
    b3 = (u > 4.5) & (u < 5.5)
    first = z <= 0.25
    ramp1 = (z > 0.25) & (z < 0.375)
    middle = (z >= 0.375) & (z <= 0.625)
    ramp2 = (z > 0.625) & (z < 0.75)
    last = z >= 0.75
    out = np.zeros(u.shape)
    out = np.where(b1 & first, 1.0, out)
    out = np.where(b1 & ramp1, _tanh_step(15 - 48 * z), out)
    out = np.where(b2 & ramp1, _tanh_step(48 * z - 15), out)
    out = np.where(b2 & middle, 1.0, out)
    out = np.where(b2 & ramp2, _tanh_step(33 - 48 * z), out)
    out = np.where(b3 & ramp2, _tanh_step(48 * z - 33), out)
    out = np.where(b3 & last, 1.0, out)
    return out


def _square_sine_burst(u, z):
    u, z = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(z, dtype=float))
    out = np.where((u > 8) & (u < 12), np.sin(4 * np.pi * z) ** 2, 0.0)
    burst = (u > 0.75) & (u < 1.25) & (z > 0.7) & (z < 0.825)
    return np.where(burst, 1.0, out)


def _piecewise_cosine(factor: float):
    # defined on absolute time 0..1000; z = t / 1000
    def spectrum(u, z):
        u, z = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(z, dtype=float))
        t = 1000.0 * z
        s = u / factor
        low = (s >= 1) & (s <= 3)
        high = (s > 3) & (s <= 4)
        lo_val = np.select(
            [t <= 100, t <= 400, t <= 500],
            [0.5 * (np.cos(np.pi * (t / 100 - 1)) + 1),
             0.25 * (np.cos(np.pi * t / 50) + 3),
             0.5 * (np.cos(np.pi * t / 100) + 1)], 0.0)
        lo_val = np.where(t >= 0, lo_val, 0.0)
        hi_val = np.select(
            [t <= 500, t <= 700, t <= 800, t <= 1000],
            [0.0,
             0.75 * (np.cos(np.pi * (t / 200 + 0.5)) + 1),
             1.5,
             0.75 * (np.cos(np.pi * t / 200) + 1)], 0.0)
        return np.where(low, lo_val, np.where(high, hi_val, 0.0))

    return spectrum


@dataclass(frozen=True)
class SpectrumSpec:
    """A spectrum ``S(u, z)`` in rescaled time ``z`` in [0, 1].

    Either ``function`` (closed form) or ``table`` (a tabulated spectrum
    field, read piecewise-constant in scale and location) is set. A Dirac
    spectrum at scale ``dirac`` has neither and is tabulated on demand.
    """

    name: str
    scale_support: tuple
    function: Optional[Callable] = None
    table: Optional[ScaleTimeField] = None
    dirac: Optional[float] = None
    params: dict = field(default_factory=dict)

    def __call__(self, u, z):
        if self.function is not None:
            return self.function(u, z)
        if self.table is not None:
            return _lookup(self.table, u, z)
        raise UsageError(f"spectrum {self.name!r} has no pointwise values; tabulate it on a grid")

    def at_time(self, span: float, origin: float = 0.0) -> Callable:
        """The spectrum as a function of absolute time ``t``."""
        return lambda u, t: self(u, (np.asarray(t) - origin) / span)

    def tabulate(self, grid: ScaleGrid, locations: LocationGrid) -> ScaleTimeField:
        if self.dirac is not None:
            data = np.zeros((grid.size, locations.size))
            data[grid.nearest(self.dirac)] = 1.0 / grid.du
        else:
            data = self(grid.scales[:, None], locations.z[None, :])
        return ScaleTimeField(Role.SPECTRUM, grid, locations, data)


def _lookup(table: ScaleTimeField, u, z):
    scales = table.grid.scales
    du = table.grid.du
    iu = np.rint((np.asarray(u, dtype=float) - scales[0]) / du).astype(int)
    zs = table.locations.z
    iz = np.clip(np.rint((np.asarray(z, dtype=float) - zs[0]) / (zs[1] - zs[0])).astype(int),
                 0, zs.size - 1)
    inside = (iu >= 0) & (iu < scales.size)
    return np.where(inside, table.data[np.clip(iu, 0, scales.size - 1), iz], 0.0)


def white_noise(sigma: float = 1.0) -> SpectrumSpec:
    return SpectrumSpec("white_noise", (0.0, math.inf),
                        function=lambda u, z: sigma ** 2 / (math.log(2.0) * np.asarray(u) ** 2)
                        + 0.0 * np.asarray(z),
                        params={"sigma": sigma})


def haar_ma(alpha: float) -> SpectrumSpec:
    return SpectrumSpec("haar_ma", (alpha, alpha), dirac=float(alpha), params={"alpha": alpha})


def three_band_tanh() -> SpectrumSpec:
    return SpectrumSpec("three_band_tanh", (0.5, 5.5), function=_three_band)


def square_sine_burst() -> SpectrumSpec:
    return SpectrumSpec("square_sine_burst", (0.75, 12.0), function=_square_sine_burst)


def piecewise_cosine(scale_factor: float = 1.0) -> SpectrumSpec:
    return SpectrumSpec("piecewise_cosine", (scale_factor, 4.0 * scale_factor),
                        function=_piecewise_cosine(scale_factor),
                        params={"scale_factor": scale_factor})


def tabulated(table: ScaleTimeField) -> SpectrumSpec:
    table.require(Role.SPECTRUM)
    g = table.grid
    return SpectrumSpec("tabulated", (g.scales[0] - g.du / 2, g.scales[-1] + g.du / 2),
                        table=table)


BUILTIN = {
    "white_noise": white_noise,
    "haar_ma": haar_ma,
    "three_band_tanh": three_band_tanh,
    "square_sine_burst": square_sine_burst,
    "piecewise_cosine": piecewise_cosine,
}


def get_spectrum(name: str, **params) -> SpectrumSpec:
    try:
        factory = BUILTIN[name.replace("-", "_")]
    except KeyError:
        raise UsageError(f"unknown spectrum {name!r}; expected one of {sorted(BUILTIN)}") from None
    return factory(**params)


def builtin_spectrum(name: str, grid: ScaleGrid, locations: LocationGrid, **params) -> ScaleTimeField:
    """Tabulate a named benchmark spectrum on the given grids."""
    return get_spectrum(name, **params).tabulate(grid, locations)


def expected_periodogram(spec: SpectrumSpec, kind, grid: ScaleGrid, locations: LocationGrid,
                         dx: Optional[float] = None, u_range: Optional[tuple] = None) -> ScaleTimeField:
    """Analytic ``beta(u, z) = int A(u, x) S(x, z) dx`` at the grid scales.

    Unlike ``forward_map`` on a tabulated spectrum, the integral runs over
    the spectrum's own scale support (midpoint rule, step ``dx``, default
    ``du / 16``), so bands narrower than the estimation grid keep their
    full mass.
    """
    kind = WaveletKind.parse(kind)
    u = grid.scales
    if spec.dirac is not None:
        data = np.repeat(ipk(kind, u, spec.dirac)[:, None], locations.size, axis=1)
        return ScaleTimeField(Role.PERIODOGRAM, grid, locations, data)
    lo, hi = u_range or spec.scale_support
    if not (math.isfinite(hi) and lo > 0) and u_range is None:
        raise UsageError(f"spectrum {spec.name!r} has unbounded scale support; set u_range")
    dx = dx or grid.du / 16
    x = lo + (np.arange(int(math.ceil((hi - lo) / dx))) + 0.5) * dx
    S = spec(x[:, None], locations.z[None, :])
    data = dx * ipk(kind, u[:, None], x[None, :]) @ S
    return ScaleTimeField(Role.PERIODOGRAM, grid, locations, np.maximum(data, 0.0))


# ---------------------------------------------------------------------------
# sampling


@dataclass
class SimConfig:
    """Sampling design and randomness for the simulators.

    ``times`` overrides ``n``/``span``/``sampling`` when given. ``du_sim`` and
    ``dv_sim`` set the resolution of the discretized Gaussian basis used by
    :func:`simulate_clswp`; ``u_range`` restricts its scale range.
    """

    n: int = 1024
    span: float = 1.0
    sampling: str = "regular"
    seed: int = 0
    times: Optional[np.ndarray] = None
    du_sim: Optional[float] = None
    dv_sim: Optional[float] = None
    u_range: Optional[tuple] = None

    def sample_times(self) -> np.ndarray:
        if self.times is not None:
            return TimeSeries(self.times, np.zeros(len(self.times))).times
        if self.sampling not in SAMPLING_SCHEMES:
            raise UsageError(f"unknown sampling {self.sampling!r}; expected one of {SAMPLING_SCHEMES}")
        if self.n < 2 or self.span <= 0:
            raise UsageError("need n >= 2 samples over a positive span")
        rng = np.random.default_rng([self.seed, 0])
        if self.sampling == "uniform-gaps":
            gaps = rng.uniform(0.0, 1.0, self.n - 1)
            times = np.concatenate([[0.0], np.cumsum(gaps)])
            return times * (self.span / times[-1])
        times = np.linspace(0.0, self.span, self.n)
        if self.sampling == "missing25":
            times = times[keep_mask(self.n, 0.25, rng)]
        return times


def keep_mask(n: int, fraction: float, rng) -> np.ndarray:
    """Boolean mask dropping ``fraction`` of the interior samples at random."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    drop = int(round(fraction * n))
    mask = np.ones(n, dtype=bool)
    mask[1 + rng.choice(n - 2, size=min(drop, n - 2), replace=False)] = False
    return mask


def _replicate_rng(seed: int, replicate: int):
    return np.random.default_rng([seed, 1, replicate])


# ---------------------------------------------------------------------------
# processes


def haar_ma_batch(alpha: float, times: np.ndarray, replicates: int, seed: int = 0) -> np.ndarray:
    """Replicates of the Haar MA(alpha) process, shape ``(R, n)``.

    One Brownian path is sampled exactly at every time the construction
    needs (``t``, ``t - alpha/2``, ``t - alpha``), so no path discretization
    enters.
    """
    if alpha <= 0:
        raise UsageError("alpha must be positive")
    times = np.asarray(times, dtype=float)
    if times[-1] - times[0] <= alpha:
        raise UsageError("the sampling span must exceed alpha")
    need = np.concatenate([times, times - alpha / 2, times - alpha])
    points, inverse = np.unique(need, return_inverse=True)
    n = times.size
    i_now, i_mid, i_back = inverse[:n], inverse[n:2 * n], inverse[2 * n:]
    steps = np.sqrt(np.diff(points))
    out = np.empty((replicates, n))
    for r in range(replicates):
        rng = _replicate_rng(seed, r)
        path = np.concatenate([[0.0], np.cumsum(steps * rng.standard_normal(steps.size))])
        out[r] = (path[i_now] - 2.0 * path[i_mid] + path[i_back]) / math.sqrt(alpha)
    return out


def white_noise_batch(sigma: float, times: np.ndarray, replicates: int, seed: int = 0) -> np.ndarray:
    """Gaussian white-noise replicates, shape ``(R, n)``.

    Each value is a noise increment over the sample's trapezoid cell divided
    by the cell width, so the trapezoid transform integrates the wavelet
    against the white-noise measure.
    """
    if sigma <= 0:
        raise UsageError("sigma must be positive")
    w = trapezoid_weights(times)
    scale = sigma / np.sqrt(w)
    out = np.empty((replicates, w.size))
    for r in range(replicates):
        out[r] = scale * _replicate_rng(seed, r).standard_normal(w.size)
    return out


class _BasisDesign:
    """Discretized Gaussian basis: sparse map from the basis grid to samples."""

    def __init__(self, spec: SpectrumSpec, kind: WaveletKind, times: np.ndarray, cfg: SimConfig):
        if spec.table is not None:
            scales = spec.table.grid.scales
            du = spec.table.grid.du
        elif spec.dirac is not None:
            du = cfg.du_sim or 0.05 * spec.dirac
            scales = np.array([spec.dirac])
        else:
            lo, hi = cfg.u_range or spec.scale_support
            if not math.isfinite(hi) or lo <= 0 and not cfg.u_range:
                raise UsageError(f"spectrum {spec.name!r} has unbounded scale support; set u_range")
            du = cfg.du_sim or (hi - lo) / 100.0
            count = max(1, int(math.ceil((hi - lo) / du - 1e-9)))
            scales = lo + (np.arange(count) + 0.5) * du
            self._warn_clipped(spec, lo, hi)
        gaps = np.diff(times)
        dv = cfg.dv_sim or 0.5 * float(gaps.min())
        t0, t1 = times[0], times[-1]
        span = t1 - t0
        reach = kind.effective_support_radius(scales[-1])
        # half-step offset keeps the basis off the sample lattice, where the
        # closed ends of the Haar pieces would alias
        v = np.arange(t0 - reach, t1 + reach + dv, dv) + 0.5 * dv
        self.scales, self.v, self.du, self.dv = scales, v, du, dv

        rows, cols, vals = [], [], []
        for i, u in enumerate(scales):
            if spec.dirac is not None:
                amp = np.full(v.size, 1.0 / du)
            else:
                # the basis extends past the data; the spectrum is held at its end values there
                amp = spec(u, np.clip((v - t0) / span, 0.0, 1.0))
            amp = np.sqrt(np.maximum(amp, 0.0) * du * dv)
            if not np.any(amp):
                continue
            lo_s, hi_s = kind.support(u)
            start = np.searchsorted(v, times - hi_s - 1e-12 * u, side="left")
            stop = np.searchsorted(v, times - lo_s + 1e-12 * u, side="right")
            n_in = stop - start
            total = int(n_in.sum())
            k = np.repeat(np.arange(times.size), n_in)
            j = start[k] + np.arange(total) - np.repeat(np.cumsum(n_in) - n_in, n_in)
            # Haar is used reflected (backward looking): psi_H(u, t - v); the
            # other families are even so the same expression applies
            vals.append(amp[j] * psi(kind, u, times[k] - v[j]))
            rows.append(k)
            cols.append(i * v.size + j)
        shape = (times.size, scales.size * v.size)
        if rows:
            self.matrix = sparse.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=shape).tocsr()
        else:
            self.matrix = sparse.csr_matrix(shape)

    @staticmethod
    def _warn_clipped(spec, lo, hi):
        s_lo, s_hi = spec.scale_support
        if s_lo >= lo and s_hi <= hi:
            return
        if not (math.isfinite(s_hi) and s_lo > 0):
            warnings.warn(f"spectrum {spec.name!r} has mass outside the simulated scales "
                          f"[{lo:g}, {hi:g}]", RuntimeWarning, stacklevel=4)
            return
        u = np.linspace(s_lo, s_hi, 2001)
        z = np.linspace(0, 1, 101)
        mass = spec(u[:, None], z[None, :])
        inside = (u >= lo) & (u <= hi)
        frac = 1.0 - mass[inside].sum() / max(mass.sum(), 1e-300)
        warnings.warn(f"{frac:.1%} of the spectrum mass lies outside the simulated scales",
                      RuntimeWarning, stacklevel=4)


def clswp_batch(spec: SpectrumSpec, kind, times: np.ndarray, replicates: int,
                cfg: Optional[SimConfig] = None, chunk: int = 32) -> np.ndarray:
    """Replicates of a process with spectrum ``spec``, shape ``(R, n)``.

    The process is the double sum of sqrt(S) * psi * sqrt(du dv) * xi over
    a (scale, location) grid that extends one support radius beyond the
    data on both sides; ``xi`` is standard normal.
    """
    cfg = cfg or SimConfig()
    kind = WaveletKind.parse(kind)
    times = np.asarray(times, dtype=float)
    design = _BasisDesign(spec, kind, times, cfg)
    n_basis = design.matrix.shape[1]
    out = np.empty((replicates, times.size))
    for start in range(0, replicates, chunk):
        stop = min(start + chunk, replicates)
        xi = np.empty((n_basis, stop - start))
        for r in range(start, stop):
            xi[:, r - start] = _replicate_rng(cfg.seed, r).standard_normal(n_basis)
        out[start:stop] = (design.matrix @ xi).T
    return out


def simulate_haar_ma(alpha: float, cfg: SimConfig, replicate: int = 0) -> TimeSeries:
    times = cfg.sample_times()
    values = haar_ma_batch(alpha, times, replicate + 1, cfg.seed)[replicate]
    return TimeSeries(times, values)


def simulate_white_noise(sigma: float, cfg: SimConfig, replicate: int = 0) -> TimeSeries:
    times = cfg.sample_times()
    values = white_noise_batch(sigma, times, replicate + 1, cfg.seed)[replicate]
    return TimeSeries(times, values)


def simulate_clswp(spec: SpectrumSpec, kind, cfg: SimConfig, replicate: int = 0) -> TimeSeries:
    times = cfg.sample_times()
    values = clswp_batch(spec, kind, times, replicate + 1, cfg)[replicate]
    return TimeSeries(times, values)
