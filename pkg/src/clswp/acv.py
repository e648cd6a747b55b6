"""Local autocovariance, autocorrelation and variance from a spectrum.

The local autocovariance integrates the spectrum against the
autocorrelation wavelets, ``c(z, tau) = int S(u, z) Psi(u, tau) du``,
discretized on the scale grid. :func:`standard_autocovariance` evaluates
the exact process autocovariance by brute-force quadrature and serves as an
oracle for how well the local version approximates it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import QuadratureError, UsageError
from .fields import LocationGrid, Role, ScaleGrid, ScaleTimeField
from .kernels import _GAUSS_ORACLE_RADIUS, WaveletKind, acw, psi

AUTOCOVARIANCE = "autocovariance"
AUTOCORRELATION = "autocorrelation"
VARIANCE_FLOOR_RELATIVE = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class AcvField:
    """Autocovariance or autocorrelation over (location, lag).

    ``data`` has shape ``(M_v, M_tau)``; missing entries are NaN.
    """

    role: str
    locations: LocationGrid
    lags: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        if self.role not in (AUTOCOVARIANCE, AUTOCORRELATION):
            raise UsageError(f"unknown acv role {self.role!r}")
        lags = np.asarray(self.lags, dtype=float)
        data = np.asarray(self.data, dtype=float)
        if data.shape != (self.locations.size, lags.size):
            raise UsageError("acv data shape does not match locations and lags")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "data", data)

    def at_lag(self, tau: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.lags - tau)))
        if not math.isclose(self.lags[k], tau, rel_tol=1e-9, abs_tol=1e-12):
            raise UsageError(f"lag {tau} is not on the lag grid")
        return self.data[:, k]


def default_lags(grid: ScaleGrid) -> np.ndarray:
    """Lags ``-L..L`` at spacing ``du/2`` with ``L = 2 u_max``."""
    step = grid.du / 2
    count = int(math.ceil(2 * grid.scales[-1] / step - 1e-9))
    return np.arange(-count, count + 1) * step


def lag_range(lmin: float, lmax: float, n: int) -> np.ndarray:
    return np.linspace(lmin, lmax, int(n))


def local_autocovariance(spec: ScaleTimeField, kind, lags: Optional[Sequence[float]] = None) -> AcvField:
    """``c(z_j, tau) = du * sum_i S(u_i, z_j) Psi(u_i, tau)``."""
    spec.require(Role.SPECTRUM, Role.SPECTRUM_UNCONSTRAINED)
    kind = WaveletKind.parse(kind)
    lags = default_lags(spec.grid) if lags is None else np.asarray(lags, dtype=float)
    if not np.all(np.isfinite(lags)):
        raise UsageError("lags must be finite")
    # evaluate each |tau| once so the result is exactly even in tau
    mags, back = np.unique(np.abs(lags), return_inverse=True)
    Psi = acw(kind, spec.grid.scales[:, None], mags[None, :])
    data = spec.grid.du * (spec.data.T @ Psi)
    return AcvField(AUTOCOVARIANCE, spec.locations, lags, data[:, back])


def local_variance(spec: ScaleTimeField, kind=None) -> np.ndarray:
    """``sigma^2(z_j) = du * sum_i S(u_i, z_j)``; ``Psi(u, 0) = 1`` for every family."""
    spec.require(Role.SPECTRUM, Role.SPECTRUM_UNCONSTRAINED)
    return spec.grid.du * spec.data.sum(axis=0)


def local_autocorrelation(acv: AcvField, variance) -> AcvField:
    """Divide by the local variance; locations with ``sigma^2 <= eps`` become NaN.

    ``eps`` is ``1e-12`` times the largest variance.
    """
    if acv.role != AUTOCOVARIANCE:
        raise UsageError("expected an autocovariance field")
    var = np.asarray(variance, dtype=float)
    if var.shape != (acv.locations.size,):
        raise UsageError("variance must have one value per location")
    top = np.max(var) if var.size else 0.0
    if not top > 0:
        raise UsageError("local variance is zero everywhere")
    ok = var > VARIANCE_FLOOR_RELATIVE * top
    data = np.full(acv.data.shape, np.nan)
    data[ok] = acv.data[ok] / var[ok, None]
    return AcvField(AUTOCORRELATION, acv.locations, acv.lags, data)


# ---------------------------------------------------------------------------
# brute-force process autocovariance


def _gauss_panels(f, edges: np.ndarray, panels: int):
    """Composite 8-point Gauss-Legendre over consecutive ``edges`` pieces.

    ``f`` maps an array of nodes to values of shape ``(..., nodes)``.
    """
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        cuts = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(cuts)
        mid = 0.5 * (cuts[1:] + cuts[:-1])
        nodes.append((mid[:, None] + half[:, None] * _GL_NODES).ravel())
        weights.append((half[:, None] * _GL_WEIGHTS).ravel())
    if not nodes:
        return 0.0
    x = np.concatenate(nodes)
    return f(x) @ np.concatenate(weights)


def _adaptive(f, edges, tol: float, start: int = 4, max_panels: int = 4096):
    coarse = _gauss_panels(f, edges, start)
    panels = start
    while True:
        panels *= 2
        fine = _gauss_panels(f, edges, panels)
        err = np.max(np.abs(fine - coarse))
        if err <= tol:
            return fine, err
        if panels >= max_panels:
            raise QuadratureError(
                f"quadrature did not reach {tol:g} (estimated error {err:.3g})", partial=fine)
        coarse = fine


def _window(kind: WaveletKind, u: float):
    # Gaussian families decay fast but not within 4u at large lags; integrate
    # them untruncated over the wider window the kernel oracles use
    if kind in (WaveletKind.RICKER, WaveletKind.MORLET):
        r = _GAUSS_ORACLE_RADIUS * u
        return (-r, r), False
    return kind.support(u), True


def _breakpoints(kind: WaveletKind, u: float, tau: float):
    (lo, hi), _ = _window(kind, u)
    a, b = max(lo, lo + tau), min(hi, hi + tau)
    if b <= a:
        return None
    pts = [a, b]
    if kind is WaveletKind.HAAR:
        pts += [u / 2, u / 2 + tau, 0.0, u, tau, u + tau]
    else:
        pts += [0.0, tau]
    pts = np.unique(np.clip(pts, a, b))
    return pts


def standard_autocovariance(spec_fn: Callable, kind, t, tau, grid: Optional[ScaleGrid] = None,
                            u_range: Optional[tuple] = None, u_points: Sequence[float] = (),
                            time_points: Sequence[float] = (), tol: float = 1e-5) -> np.ndarray:
    """``c_X(t, tau) = int int S(u, t + v) psi(u, v) psi(u, v - tau) dv du``.

    Parameters
    ----------
    spec_fn : callable
        ``spec_fn(u, t)`` in absolute time, vectorized over ``t``.
    t, tau : float or array
        Evaluation times and lags; the result has shape ``(len(t), len(tau))``
        (scalars are squeezed).
    grid : ScaleGrid, optional
        Integrate over ``u`` with the rectangle rule on this grid, matching
        :func:`local_autocovariance`. Otherwise ``u_range`` is required and
        ``u`` is integrated by composite Gauss-Legendre, split at ``u_points``.
    time_points : sequence of float
        Absolute times where ``spec_fn`` is non-smooth; used as extra
        breakpoints in ``v``.
    tol : float
        Absolute tolerance of each inner integral and of the outer one.

    The ``v`` integral runs over the joint support of the two wavelets. For
    Ricker and Morlet this is widened to 14 scales so the result matches the
    untruncated closed forms; Shannon wavelets are cut at their effective
    support, which limits accuracy for that family.

    Raises
    ------
    QuadratureError
        If the tolerance is not met; ``partial`` holds the best estimate.
    """
    kind = WaveletKind.parse(kind)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    time_points = np.asarray(time_points, dtype=float)

    def inner(u: float, lag: float) -> np.ndarray:
        pts = _breakpoints(kind, u, lag)
        if pts is None:
            return np.zeros(t_arr.size)
        if time_points.size:
            extra = (time_points[None, :] - t_arr[:, None]).ravel()
            pts = np.unique(np.concatenate([pts, extra[(extra > pts[0]) & (extra < pts[-1])]]))

        truncate = _window(kind, u)[1]

        def f(v):
            w = psi(kind, u, v, truncate) * psi(kind, u, v - lag, truncate)
            return spec_fn(u, t_arr[:, None] + v[None, :]) * w[None, :]

        value, _ = _adaptive(f, pts, tol)
        return value

    out = np.zeros((t_arr.size, tau_arr.size))
    for k, lag in enumerate(tau_arr):
        if grid is not None:
            out[:, k] = grid.du * sum(inner(u, lag) for u in grid.scales)
        else:
            if u_range is None:
                raise UsageError("give either a scale grid or u_range")
            edges = np.unique(np.clip(np.concatenate([u_range, np.asarray(u_points, float)]),
                                      *u_range))

            def outer(us):
                return np.stack([inner(u, lag) for u in us], axis=-1)

            out[:, k], _ = _adaptive(outer, edges, tol, start=2, max_panels=256)
    if np.ndim(t) == 0 and np.ndim(tau) == 0:
        return float(out[0, 0])
    if np.ndim(t) == 0:
        return out[0]
    if np.ndim(tau) == 0:
        return out[:, 0]
    return out


def local_autocovariance_fn(spec_fn: Callable, kind, t, tau, u_range: tuple,
                            u_points: Sequence[float] = (), tol: float = 1e-8) -> np.ndarray:
    """``c(t, tau) = int S(u, t) Psi(u, tau) du`` for a spectrum function.

    Companion to :func:`standard_autocovariance` with the same output shape,
    using the closed-form autocorrelation wavelet and adaptive quadrature in ``u``.
    """
    kind = WaveletKind.parse(kind)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    edges = np.unique(np.clip(np.concatenate([u_range, np.asarray(u_points, float)]), *u_range))

    def f(us):
        S = np.stack([spec_fn(u, t_arr) for u in us], axis=-1)         # (t, nodes)
        Psi = acw(kind, us[:, None], tau_arr[None, :])                  # (nodes, tau)
        return np.einsum("in,nk->ikn", S, Psi)

    out, _ = _adaptive(f, edges, tol, start=4, max_panels=1024)
    if np.ndim(t) == 0 and np.ndim(tau) == 0:
        return float(out[0, 0])
    if np.ndim(t) == 0:
        return out[0]
    if np.ndim(tau) == 0:
        return out[:, 0]
    return out
