"""Wavelets, autocorrelation wavelets and inner product kernels.

Four real wavelet families are supported, each with closed forms for the
wavelet ``psi(u, t)``, the autocorrelation wavelet

    Psi(u, tau) = int psi(u, v) psi(u, v - tau) dv

and the inner product kernel

    A(u, x) = int Psi(u, tau) Psi(x, tau) dtau.

``acw_numeric`` and ``ipk_numeric`` evaluate the defining integrals by
quadrature. They never call the closed forms and serve as test oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy import integrate

from .errors import DomainError
from .fields import ScaleGrid

ArrayLike = Union[float, np.ndarray]

# Morlet frequency constant, 2 pi^2 / ln 2
ETA = 2.0 * math.pi ** 2 / math.log(2.0)
_SQRT_ETA = math.sqrt(ETA)
_EXP_NEG_ETA = math.exp(-ETA)


class WaveletKind(str, Enum):
    HAAR = "haar"
    RICKER = "ricker"
    MORLET = "morlet"
    SHANNON = "shannon"

    @classmethod
    def parse(cls, value) -> "WaveletKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise DomainError(f"unknown wavelet {value!r}; expected one of {names}") from None

    def effective_support_radius(self, u: float) -> float:
        """Half-width beyond which ``psi(u, .)`` is treated as zero."""
        return _RADIUS_FACTOR[self] * u

    def support(self, u: float) -> tuple[float, float]:
        """Interval of ``t`` on which ``psi(u, t)`` may be non-zero."""
        if self is WaveletKind.HAAR:
            return 0.0, float(u)
        r = self.effective_support_radius(u)
        return -r, r


_RADIUS_FACTOR = {
    WaveletKind.HAAR: 1.0,
    WaveletKind.RICKER: 4.0,
    WaveletKind.MORLET: 4.0,
    WaveletKind.SHANNON: 25.0,
}


def _positive(*scales) -> None:
    for s in scales:
        if np.any(np.asarray(s) <= 0):
            raise DomainError("scales must be positive")


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


# ---------------------------------------------------------------------------
# wavelets


def psi(kind, u: ArrayLike, t: ArrayLike, truncate: bool = True) -> ArrayLike:
    """Evaluate the wavelet of family ``kind`` at scale ``u`` and offset ``t``.

    Parameters
    ----------
    kind : WaveletKind or str
    u : float or ndarray
        Scale(s), strictly positive.
    t : float or ndarray
        Time offset(s); broadcast against ``u``.
    truncate : bool
        If True (default) values outside the effective support are set to
        zero, which is what the windowed transform assumes. The quadrature
        oracles use ``truncate=False``.
    """
    kind = WaveletKind.parse(kind)
    _positive(u)
    u, t = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(t, dtype=float))
    s = t / u
    if kind is WaveletKind.HAAR:
        out = ((s >= 0) & (s <= 0.5)).astype(float) - ((s >= 0.5) & (s <= 1)).astype(float)
        out = out / np.sqrt(u)
    elif kind is WaveletKind.RICKER:
        out = 2.0 / (math.pi ** 0.25 * np.sqrt(3.0 * u)) * (1 - s * s) * np.exp(-0.5 * s * s)
    elif kind is WaveletKind.MORLET:
        # u^{-1/2} makes the family unit-norm, consistent with the ACW closed form
        out = math.sqrt(2.0) / math.pi ** 0.25 / np.sqrt(u) * np.cos(_SQRT_ETA * s) * np.exp(-0.5 * s * s)
    else:
        out = (2.0 * np.sinc(2.0 * s) - np.sinc(s)) / np.sqrt(u)
    if truncate and kind is not WaveletKind.HAAR:
        out = np.where(np.abs(s) <= _RADIUS_FACTOR[kind], out, 0.0)
    return _out(out)


def acw(kind, u: ArrayLike, tau: ArrayLike) -> ArrayLike:
    """Closed-form autocorrelation wavelet ``Psi(u, tau)``; even in ``tau``."""
    kind = WaveletKind.parse(kind)
    _positive(u)
    u, tau = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(tau, dtype=float))
    s = np.abs(tau) / u
    if kind is WaveletKind.HAAR:
        out = np.where(s <= 0.5, 1.0 - 3.0 * s, np.where(s <= 1.0, s - 1.0, 0.0))
    elif kind is WaveletKind.RICKER:
        s2 = s * s
        out = (1.0 + s2 * s2 / 12.0 - s2) * np.exp(-0.25 * s2)
    elif kind is WaveletKind.MORLET:
        out = (_EXP_NEG_ETA + np.cos(_SQRT_ETA * s)) * np.exp(-0.25 * s * s)
    else:
        out = 2.0 * np.sinc(2.0 * s) - np.sinc(s)
    return _out(out)


def ipk(kind, u: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Closed-form inner product kernel ``A(u, x)``; symmetric, ``A(bu, bx) = b A(u, x)``."""
    kind = WaveletKind.parse(kind)
    _positive(u, x)
    u, x = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(x, dtype=float))
    # evaluating on (max, min) keeps the result bitwise symmetric
    a = np.maximum(u, x)
    b = np.minimum(u, x)
    if kind is WaveletKind.HAAR:
        near = 2 * b - a + a * a / (6 * b) - 5 * b * b / (6 * a)
        out = np.where(b <= 0.5 * a, b * b / (2 * a), near)
    elif kind is WaveletKind.RICKER:
        out = 70.0 * math.sqrt(math.pi) * a ** 5 * b ** 5 / (3.0 * (a * a + b * b) ** 4.5)
    elif kind is WaveletKind.MORLET:
        d = a * a + b * b
        # expanded form of the cosh expression; avoids exp(eta) * exp(-2 eta)
        bracket = (np.exp(-2 * ETA)
                   + np.exp(-ETA * (d + a * a) / d) + np.exp(-ETA * (d + b * b) / d)
                   + 0.5 * np.exp(-ETA * (a - b) ** 2 / d)
                   + 0.5 * np.exp(-ETA * (a + b) ** 2 / d))
        out = 2.0 * a * b * np.sqrt(math.pi / d) * bracket
    else:
        out = np.where(b >= 0.5 * a, 2 * b - a, 0.0)
    return _out(out)


# ---------------------------------------------------------------------------
# quadrature oracles

_ORACLE_PANELS = 4096
# Gaussian-type families are integrated well past their effective support
_GAUSS_ORACLE_RADIUS = 14.0
_SHANNON_ORACLE_RADIUS = 25.0


def _simpson(f, a: float, b: float, panels: int) -> float:
    if b <= a:
        return 0.0
    panels += panels % 2
    x = np.linspace(a, b, panels + 1)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (3.0 * panels) * np.dot(w, f(x)))


def _piecewise(f, points, rule: str) -> float:
    """Integrate over consecutive breakpoints; ``rule`` is 'midpoint' or 'simpson'."""
    pts = np.unique(np.asarray(points, dtype=float))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if rule == "midpoint":
            total += (b - a) * float(f(np.array([0.5 * (a + b)]))[0])
        else:
            total += _simpson(f, a, b, 2)
    return total


def _sine_pair_tail(freqs_p, freqs_q, shift: float, weight, lower: float) -> float:
    """``int_lower^inf weight(v) * P(v) * Q(v - shift) dv`` where
    ``P = sum s_i sin(p_i v)`` and ``Q = sum s_j sin(q_j v)``.

    Products are expanded into pure cosines/sines and each oscillatory piece is
    handed to QUADPACK's Fourier-integral routine.
    """
    coef = {}
    for p, sp in freqs_p:
        for q, sq in freqs_q:
            c = 0.5 * sp * sq
            # sin(pv) sin(qv - q shift) = (cos((p-q)v + q shift) - cos((p+q)v - q shift)) / 2
            for k, phase, sign in ((p - q, q * shift, 1.0), (p + q, -q * shift, -1.0)):
                if k < 0:
                    k, phase = -k, -phase
                cc, ss = coef.get(k, (0.0, 0.0))
                coef[k] = (cc + sign * c * math.cos(phase), ss - sign * c * math.sin(phase))
    total = 0.0
    for k, (cc, ss) in coef.items():
        if abs(k) < 1e-14:
            total += cc * integrate.quad(weight, lower, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
            continue
        if cc != 0.0:
            total += cc * integrate.quad(weight, lower, np.inf, weight="cos", wvar=k,
                                         epsabs=1e-14, limlst=200)[0]
        if ss != 0.0:
            total += ss * integrate.quad(weight, lower, np.inf, weight="sin", wvar=k,
                                         epsabs=1e-14, limlst=200)[0]
    return total


def acw_numeric(kind, u: float, tau: float) -> float:
    """Autocorrelation wavelet by direct quadrature of its defining integral."""
    kind = WaveletKind.parse(kind)
    _positive(u)
    u, tau = float(u), float(tau)

    def f(v):
        return psi(kind, u, v, truncate=False) * psi(kind, u, v - tau, truncate=False)

    if kind is WaveletKind.HAAR:
        lo, hi = max(0.0, tau), min(u, tau + u)
        if hi <= lo:
            return 0.0
        pts = [p for p in (0.0, u / 2, u, tau, tau + u / 2, tau + u) if lo <= p <= hi]
        return _piecewise(f, [lo, hi] + pts, "midpoint")

    centre = 0.5 * tau
    if kind is WaveletKind.SHANNON:
        radius = _SHANNON_ORACLE_RADIUS * u + 0.5 * abs(tau)
        panels = int(160 * radius / u) + 2
        core = _simpson(f, centre - radius, centre + radius, panels)
        a = math.pi / u
        terms = [(2 * a, 1.0), (a, -1.0)]
        # integrand is symmetric about tau/2, so both tails are equal
        tail = _sine_pair_tail(terms, terms, tau, lambda v: 1.0 / (v * (v - tau)),
                               centre + radius)
        return core + 2.0 * (u / math.pi ** 2) * tail

    radius = _GAUSS_ORACLE_RADIUS * u + 0.5 * abs(tau)
    return _simpson(f, centre - radius, centre + radius, 2 * _ORACLE_PANELS)


def ipk_numeric(kind, u: float, x: float) -> float:
    """Inner product kernel by quadrature of ``int Psi(u, tau) Psi(x, tau) dtau``.

    The integrand uses the closed-form autocorrelation wavelets (checked
    separately against ``acw_numeric``); only the lag integral is numerical.
    """
    kind = WaveletKind.parse(kind)
    _positive(u, x)
    u, x = float(u), float(x)

    def f(tau):
        return acw(kind, u, tau) * acw(kind, x, tau)

    if kind is WaveletKind.HAAR:
        m = max(u, x)
        pts = [-m, m]
        for s in (u, x):
            pts += [-s, -s / 2, 0.0, s / 2, s]
        return _piecewise(f, pts, "simpson")

    if kind is WaveletKind.SHANNON:
        radius = _SHANNON_ORACLE_RADIUS * max(u, x)
        panels = int(160 * radius / min(u, x)) + 2
        core = _simpson(f, -radius, radius, panels)
        a, b = math.pi / u, math.pi / x
        tail = _sine_pair_tail([(2 * a, 1.0), (a, -1.0)], [(2 * b, 1.0), (b, -1.0)], 0.0,
                               lambda t: 1.0 / (t * t), radius)
        return core + 2.0 * (u * x / math.pi ** 2) * tail

    radius = _GAUSS_ORACLE_RADIUS * min(u, x)
    return _simpson(f, -radius, radius, 2 * _ORACLE_PANELS)


# ---------------------------------------------------------------------------
# discretized operator


@dataclass(frozen=True)
class KernelMatrix:
    """Discretized inner product operator with entries ``du * A(u_i, u_k)``.

    ``eigenvalues`` are sorted in descending order; ``eigenvectors[:, n]``
    is the orthonormal eigenvector for ``eigenvalues[n]``.
    """

    kind: WaveletKind
    grid: ScaleGrid
    entries: np.ndarray
    norm: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.size

    def block_norm(self, i: int) -> float:
        """Spectral norm of the leading ``i x i`` block."""
        if i >= self.size:
            return self.norm
        return float(np.linalg.norm(self.entries[:i, :i], 2))


def kernel_matrix(kind, grid: ScaleGrid) -> KernelMatrix:
    kind = WaveletKind.parse(kind)
    u = grid.scales
    entries = grid.du * ipk(kind, u[:, None], u[None, :])
    entries.setflags(write=False)
    evals, evecs = np.linalg.eigh(entries)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return KernelMatrix(kind=kind, grid=grid, entries=entries,
                        norm=float(np.linalg.norm(entries, 2)),
                        eigenvalues=evals, eigenvectors=evecs)


def kernel_table(kind, table: str, umin: float, umax: float, n: int):
    """Tabulate ``acw`` or ``ipk`` for plotting.

    Returns ``(row_coords, col_coords, values)``. For ``acw`` rows are scales
    and columns are lags on ``[-2 umax, 2 umax]``; for ``ipk`` both axes are
    scales.
    """
    kind = WaveletKind.parse(kind)
    scales = np.linspace(umin, umax, int(n))
    _positive(scales)
    if table == "acw":
        lags = np.linspace(-2 * umax, 2 * umax, int(n))
        return scales, lags, acw(kind, scales[:, None], lags[None, :])
    if table == "ipk":
        return scales, scales, ipk(kind, scales[:, None], scales[None, :])
    raise DomainError(f"unknown table {table!r}; expected 'acw' or 'ipk'")
