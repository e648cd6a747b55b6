"""Smoothing of the raw wavelet periodogram by discrete wavelet shrinkage.

Each scale row is treated as a signal over location: it is (optionally)
log-transformed, decomposed with a periodic orthonormal Daubechies
transform, soft-thresholded at ``sigma * ln(T)`` and reconstructed.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pywt

from .errors import UsageError
from .fields import Role, ScaleTimeField

MAD_CONSTANT = 0.6745
# levels from this one to the finest feed the pooled noise estimate
POOLED_FROM_LEVEL = 3
FLOOR_RELATIVE = 1e-12


def pywt_filter(name: str) -> str:
    """Map ``dN`` (extremal phase) and ``laN`` (least asymmetric) to PyWavelets names."""
    m = re.fullmatch(r"(d|la)(\d+)", str(name).lower())
    if not m:
        raise UsageError(f"unknown filter {name!r}; use dN or laN, e.g. d3 or la4")
    family, order = m.group(1), int(m.group(2))
    pyname = ("db" if family == "d" else "sym") + str(order)
    if family == "la" and order == 1 or pyname not in pywt.wavelist(kind="discrete"):
        raise UsageError(f"filter {name!r} is not available")
    return pyname


@dataclass(frozen=True)
class ShrinkConfig:
    """Parameters of the shrinkage smoother.

    Parameters
    ----------
    filter : str
        ``d2``, ``d3``, ``d4``, ``d10`` (Daubechies extremal phase) or
        ``la4`` etc. (least asymmetric).
    coarsest_level : int
        Level ``l0``; father coefficients at this level are kept untouched.
    log_domain : bool
        Smooth the logarithm of the periodogram and exponentiate back.
    span_T : float, optional
        Data span entering the threshold ``sigma * ln(T)``. Defaults to the
        location span of the field being smoothed.
    sigma_levels : {"pooled", "finest"}
        Noise level from detail levels 3..finest pooled, or the finest only.
    """

    filter: str = "d3"
    coarsest_level: int = 3
    log_domain: bool = True
    span_T: Optional[float] = None
    sigma_levels: str = "pooled"

    def __post_init__(self):
        pywt_filter(self.filter)
        if self.coarsest_level < 0:
            raise UsageError("coarsest_level must be non-negative")
        if self.span_T is not None and not self.span_T > 0:
            raise UsageError("span_T must be positive")
        if self.sigma_levels not in ("pooled", "finest"):
            raise UsageError("sigma_levels must be 'pooled' or 'finest'")


@dataclass
class DwtCoefficients:
    """Father coefficients at ``coarsest_level`` and details for levels ``l0..eta-1``.

    ``details[k]`` holds level ``coarsest_level + k`` (``2**level`` values).
    """

    father: np.ndarray
    details: List[np.ndarray]
    coarsest_level: int

    @property
    def finest(self) -> np.ndarray:
        return self.details[-1]

    def level(self, level: int) -> np.ndarray:
        return self.details[level - self.coarsest_level]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.father] + list(self.details))


def _dyadic_exponent(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise UsageError(f"length {n} is not a power of two")
    return n.bit_length() - 1


def dwt(signal, filter: str = "d3", coarsest_level: int = 3) -> DwtCoefficients:
    """Periodic orthonormal DWT down to ``coarsest_level``."""
    x = np.array(signal, dtype=float)
    eta = _dyadic_exponent(x.size)
    if eta < coarsest_level + 1:
        raise UsageError(f"length {x.size} too short for coarsest level {coarsest_level}")
    with warnings.catch_warnings():
        # deep decompositions with long filters wrap around; periodization stays orthonormal
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec(x, pywt_filter(filter), mode="periodization",
                              level=eta - coarsest_level)
    return DwtCoefficients(coeffs[0], coeffs[1:], coarsest_level)


def idwt(coeffs: DwtCoefficients, filter: str = "d3") -> np.ndarray:
    return pywt.waverec([coeffs.father] + list(coeffs.details), pywt_filter(filter),
                        mode="periodization")


def mad_sigma(details) -> float:
    """Median absolute deviation scaled to a Gaussian standard deviation."""
    x = np.asarray(details, dtype=float).ravel()
    if x.size == 0:
        raise UsageError("mad_sigma needs at least one value")
    return float(np.median(np.abs(x - np.median(x))) / MAD_CONSTANT)


def soft_threshold(x, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def _noise_sigma(coeffs: DwtCoefficients, how: str) -> float:
    if how == "finest":
        return mad_sigma(coeffs.finest)
    first = max(POOLED_FROM_LEVEL, coeffs.coarsest_level)
    pooled = [d for k, d in enumerate(coeffs.details) if coeffs.coarsest_level + k >= first]
    return mad_sigma(np.concatenate(pooled))


def smooth_row(row, cfg: ShrinkConfig, span: float) -> np.ndarray:
    """Shrinkage-smooth one scale row."""
    x = np.asarray(row, dtype=float)
    if cfg.log_domain:
        floor = FLOOR_RELATIVE * x.max() if x.max() > 0 else FLOOR_RELATIVE
        x = np.log(np.maximum(x, floor))
    coeffs = dwt(x, cfg.filter, cfg.coarsest_level)
    lam = _noise_sigma(coeffs, cfg.sigma_levels) * math.log(span)
    coeffs.details = [soft_threshold(d, lam) for d in coeffs.details]
    y = idwt(coeffs, cfg.filter)
    return np.exp(y) if cfg.log_domain else y


def smooth_periodogram(pgram: ScaleTimeField, cfg: Optional[ShrinkConfig] = None) -> ScaleTimeField:
    """Smooth every scale row of a periodogram independently.

    Without the log transform the reconstruction can dip below zero; such
    entries are clipped to 0 so the result remains a valid periodogram.
    """
    cfg = cfg or ShrinkConfig()
    pgram.require(Role.PERIODOGRAM)
    _dyadic_exponent(pgram.locations.size)
    span = cfg.span_T if cfg.span_T is not None else pgram.locations.span
    if not span > 1:
        warnings.warn(f"threshold sigma*ln(T) is not positive for T={span:g}; no shrinkage",
                      RuntimeWarning, stacklevel=2)
    out = np.empty(pgram.shape)
    for i, row in enumerate(pgram.data):
        out[i] = smooth_row(row, cfg, max(span, 1.0))
    if not cfg.log_domain:
        out = np.maximum(out, 0.0)
    return pgram.replace(data=out, role=Role.SMOOTHED_PERIODOGRAM)
