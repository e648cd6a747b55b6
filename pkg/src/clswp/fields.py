"""Grids and the (scale, location) field container shared by every stage."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import DomainError, UsageError

_UNIFORM_RTOL = 1e-12


def _check_uniform(values: np.ndarray, what: str) -> float:
    steps = np.diff(values)
    if np.any(steps <= 0):
        raise UsageError(f"{what} must be strictly increasing")
    step = (values[-1] - values[0]) / (len(values) - 1)
    if np.max(np.abs(steps - step)) > _UNIFORM_RTOL * max(abs(values[-1]), abs(step)) * 8:
        raise UsageError(f"{what} must be uniformly spaced")
    return float(step)


@dataclass(frozen=True)
class ScaleGrid:
    """Uniform grid of scales ``u_1 < ... < u_M``."""

    scales: np.ndarray

    def __post_init__(self):
        scales = np.asarray(self.scales, dtype=float)
        if scales.ndim != 1 or scales.size < 2:
            raise UsageError("a scale grid needs at least two scales")
        if scales[0] <= 0:
            raise DomainError("scales must be positive")
        _check_uniform(scales, "scales")
        scales.setflags(write=False)
        object.__setattr__(self, "scales", scales)

    @classmethod
    def linspace(cls, umin: float, umax: float, count: int) -> "ScaleGrid":
        return cls(np.linspace(umin, umax, int(count)))

    @property
    def du(self) -> float:
        return float((self.scales[-1] - self.scales[0]) / (self.size - 1))

    @property
    def size(self) -> int:
        return int(self.scales.size)

    def index_upto(self, scale: float) -> int:
        """Number of grid scales that are <= ``scale`` (within rounding)."""
        return int(np.searchsorted(self.scales, scale * (1 + 1e-12), side="right"))

    def nearest(self, scale: float) -> int:
        return int(np.argmin(np.abs(self.scales - scale)))

    def __eq__(self, other):
        return isinstance(other, ScaleGrid) and np.array_equal(self.scales, other.scales)

    def __hash__(self):
        return hash(self.scales.tobytes())


@dataclass(frozen=True)
class LocationGrid:
    """Uniform locations ``v_1 < ... < v_M`` over the span of the data.

    Rescaled time is ``z = (v - origin) / span``; with the usual convention
    ``t_0 = 0`` this is ``v / T``.
    """

    locations: np.ndarray
    origin: float = 0.0
    span: Optional[float] = None

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        if locs.ndim != 1 or locs.size < 2:
            raise UsageError("a location grid needs at least two locations")
        _check_uniform(locs, "locations")
        locs.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        if self.span is None:
            object.__setattr__(self, "span", float(locs[-1] - self.origin))
        if self.span <= 0:
            raise UsageError("location span must be positive")

    @classmethod
    def spanning(cls, start: float, stop: float, count: int) -> "LocationGrid":
        return cls(np.linspace(start, stop, int(count)), origin=float(start),
                   span=float(stop - start))

    @property
    def dv(self) -> float:
        return float((self.locations[-1] - self.locations[0]) / (self.size - 1))

    @property
    def size(self) -> int:
        return int(self.locations.size)

    @property
    def z(self) -> np.ndarray:
        return (self.locations - self.origin) / self.span

    @property
    def is_dyadic(self) -> bool:
        n = self.size
        return n & (n - 1) == 0

    def __eq__(self, other):
        return (isinstance(other, LocationGrid)
                and np.array_equal(self.locations, other.locations)
                and self.origin == other.origin and self.span == other.span)

    def __hash__(self):
        return hash((self.locations.tobytes(), self.origin, self.span))


class Role(str, Enum):
    COEFFICIENTS = "coefficients"
    PERIODOGRAM = "periodogram"
    SMOOTHED_PERIODOGRAM = "smoothed_periodogram"
    SPECTRUM = "spectrum"
    # unconstrained inverse (e.g. spectral cut-off); may hold negative values
    SPECTRUM_UNCONSTRAINED = "spectrum*"


_NONNEGATIVE = {Role.PERIODOGRAM, Role.SMOOTHED_PERIODOGRAM, Role.SPECTRUM}


@dataclass(frozen=True)
class ScaleTimeField:
    """An ``M_u x M_v`` matrix over (scale, location) tagged with its role."""

    role: Role
    grid: ScaleGrid
    locations: LocationGrid
    data: np.ndarray
    coverage: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        role = Role(self.role)
        object.__setattr__(self, "role", role)
        data = np.array(self.data, dtype=float)
        if data.shape != (self.grid.size, self.locations.size):
            raise UsageError(
                f"field shape {data.shape} does not match grids "
                f"({self.grid.size}, {self.locations.size})")
        if role in _NONNEGATIVE and np.any(data < 0):
            raise UsageError(f"{role.value} entries must be non-negative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def replace(self, data=None, role=None) -> "ScaleTimeField":
        return ScaleTimeField(role=self.role if role is None else role,
                              grid=self.grid, locations=self.locations,
                              data=self.data if data is None else data,
                              coverage=self.coverage)

    def require(self, *roles: Role) -> None:
        if self.role not in roles:
            names = ", ".join(r.value for r in roles)
            raise UsageError(f"expected a field with role in ({names}), got {self.role.value}")

    def same_grids(self, other: "ScaleTimeField") -> bool:
        return self.grid == other.grid and self.locations == other.locations
