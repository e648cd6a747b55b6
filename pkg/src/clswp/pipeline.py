"""End-to-end estimation: periodogram -> smoothing -> inversion -> autocovariance.

A run is described by :class:`PipelineConfig`, usually loaded from JSON::

    {
      "wavelet": "haar",
      "scales": {"umin": 1, "umax": 20, "count": 40},
      "locations": 256,
      "boundary": "none",
      "smooth": {"enabled": true, "filter": "d3", "coarsest_level": 3,
                 "log_domain": true, "sigma_levels": "pooled"},
      "estimate": {"method": "ista", "mu": "auto", "schedule": "full:1000",
                   "init": "periodogram", "tol": null, "cutoff": null},
      "acv": {"lags": null, "normalize": false},
      "replicates": ["rep_0000.csv", "rep_0001.csv"],
      "simulate": null,
      "output": "out"
    }

Either ``replicates`` (CSV paths, relative to the config file) or a
``simulate`` block is required. The simulate block takes ``process``
(``white-noise``, ``haar-ma`` or ``clswp``), ``sigma``, ``alpha``,
``spectrum`` (built-in name or spectrum CSV), ``n``, ``span``, ``sampling``,
``seed``, ``replicates``, ``du_sim`` and ``dv_sim``. ``acv.lags`` is null
for the default lag grid or ``[min, max, count]``.
"""
from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .acv import default_lags, lag_range, local_autocorrelation, local_autocovariance, local_variance
from .errors import ConfigError, UsageError
from .fields import LocationGrid, Role, ScaleGrid, ScaleTimeField
from .invert import IstaConfig, ista_estimate, mercer_invert, parse_schedule, resolve_schedule
from .io import ensure_dir, read_field, read_series, write_acv, write_field
from .kernels import WaveletKind, kernel_matrix
from .shrink import ShrinkConfig, smooth_periodogram
from .simulate import (SAMPLING_SCHEMES, SimConfig, clswp_batch, get_spectrum, haar_ma_batch,
                       tabulated, white_noise_batch)
from .transform import BoundaryRule, mean_periodogram

PROCESSES = ("white-noise", "haar-ma", "clswp")


@dataclass
class SimulateBlock:
    process: str = "white-noise"
    sigma: float = 1.0
    alpha: float = 2.0
    spectrum: Optional[str] = None
    n: int = 1024
    span: float = 1023.0
    sampling: str = "regular"
    seed: int = 0
    replicates: int = 1
    du_sim: Optional[float] = None
    dv_sim: Optional[float] = None

    def __post_init__(self):
        if self.process not in PROCESSES:
            raise ConfigError(f"unknown process {self.process!r}; expected one of {PROCESSES}")
        if self.sampling not in SAMPLING_SCHEMES:
            raise ConfigError(f"unknown sampling {self.sampling!r}")
        if self.replicates < 1:
            raise ConfigError("simulate.replicates must be at least 1")
        if self.process == "clswp" and not self.spectrum:
            raise ConfigError("process 'clswp' needs a spectrum")


@dataclass
class PipelineConfig:
    wavelet: str = "haar"
    umin: float = 1.0
    umax: float = 20.0
    scale_count: int = 40
    locations: int = 256
    boundary: str = "none"
    smooth: bool = True
    shrink: ShrinkConfig = field(default_factory=ShrinkConfig)
    method: str = "ista"
    mu: object = "auto"
    schedule: str = "full:1000"
    init: str = "periodogram"
    tol: Optional[float] = None
    cutoff: Optional[float] = None
    lags: Optional[list] = None
    normalize: bool = False
    replicates: List[str] = field(default_factory=list)
    simulate: Optional[SimulateBlock] = None
    output: str = "out"
    base_dir: str = "."

    def __post_init__(self):
        try:
            WaveletKind.parse(self.wavelet)
            BoundaryRule(self.boundary)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not (0 < self.umin < self.umax) or self.scale_count < 2:
            raise ConfigError("scale grid needs 0 < umin < umax and at least two scales")
        if self.locations < 2:
            raise ConfigError("need at least two locations")
        if self.smooth and self.locations & (self.locations - 1):
            raise ConfigError("smoothing needs a power-of-two number of locations")
        if self.method not in ("ista", "mercer"):
            raise ConfigError(f"unknown method {self.method!r}")
        if not (self.mu == "auto" or isinstance(self.mu, (int, float)) and self.mu >= 0):
            raise ConfigError("mu must be 'auto' or a non-negative number")
        if self.mu == "auto" and self.locations & (self.locations - 1):
            raise ConfigError("mu 'auto' needs a power-of-two number of locations")
        try:
            parse_schedule(self.schedule)
        except UsageError as exc:
            raise ConfigError(str(exc)) from None
        if self.lags is not None and len(self.lags) != 3:
            raise ConfigError("acv.lags must be [min, max, count]")
        if not self.replicates and self.simulate is None:
            raise ConfigError("no input: give a non-empty replicate list or a simulate block")
        if self.replicates and self.simulate is not None:
            raise ConfigError("give either replicates or simulate, not both")

    @property
    def grid(self) -> ScaleGrid:
        return ScaleGrid.linspace(self.umin, self.umax, self.scale_count)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "PipelineConfig":
        raw = dict(raw)
        known = {"wavelet", "scales", "locations", "boundary", "smooth", "estimate", "acv",
                 "replicates", "simulate", "output"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {"base_dir": str(base_dir)}
        for key in ("wavelet", "locations", "boundary", "output"):
            if key in raw:
                kw[key] = raw[key]
        scales = raw.get("scales", {})
        for src, dst in (("umin", "umin"), ("umax", "umax"), ("count", "scale_count")):
            if src in scales:
                kw[dst] = scales[src]
        smooth = dict(raw.get("smooth") or {})
        kw["smooth"] = bool(smooth.pop("enabled", True))
        try:
            kw["shrink"] = ShrinkConfig(**smooth)
        except (TypeError, UsageError) as exc:
            raise ConfigError(f"smooth: {exc}") from None
        est = dict(raw.get("estimate") or {})
        for key in ("method", "mu", "schedule", "init", "tol", "cutoff"):
            if key in est:
                kw[key] = est.pop(key)
        if est:
            raise ConfigError(f"unknown estimate keys: {sorted(est)}")
        acv = dict(raw.get("acv") or {})
        kw["lags"] = acv.pop("lags", None)
        kw["normalize"] = bool(acv.pop("normalize", False))
        if acv:
            raise ConfigError(f"unknown acv keys: {sorted(acv)}")
        reps = raw.get("replicates") or []
        if isinstance(reps, str):
            reps = [reps]
        kw["replicates"] = list(reps)
        if raw.get("simulate") is not None:
            try:
                kw["simulate"] = SimulateBlock(**raw["simulate"])
            except TypeError as exc:
                raise ConfigError(f"simulate: {exc}") from None
        if "replicates" in raw and not kw["replicates"] and "simulate" not in raw:
            raise ConfigError("replicate list is empty")
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _resolve(cfg: PipelineConfig, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(cfg.base_dir) / p


def _load_replicates(cfg: PipelineConfig):
    """Returns a list of (times, values-batch) groups sharing sample times."""
    info = {}
    if cfg.simulate is not None:
        sim = cfg.simulate
        sc = SimConfig(n=sim.n, span=sim.span, sampling=sim.sampling, seed=sim.seed,
                       du_sim=sim.du_sim or cfg.grid.du / 2, dv_sim=sim.dv_sim)
        times = sc.sample_times()
        if sim.process == "white-noise":
            values = white_noise_batch(sim.sigma, times, sim.replicates, sim.seed)
        elif sim.process == "haar-ma":
            values = haar_ma_batch(sim.alpha, times, sim.replicates, sim.seed)
        else:
            spec = _spectrum(cfg, sim.spectrum)
            values = clswp_batch(spec, cfg.wavelet, times, sim.replicates, sc)
        info["seed"] = sim.seed
        return [(times, values)], info
    series = []
    dropped = 0
    for name in cfg.replicates:
        s, d = read_series(_resolve(cfg, name))
        dropped += d
        series.append(s)
    info["dropped_rows"] = dropped
    return group_by_times(series), info


def group_by_times(series) -> list:
    """Group series with identical sample times into ``(times, values (R, n))``.

    Groups keep the order of first appearance.
    """
    groups = {}
    for s in series:
        groups.setdefault(s.times.tobytes(), (s.times, []))[1].append(s.values)
    return [(t, np.vstack(v)) for t, v in groups.values()]


def _spectrum(cfg: PipelineConfig, name: str):
    path = _resolve(cfg, name)
    if path.suffix == ".csv" and path.exists():
        return tabulated(read_field(path, Role.SPECTRUM))
    try:
        return get_spectrum(name)
    except UsageError as exc:
        raise ConfigError(str(exc)) from None


def grouped_periodogram(groups, grid: ScaleGrid, count: int, kind, boundary) -> ScaleTimeField:
    """Average periodogram of replicate groups, each ``(times, values (R, n))``.

    Locations span from the earliest to the latest sample time. Coverage is
    the smallest per-cell sample count over groups.
    """
    if len(groups) == 1:
        times, values = groups[0]
        locs = LocationGrid.spanning(times[0], times[-1], count)
        return mean_periodogram(times, values, grid, locs, kind, boundary)
    t0 = min(g[0][0] for g in groups)
    t1 = max(g[0][-1] for g in groups)
    locs = LocationGrid.spanning(t0, t1, count)
    total = np.zeros((grid.size, locs.size))
    n = 0
    coverage = None
    for times, values in groups:
        p = mean_periodogram(times, values, grid, locs, kind, boundary)
        total += p.data * values.shape[0]
        n += values.shape[0]
        coverage = p.coverage if coverage is None else np.minimum(coverage, p.coverage)
    return ScaleTimeField(Role.PERIODOGRAM, grid, locs, total / n, coverage=coverage)


def ista_config(cfg: PipelineConfig, grid: ScaleGrid) -> IstaConfig:
    auto = cfg.mu == "auto"
    return IstaConfig(mu=None if auto else float(cfg.mu),
                      schedule=resolve_schedule(parse_schedule(cfg.schedule), grid),
                      mu_rule="mad_auto" if auto else "fixed", init=cfg.init, tol=cfg.tol,
                      filter=cfg.shrink.filter)


def run_pipeline(cfg: PipelineConfig, output: Optional[str] = None) -> dict:
    """Run every stage and write the artifacts; returns the report dictionary.

    Writes ``pgram.csv``, ``spgram.csv`` (when smoothing), ``spec.csv``,
    ``acv.csv`` and ``report.json`` to the output directory.
    """
    out = ensure_dir(_resolve(cfg, output or cfg.output))
    timings = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    groups, info = _load_replicates(cfg)
    lap("load")
    pgram = grouped_periodogram(groups, cfg.grid, cfg.locations, cfg.wavelet, cfg.boundary)
    write_field(out / "pgram.csv", pgram)
    lap("periodogram")
    beta = pgram
    if cfg.smooth:
        beta = smooth_periodogram(pgram, cfg.shrink)
        write_field(out / "spgram.csv", beta)
        lap("smooth")
    K = kernel_matrix(cfg.wavelet, cfg.grid)
    ista_report = None
    if cfg.method == "ista":
        spec, ista_report = ista_estimate(beta, K, ista_config(cfg, cfg.grid))
    else:
        spec = mercer_invert(beta, K, cfg.cutoff)
    write_field(out / "spec.csv", spec)
    lap("estimate")
    lags = default_lags(cfg.grid) if cfg.lags is None else lag_range(*cfg.lags)
    acv = local_autocovariance(spec, cfg.wavelet, lags)
    if cfg.normalize:
        acv = local_autocorrelation(acv, local_variance(spec))
    write_acv(out / "acv.csv", acv)
    lap("acv")

    import pywt
    import scipy
    report = {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "versions": {"clswp": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "pywavelets": pywt.__version__, "python": platform.python_version()},
        "seeds": {"simulate": info.get("seed")},
        "replicates": int(sum(v.shape[0] for _, v in groups)),
        "dropped_rows": info.get("dropped_rows", 0),
        "low_coverage_cells": int(np.sum(pgram.coverage < 3)) if pgram.coverage is not None else 0,
        "stage_seconds": timings,
    }
    if ista_report is not None:
        report["ista"] = ista_report.to_dict()
    (out / "report.json").write_text(json.dumps(report, indent=2, default=str) + "\n")
    return report
