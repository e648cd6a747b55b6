"""Command-line interface.

Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
malformed input data, 1 for any other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acv import default_lags, lag_range, local_autocorrelation, local_autocovariance, local_variance
from .errors import ClswpError, ConfigError, DataError, DomainError, UsageError
from .fields import Role, ScaleGrid
from .invert import IstaConfig, ista_estimate, mercer_invert, parse_schedule, resolve_schedule
from .io import ensure_dir, read_field, read_series, write_acv, write_field, write_matrix, write_series
from .kernels import WaveletKind, kernel_matrix, kernel_table
from .pipeline import PipelineConfig, group_by_times, grouped_periodogram, run_pipeline
from .shrink import ShrinkConfig, smooth_periodogram
from .simulate import (SAMPLING_SCHEMES, SimConfig, clswp_batch, get_spectrum, haar_ma_batch,
                       tabulated, white_noise_batch)
from .transform import TimeSeries

log = logging.getLogger("clswp")

WAVELETS = [k.value for k in WaveletKind]


def _triple(text: str, what: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{what} must look like min:max:count, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"{what} must look like min:max:count, got {text!r}") from None


def _read_spectrum(path):
    # unconstrained (e.g. mercer) estimates may hold negative values
    spec = read_field(path, Role.SPECTRUM_UNCONSTRAINED)
    return spec.replace(role=Role.SPECTRUM) if spec.data.min() >= 0 else spec


def cmd_simulate(args):
    cfg = SimConfig(n=args.n, span=args.span, sampling=args.sampling, seed=args.seed,
                    du_sim=args.du_sim, dv_sim=args.dv_sim,
                    u_range=(args.umin, args.umax) if args.umin is not None else None)
    times = cfg.sample_times()
    if args.process == "white-noise":
        values = white_noise_batch(args.sigma, times, args.replicates, args.seed)
    elif args.process == "haar-ma":
        values = haar_ma_batch(args.alpha, times, args.replicates, args.seed)
    else:
        if not args.spectrum:
            raise ConfigError("--process clswp needs --spectrum")
        path = Path(args.spectrum)
        spec = tabulated(read_field(path, Role.SPECTRUM)) if path.suffix == ".csv" \
            else get_spectrum(args.spectrum)
        values = clswp_batch(spec, args.wavelet, times, args.replicates, cfg)
    out = ensure_dir(args.output)
    for k, v in enumerate(values):
        write_series(out / f"rep_{k:04d}.csv", TimeSeries(times, v))
    log.info("wrote %d replicate(s) to %s", len(values), out)


def cmd_periodogram(args):
    umin, umax, m_u = _triple(args.scales, "--scales")
    grid = ScaleGrid.linspace(umin, umax, m_u)
    series = []
    for path in args.input:
        s, dropped = read_series(path)
        if dropped:
            log.warning("%s: dropped %d row(s) with missing values", path, dropped)
        series.append(s)
    pgram = grouped_periodogram(group_by_times(series), grid, args.locations, args.wavelet,
                                args.boundary)
    low = int(np.sum(pgram.coverage < 3))
    if low:
        log.warning("%d cell(s) have fewer than 3 samples in their support window", low)
    write_field(args.output, pgram)


def cmd_smooth(args):
    pgram = read_field(args.input, Role.PERIODOGRAM)
    cfg = ShrinkConfig(filter=args.filter, coarsest_level=args.coarsest,
                       log_domain=not args.no_log, span_T=args.span_T,
                       sigma_levels=args.sigma_levels)
    write_field(args.output, smooth_periodogram(pgram, cfg))


def cmd_estimate(args):
    beta = read_field(args.input, Role.SMOOTHED_PERIODOGRAM)
    K = kernel_matrix(args.wavelet, beta.grid)
    report = {"method": args.method}
    if args.method == "mercer":
        spec = mercer_invert(beta, K, args.cutoff)
    else:
        auto = args.mu == "auto"
        try:
            mu = None if auto else float(args.mu)
        except ValueError:
            raise ConfigError(f"--mu must be 'auto' or a number, got {args.mu!r}") from None
        cfg = IstaConfig(mu=mu, mu_rule="mad_auto" if auto else "fixed",
                         schedule=resolve_schedule(parse_schedule(args.schedule), beta.grid),
                         init=args.init, tol=args.tol, filter=args.filter)
        spec, ista = ista_estimate(beta, K, cfg)
        report.update(ista.to_dict())
        report["locations"] = beta.locations.locations.tolist()
    write_field(args.output, spec)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")


def cmd_acv(args):
    spec = _read_spectrum(args.input)
    lags = default_lags(spec.grid) if args.lags is None else lag_range(*_triple(args.lags, "--lags"))
    acv = local_autocovariance(spec, args.wavelet, lags)
    if args.normalize:
        acv = local_autocorrelation(acv, local_variance(spec))
    write_acv(args.output, acv)


def cmd_kernels(args):
    rows, cols, values = kernel_table(args.kind, args.table, args.umin, args.umax, args.n)
    write_matrix(args.output or sys.stdout, rows, cols, values)


def cmd_pipeline(args):
    cfg = PipelineConfig.from_json(args.config)
    report = run_pipeline(cfg, args.output)
    log.info("pipeline finished in %.2f s", sum(report["stage_seconds"].values()))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clswp",
        description="Wavelet spectral estimation for irregularly sampled locally stationary series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate replicate series with a known spectrum")
    p.add_argument("--process", choices=["haar-ma", "white-noise", "clswp"], required=True)
    p.add_argument("--spectrum", help="built-in spectrum name or spectrum CSV (clswp only)")
    p.add_argument("--wavelet", choices=WAVELETS, default="haar")
    p.add_argument("--sigma", type=float, default=1.0, help="white-noise standard deviation")
    p.add_argument("--alpha", type=float, default=2.0, help="Haar MA scale")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--span", type=float, default=1023.0)
    p.add_argument("--sampling", choices=SAMPLING_SCHEMES, default="regular")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--du-sim", type=float, help="scale step of the simulation basis")
    p.add_argument("--dv-sim", type=float, help="location step of the simulation basis")
    p.add_argument("--umin", type=float, help="smallest simulated scale (unbounded spectra)")
    p.add_argument("--umax", type=float, help="largest simulated scale (unbounded spectra)")
    p.add_argument("--output", required=True, help="output directory for rep_<k>.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("periodogram", help="averaged raw wavelet periodogram of replicate series")
    p.add_argument("--input", nargs="+", required=True, help="time,value CSV file(s)")
    p.add_argument("--wavelet", choices=WAVELETS, default="haar")
    p.add_argument("--scales", required=True, help="umin:umax:count")
    p.add_argument("--locations", type=int, required=True)
    p.add_argument("--boundary", choices=["none", "symmetric"], default="none")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_periodogram)

    p = sub.add_parser("smooth", help="wavelet-shrinkage smoothing of a periodogram")
    p.add_argument("--input", required=True)
    p.add_argument("--filter", default="d3", help="d2, d3, d4, d10, la4, ...")
    p.add_argument("--coarsest", type=int, default=3)
    p.add_argument("--no-log", action="store_true", help="smooth the periodogram itself")
    p.add_argument("--span-T", type=float, help="data span in the threshold (default: location span)")
    p.add_argument("--sigma-levels", choices=["pooled", "finest"], default="pooled")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("estimate", help="spectrum from a (smoothed) periodogram")
    p.add_argument("--input", required=True)
    p.add_argument("--wavelet", choices=WAVELETS, default="haar")
    p.add_argument("--method", choices=["ista", "mercer"], default="ista")
    p.add_argument("--mu", default="auto", help="'auto' or a non-negative number")
    p.add_argument("--schedule", default="full:1000", help="e.g. full:100,15:250,4:100")
    p.add_argument("--init", choices=["periodogram", "zero"], default="periodogram")
    p.add_argument("--tol", type=float, help="early stop on sup-norm change")
    p.add_argument("--filter", default="d3", help="filter for --mu auto")
    p.add_argument("--cutoff", type=float, help="mercer: keep modes with eigenvalue^2 above this")
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="JSON report path")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("acv", help="local autocovariance from a spectrum")
    p.add_argument("--input", required=True)
    p.add_argument("--wavelet", choices=WAVELETS, default="haar")
    p.add_argument("--lags", help="min:max:count (default -2umax..2umax at du/2)")
    p.add_argument("--normalize", action="store_true", help="emit the autocorrelation")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_acv)

    p = sub.add_parser("kernels", help="tabulate autocorrelation wavelets or inner product kernels")
    p.add_argument("--kind", choices=WAVELETS, required=True)
    p.add_argument("--table", choices=["acw", "ipk"], required=True)
    p.add_argument("--umin", type=float, required=True)
    p.add_argument("--umax", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--output", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("pipeline", help="run every stage from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="override the config's output directory")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="clswp: %(levelname)s: %(message)s")
    try:
        args.func(args)
    except DataError as exc:
        print(f"clswp: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"clswp: {exc}", file=sys.stderr)
        return 3
    except (UsageError, DomainError) as exc:
        print(f"clswp: config error: {exc}", file=sys.stderr)
        return 2
    except ClswpError as exc:
        print(f"clswp: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
