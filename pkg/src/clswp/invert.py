"""Spectrum estimation from a periodogram: solve ``beta = K S`` for ``S >= 0``.

The main solver is iterative soft-thresholding with the operator normalized
by its spectral norm and a one-sided shrink that enforces non-negativity.
Stages of the schedule may restrict the update to the finest ``i`` scales,
which converges much faster for fine-scale structure. A truncated
eigendecomposition inverse is provided as a fast, unconstrained baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ._parallel import map_blocks
from .errors import UsageError
from .fields import Role, ScaleGrid, ScaleTimeField
from .kernels import KernelMatrix
from .shrink import dwt, mad_sigma

MERCER_CUTOFF_RELATIVE = 1e-8

Schedule = List[Tuple[Optional[int], int]]


def parse_schedule(text: str) -> List[Tuple[Optional[float], int]]:
    """Parse ``"full:100,15:250,4:100"`` into ``[(None, 100), (15.0, 250), (4.0, 100)]``.

    The first field of each stage is the largest scale updated, or ``full``.
    """
    stages = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            upto, count = part.split(":")
            count = int(count)
            upto = None if upto.strip().lower() == "full" else float(upto)
        except ValueError:
            raise UsageError(f"bad schedule stage {part!r}; expected '<full|scale>:<iterations>'") from None
        stages.append((upto, count))
    if not stages:
        raise UsageError("empty schedule")
    return stages


def resolve_schedule(stages, grid: ScaleGrid) -> Schedule:
    """Convert scale limits to row counts on ``grid``."""
    out = []
    for upto, count in stages:
        if upto is None:
            out.append((None, int(count)))
        else:
            i = grid.index_upto(upto)
            out.append((None if i >= grid.size else i, int(count)))
    return out


@dataclass
class IstaConfig:
    """Settings for :func:`ista_estimate`.

    Parameters
    ----------
    mu : float or array, optional
        Regularization weight per scale (shape ``(M_u,)``) or per cell
        (``(M_u, M_v)``); a scalar applies everywhere. Ignored for
        ``mu_rule="mad_auto"``.
    schedule : list of (int or None, int)
        Stages of ``(active_rows, iterations)``; ``None`` means all rows.
        Active row counts must not increase from one stage to the next.
    mu_rule : {"fixed", "mad_auto"}
    init : {"periodogram", "zero"}
    tol : float, optional
        Stop a stage early once successive iterates differ by less than
        this in sup norm (all locations of a block must meet it).
    filter : str
        DWT filter for ``mad_auto``.
    """

    mu: Union[float, np.ndarray, None] = 0.0
    schedule: Schedule = field(default_factory=lambda: [(None, 1000)])
    mu_rule: str = "fixed"
    init: str = "periodogram"
    tol: Optional[float] = None
    filter: str = "d3"

    def __post_init__(self):
        if self.mu_rule not in ("fixed", "mad_auto"):
            raise UsageError(f"unknown mu_rule {self.mu_rule!r}")
        if self.init not in ("periodogram", "zero"):
            raise UsageError(f"unknown init {self.init!r}")
        if not self.schedule:
            raise UsageError("schedule must contain at least one stage")
        previous = None
        for rows, count in self.schedule:
            if count < 0 or (rows is not None and rows < 1):
                raise UsageError(f"invalid schedule stage {(rows, count)}")
            if rows is not None and previous is not None and rows > previous or (
                    rows is None and previous is not None):
                raise UsageError("schedule restrictions must be non-increasing (full grid first)")
            previous = rows if rows is not None else previous
        if self.mu is not None and np.any(np.asarray(self.mu, dtype=float) < 0):
            raise UsageError("mu must be non-negative")


@dataclass
class IstaReport:
    """Per-location diagnostics of an ISTA run.

    ``discrepancy[n, j]`` is ``||K S - beta||^2 / ||K||^2 + sum(mu S)`` at
    location ``j`` after iteration ``n`` (row 0 is the initial value), i.e.
    the objective of the normalized problem that the iteration decreases.
    """

    discrepancy: np.ndarray
    iterations: int
    residual: np.ndarray
    stage_ends: List[int]
    mu: np.ndarray

    @property
    def final_discrepancy(self) -> np.ndarray:
        return self.discrepancy[-1]

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "stage_ends": self.stage_ends,
            "final_discrepancy": self.final_discrepancy.tolist(),
            "residual": self.residual.tolist(),
        }


def _check(beta: ScaleTimeField, K: KernelMatrix) -> None:
    beta.require(Role.PERIODOGRAM, Role.SMOOTHED_PERIODOGRAM)
    if beta.grid != K.grid:
        raise UsageError("periodogram and kernel matrix use different scale grids")


def estimate_mu(beta: ScaleTimeField, cfg: Optional[IstaConfig] = None) -> np.ndarray:
    """Regularization weights: per-scale MAD noise level or the fixed value.

    Returns an array broadcastable against ``beta.data``.
    """
    cfg = cfg or IstaConfig()
    m_u, m_v = beta.shape
    if cfg.mu_rule == "fixed":
        mu = np.asarray(0.0 if cfg.mu is None else cfg.mu, dtype=float)
        if mu.ndim == 0:
            return np.full((m_u, 1), float(mu))
        if mu.shape == (m_u,):
            return mu[:, None].copy()
        if mu.shape == (m_u, m_v):
            return mu.copy()
        raise UsageError(f"mu of shape {mu.shape} does not match the field {beta.shape}")
    if not beta.locations.is_dyadic:
        raise UsageError("mad_auto needs a power-of-two number of locations")
    finest = m_v.bit_length() - 2  # a single decomposition step
    return np.array([[mad_sigma(dwt(row, cfg.filter, finest).finest)] for row in beta.data])


def _shrink(x, half_mu):
    return np.maximum(x - half_mu, 0.0)


def _solve_block(A, beta, S, mu, schedule, norms, full_norm, tol):
    """Run every stage on a block of columns. Returns (S, trace, stage ends)."""
    L2 = full_norm ** 2

    def objective(S):
        r = A @ S - beta
        return np.einsum("ij,ij->j", r, r) / L2 + np.sum(mu * S, axis=0)

    half = 0.5 * mu
    trace = [objective(S)]
    ends = []
    for (rows, count), norm in zip(schedule, norms):
        step = 1.0 / norm ** 2
        active = slice(None) if rows is None else slice(0, rows)
        # restricted stages solve the leading block against beta[:i], with the
        # frozen coarse rows moved to the data side; ||A[:i, :i]||^2 is then
        # exactly the Lipschitz constant of the gradient
        A_act = A[active, active]
        A_rows = A[active]
        b_act = beta[active]
        half_act = half[active] if half.shape[0] > 1 else half
        for _ in range(count):
            grad = A_act @ (A_rows @ S - b_act)
            new = _shrink(S[active] - step * grad, half_act)
            delta = np.max(np.abs(new - S[active])) if tol is not None else None
            S[active] = new
            trace.append(objective(S))
            if tol is not None and delta < tol:
                break
        ends.append(len(trace) - 1)
    return S, np.array(trace), ends


def ista_estimate(beta: ScaleTimeField, K: KernelMatrix, cfg: Optional[IstaConfig] = None):
    """Non-negative spectrum estimate by normalized iterative soft-thresholding.

    Every location is solved independently:

        S <- shrink(S - K (K S - beta) / ||K||^2),  shrink(x) = max(x - mu/2, 0).

    A stage restricted to the first ``i`` scales updates only those rows.
    It iterates on ``beta[:i] - K[:i, i:] S[i:] = K[:i, :i] S[:i]`` with the
    step ``1 / ||K[:i, :i]||^2``; the remaining rows keep their current values.

    Returns
    -------
    spectrum : ScaleTimeField
    report : IstaReport
    """
    cfg = cfg or IstaConfig()
    _check(beta, K)
    mu = estimate_mu(beta, cfg)
    A = np.asarray(K.entries)
    b = np.asarray(beta.data)
    if K.norm == 0:
        raise UsageError("kernel matrix is zero")
    norms = [K.norm if rows is None else K.block_norm(rows) for rows, _ in cfg.schedule]
    S0 = b.copy() if cfg.init == "periodogram" else np.zeros_like(b)

    def run(cols: slice):
        m = mu[:, cols] if mu.shape[1] > 1 else mu
        return _solve_block(A, b[:, cols], S0[:, cols].copy(), m, cfg.schedule, norms,
                            K.norm, cfg.tol)

    results = map_blocks(run, b.shape[1])
    S = np.concatenate([r[0] for r in results], axis=1)
    # blocks may stop early at different points; pad traces with their last value
    length = max(r[1].shape[0] for r in results)
    traces = [np.vstack([r[1], np.repeat(r[1][-1:], length - r[1].shape[0], axis=0)])
              for r in results]
    trace = np.concatenate(traces, axis=1)
    residual = np.linalg.norm(A @ S - b, axis=0)
    report = IstaReport(discrepancy=trace, iterations=length - 1, residual=residual,
                        stage_ends=results[0][2] if len(results) == 1 else
                        [int(max(r[2][k] for r in results)) for k in range(len(cfg.schedule))],
                        mu=np.broadcast_to(mu, (b.shape[0], mu.shape[1])).copy())
    return beta.replace(data=S, role=Role.SPECTRUM), report


def mercer_invert(beta: ScaleTimeField, K: KernelMatrix, cutoff: Optional[float] = None) -> ScaleTimeField:
    """Truncated eigendecomposition inverse, keeping modes with ``lambda^2 > cutoff``.

    The default cutoff is ``1e-8 * lambda_1^2``. The result is unconstrained
    and may be negative.
    """
    _check(beta, K)
    lam = K.eigenvalues
    if cutoff is None:
        cutoff = MERCER_CUTOFF_RELATIVE * lam[0] ** 2
    if cutoff < 0:
        raise UsageError("cutoff must be non-negative")
    keep = lam ** 2 > cutoff
    phi = K.eigenvectors[:, keep]
    S = phi @ ((phi.T @ beta.data) / lam[keep][:, None])
    return beta.replace(data=S, role=Role.SPECTRUM_UNCONSTRAINED)


def forward_map(spectrum: ScaleTimeField, K: KernelMatrix) -> ScaleTimeField:
    """Expected periodogram ``K S`` of a spectrum, column by column."""
    spectrum.require(Role.SPECTRUM)
    if spectrum.grid != K.grid:
        raise UsageError("spectrum and kernel matrix use different scale grids")
    # an expected periodogram is non-negative; negative entries are discretization noise
    data = np.maximum(K.entries @ spectrum.data, 0.0)
    return spectrum.replace(data=data, role=Role.PERIODOGRAM)
