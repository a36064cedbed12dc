"""Iterative solvers for the polarization system and homogenized output.

Both solvers act on the masked subspace and measure convergence by the
relative system residual in the h^d-weighted norm.  CG is the plain method
with zero initial guess and no preconditioner; its coercivity contract holds
whenever the reference medium is softer than every phase.  The fixed-point
scheme is the classic polarization update tau <- (A - A0)(p - Gamma0*tau);
no a priori contraction condition is enforced, but a residual that grows
more than tenfold over ten iterations raises DivergenceError (the usual cure
is a reference between the extreme phase moduli).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .grid import VoxelField
from .green import GreenVariant
from .operator import SystemOperator, apply_green_field

SOLVERS = ("cg", "fixed-point")


class DivergenceError(RuntimeError):
    """Fixed-point residual blew up; the reference medium does not contract."""

    def __init__(self, iteration: int, residual: float):
        super().__init__(
            "fixed-point residual grew past %.3e by iteration %d; pick a "
            "reference medium between the extreme phase moduli" %
            (residual, iteration))
        self.iteration = iteration
        self.residual = residual


@dataclass
class SolveConfig:
    solver: str = "cg"
    rel_tol: float = 1e-5
    max_iter: int = 1000

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError("unknown solver %r; pick one of %s"
                             % (self.solver, SOLVERS))
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class SolveReport:
    n: int
    variant: str
    solver: str
    iterations: int
    converged: bool
    residuals: list
    wall_time: float
    column: np.ndarray  # homogenized action on the loading

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def homogenized_column(tau: VoxelField, p, ref) -> np.ndarray:
    """A0 p plus the cell mean of the polarization (the homogenized action)."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    return ref.tensor(tau.grid.d) @ p + tau.mean()


def _dot(grid, a: np.ndarray, b: np.ndarray) -> float:
    # h^d-weighted product on raw arrays; np.sum is pairwise, deterministic
    return grid.h ** grid.d * float(np.sum(a * b))


def _report(op, solver, iterations, converged, residuals, t0, tau, p):
    column = homogenized_column(tau, p, op.green.ref)
    return SolveReport(op.grid.n, op.green.name, solver, iterations, converged,
                       residuals, time.perf_counter() - t0, column)


def solve_cg(op: SystemOperator, p, cfg: SolveConfig = None):
    """Conjugate gradients on the masked system; returns (tau, report)."""
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    grid = op.grid
    b = op.rhs(p)
    b_norm = np.sqrt(_dot(grid, b.data, b.data))
    x = np.zeros_like(b.data)
    if b_norm == 0.0:  # empty mask or zero loading: tau = 0 is exact
        tau = VoxelField(grid, op.m, x)
        return tau, _report(op, "cg", 0, True, [], t0, tau, p)
    r = b.data.copy()
    d = r.copy()
    rs = _dot(grid, r, r)
    residuals = []
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        q = op.apply(VoxelField(grid, op.m, d)).data
        alpha = rs / _dot(grid, d, q)
        x += alpha * d
        r -= alpha * q
        rs_new = _dot(grid, r, r)
        if not np.isfinite(rs_new):
            raise FloatingPointError("CG iterates lost finiteness; the "
                                     "operator is not positive definite here")
        rel = np.sqrt(rs_new) / b_norm
        residuals.append(rel)
        if rel <= cfg.rel_tol:
            converged = True
            break
        d = r + (rs_new / rs) * d
        rs = rs_new
    tau = VoxelField(grid, op.m, x)
    return tau, _report(op, "cg", it, converged, residuals, t0, tau, p)


def solve_fixed_point(op: SystemOperator, p, cfg: SolveConfig = None):
    """Basic polarization iteration; returns (tau, report).

    Each pass reuses the single Green convolution both for the residual of
    the current iterate and for the next update, so the per-iteration cost
    matches CG.
    """
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    grid = op.grid
    mask = op.coeff.mask
    inv = op.coeff.inverse_table()  # needs per-voxel (A^h - A0)
    b = op.rhs(p)
    b_norm = np.sqrt(_dot(grid, b.data, b.data))
    tau = VoxelField.zeros(grid, op.m)
    if b_norm == 0.0:
        return tau, _report(op, "fixed-point", 0, True, [], t0, tau, p)
    residuals = []
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        g = op.apply_green(tau).data
        res = op.coeff.apply(tau).data + g - b.data
        res[~mask] = 0.0
        rel = np.sqrt(_dot(grid, res, res)) / b_norm
        if not np.isfinite(rel):
            raise FloatingPointError("fixed-point iterates lost finiteness")
        residuals.append(rel)
        if rel <= cfg.rel_tol:
            converged = True
            break
        if len(residuals) > 10 and residuals[-1] > 10.0 * residuals[-11]:
            raise DivergenceError(it, rel)
        new = np.einsum("...ij,...j->...i", inv, b.data - g)
        new[~mask] = 0.0
        tau = VoxelField(grid, op.m, new)
    return tau, _report(op, "fixed-point", it, converged, residuals, t0, tau, p)


def solve(op: SystemOperator, p, cfg: SolveConfig = None):
    cfg = cfg or SolveConfig()
    if cfg.solver == "cg":
        return solve_cg(op, p, cfg)
    return solve_fixed_point(op, p, cfg)


@dataclass
class HomogenizedTensor:
    physics: str
    matrix: np.ndarray  # symmetrized (m, m)
    asymmetry: float    # max |A - A^T| before symmetrization
    converged: bool
    reports: list = field(default_factory=list)

    def project(self, p) -> float:
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        return float(p @ self.matrix @ p)


def homogenized_tensor(op: SystemOperator, cfg: SolveConfig = None) -> HomogenizedTensor:
    """Solve one corrector problem per canonical loading and assemble columns."""
    cfg = cfg or SolveConfig()
    columns = []
    reports = []
    for j in range(op.m):
        p = np.zeros(op.m)
        p[j] = 1.0
        _, report = solve(op, p, cfg)
        columns.append(report.column)
        reports.append(report)
    raw = np.stack(columns, axis=1)
    asymmetry = float(np.max(np.abs(raw - raw.T)))
    matrix = (raw + raw.T) / 2.0
    converged = all(r.converged for r in reports)
    return HomogenizedTensor(op.coeff.physics, matrix, asymmetry, converged,
                             reports)


def reconstruct_strain(tau: VoxelField, p, green: GreenVariant,
                       threads: int = 1) -> VoxelField:
    """Per-voxel loading-plus-fluctuation estimate p - Gamma0*tau."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape[0] != tau.m:
        raise ValueError("loading has %d components, field has %d"
                         % (p.shape[0], tau.m))
    conv = apply_green_field(tau, green, threads)
    return VoxelField(tau.grid, tau.m, p - conv.data)
