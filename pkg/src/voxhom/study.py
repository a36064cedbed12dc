"""Verification and experiment harness.

Three concerns live here: the sign-split test-field construction that powers
the constructive stability bound for mixed-sign media, dense-spectrum inf-sup
sweeps over grid sizes, and the measurement tools (self-convergence sweeps
with rate fits, wall-time/efficiency benchmarks).  Everything returns plain
data objects; CSV/figure emission is the io and plots modules' business.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VoxelField, make_grid, weighted_dot, weighted_norm
from .green import make_green
from .microstructure import CoefficientField, Microstructure, build_coefficients
from .operator import SystemOperator, assemble_dense
from .solvers import SolveConfig, solve


class CommutationError(ValueError):
    """A voxel coefficient does not commute with the reference tensor."""


def sign_split(tau: VoxelField, coeff: CoefficientField, ref,
               tol: float = 1e-10):
    """Split tau by the eigen-signs of the voxel contrast; returns (+, -, s).

    Per masked-in voxel the coefficient block K shares eigenvectors with
    A^h - A0 and the eigenvalue signs agree, so projecting tau onto the
    nonnegative/negative eigenspaces of K realizes the split; s = tau+ - tau-
    is the test field whose pairing with tau stays uniformly positive.
    Requires K to commute with A0 per voxel (automatic for isotropic
    references); zero eigenvalues, possible after coarse averaging, are
    assigned to the plus part so tau = tau+ + tau- always holds.
    """
    if tau.grid != coeff.grid or tau.m != coeff.m:
        raise ValueError("field does not match the coefficient space")
    mask = coeff.mask
    if np.any(tau.data[~mask] != 0.0):
        raise ValueError("field must vanish on masked-out voxels")
    a0 = ref.tensor(tau.grid.d)
    blocks = coeff.k_data[mask]
    comm = blocks @ a0 - a0 @ blocks
    scale = np.linalg.norm(blocks, axis=(1, 2)) * np.linalg.norm(a0) + 1e-300
    rel = np.linalg.norm(comm, axis=(1, 2)) / scale
    if rel.size and rel.max() > tol:
        voxel = np.argwhere(mask)[int(np.argmax(rel))]
        raise CommutationError(
            "coefficient at voxel %s does not commute with the reference "
            "(relative residue %.3e)" % (voxel.tolist(), rel.max()))
    w, v = np.linalg.eigh(blocks)
    coords = np.einsum("rij,ri->rj", v, tau.data[mask])
    plus = np.zeros_like(tau.data)
    minus = np.zeros_like(tau.data)
    plus[mask] = np.einsum("rij,rj->ri", v, np.where(w >= 0.0, coords, 0.0))
    minus[mask] = np.einsum("rij,rj->ri", v, np.where(w < 0.0, coords, 0.0))
    t_plus = VoxelField(tau.grid, tau.m, plus)
    t_minus = VoxelField(tau.grid, tau.m, minus)
    s = VoxelField(tau.grid, tau.m, plus - minus)
    return t_plus, t_minus, s


@dataclass
class InfSupRow:
    n: int
    sigma_min: float
    sigma_max: float
    constructive_min: float  # min over sampled tau of a(tau, s)/(|tau||s|)


@dataclass
class InfSupReport:
    rows: list

    def sigma_min_spread(self) -> float:
        """max/min of the smallest singular value across grids."""
        values = [row.sigma_min for row in self.rows]
        return max(values) / min(values)


def infsup_check(ops, samples: int = 100, seed: int = 0) -> InfSupReport:
    """Dense spectra plus the constructive sign-split bound per operator.

    Singular values of the dense matrix equal those of the operator in the
    h^d-weighted norm (the uniform weight cancels in the ratio), so the
    reported constants are comparable across grid sizes.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for op in ops:
        dense = assemble_dense(op)
        sigma = np.linalg.svd(dense.matrix, compute_uv=False)
        bound = np.inf
        for _ in range(samples):
            data = np.zeros(op.grid.shape + (op.m,))
            data[op.coeff.mask] = rng.standard_normal(
                (op.coeff.masked_count, op.m))
            tau = VoxelField(op.grid, op.m, data)
            _, _, s = sign_split(tau, op.coeff, op.green.ref)
            denom = weighted_norm(tau) * weighted_norm(s)
            if denom == 0.0:
                continue
            bound = min(bound, weighted_dot(op.apply(tau), s) / denom)
        rows.append(InfSupRow(op.grid.n, float(sigma[-1]), float(sigma[0]),
                              float(bound)))
    return InfSupReport(rows)


@dataclass
class RateFit:
    alpha: float      # fitted exponent of error ~ C h^alpha
    residual: float   # rms misfit of the log-log line
    pairs: list       # (h, error) points used


def fit_rate(pairs) -> RateFit:
    """Least-squares slope of log(error) against log(h)."""
    clean = [(h, e) for h, e in pairs if e > 0.0]
    if len(clean) < 3:
        raise ValueError("rate fit needs at least 3 positive error points")
    hs = np.log([h for h, _ in clean])
    es = np.log([e for _, e in clean])
    alpha, intercept = np.polyfit(hs, es, 1)
    misfit = es - (alpha * hs + intercept)
    return RateFit(float(alpha), float(np.sqrt(np.mean(misfit ** 2))), clean)


@dataclass
class SweepRow:
    n: int
    scalar: float     # p . A*_h p
    column: np.ndarray
    iterations: int
    wall_time: float
    residual: float
    converged: bool


@dataclass
class SweepResult:
    rows: list
    variant: str
    solver: str
    reference_scalar: float
    fit: RateFit = None
    aborted: bool = False

    def errors(self):
        """(h, |scalar - reference|) pairs; the finest grid drops out when it
        defines the reference (its error is identically zero)."""
        out = []
        for row in self.rows:
            err = abs(row.scalar - self.reference_scalar)
            if row is self.rows[-1] and err == 0.0:
                continue
            out.append((1.0 / row.n, err))
        return out


def convergence_sweep(micro: Microstructure, ref, kind: str, ns, p,
                      cfg: SolveConfig = None, reference: float = None,
                      green_opts: dict = None, threads: int = 1) -> SweepResult:
    """Solve the same microstructure on each grid in `ns` and fit a rate.

    `ns` must ascend and divide the reference grid side.  Without an analytic
    `reference` the finest grid's value serves as reference and is excluded
    from the fit.  An unconverged solve stops the sweep early and flags the
    partial result.
    """
    cfg = cfg or SolveConfig()
    opts = green_opts or {}
    if list(ns) != sorted(set(ns)):
        raise ValueError("grid sides must be strictly ascending")
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    rows = []
    aborted = False
    for n in ns:
        coeff = build_coefficients(micro, ref, n)
        green = make_green(kind, ref, make_grid(micro.grid.d, n), **opts)
        op = SystemOperator(coeff, green, threads=threads)
        _, report = solve(op, p, cfg)
        rows.append(SweepRow(n, float(p @ report.column), report.column,
                             report.iterations, report.wall_time,
                             report.residual, report.converged))
        if not report.converged:
            aborted = True
            break
    ref_scalar = rows[-1].scalar if reference is None else float(reference)
    result = SweepResult(rows, kind, cfg.solver, ref_scalar, aborted=aborted)
    if not aborted:
        pairs = result.errors()
        if len([e for _, e in pairs if e > 0]) >= 3:
            result.fit = fit_rate(pairs)
    return result


@dataclass
class BenchRow:
    n: int
    threads: int
    iterations: int
    wall_time: float
    ratio: float          # wall_time / (iterations * N^d * log N)
    efficiency: float     # T1/(P*T_P); None for the P = 1 baseline


def parallel_efficiency(t_one: float, p: int, t_p: float) -> float:
    return t_one / (p * t_p)


def bench(micro: Microstructure, ref, kind: str, ns, p,
          cfg: SolveConfig = None, thread_counts=(1,),
          green_opts: dict = None, repeats: int = 1) -> list:
    """Wall-time table over grid sizes and thread counts.

    The P = 1 run of each grid is the efficiency baseline; rows keep the
    minimum wall time over `repeats` solves.  Output values (iterations,
    homogenized columns) are independent of the thread count by construction;
    only timing varies.
    """
    cfg = cfg or SolveConfig()
    opts = green_opts or {}
    if thread_counts[0] != 1:
        raise ValueError("thread counts must start at the P = 1 baseline")
    rows = []
    for n in ns:
        coeff = build_coefficients(micro, ref, n)
        green = make_green(kind, ref, make_grid(micro.grid.d, n), **opts)
        t_one = None
        for threads in thread_counts:
            op = SystemOperator(coeff, green, threads=threads)
            best = None
            iterations = 0
            for _ in range(max(1, repeats)):
                _, report = solve(op, p, cfg)
                iterations = report.iterations
                best = report.wall_time if best is None else min(
                    best, report.wall_time)
            ratio = best / (max(1, iterations) * n ** micro.grid.d * np.log(n))
            if threads == 1:
                t_one = best
                eff = None
            else:
                eff = parallel_efficiency(t_one, threads, best)
            rows.append(BenchRow(n, threads, iterations, best, ratio, eff))
    return rows
