"""Matrix-free application of the discrete cell-problem system.

The unknown is the polarization field tau supported on the masked-in voxels;
the system sends it to K*tau + Gamma0*tau, re-masked.  The convolution runs
as DFT -> per-frequency symbol product -> inverse DFT, so one application
costs O(m N^d log N).  For small grids `assemble_dense` materializes the same
operator as an explicit block matrix (one inverse DFT of the symbol table
gives the real-space kernel, which couples voxel pairs through their index
difference) — that is the oracle the matrix-free path is tested against.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grid import Grid, SpectralSymmetryError, VoxelField
from .green import GreenVariant
from .microstructure import CoefficientField

# Dense assembly is an O((m N^d)^2) memory oracle, not a solver path.
DENSE_ROW_LIMIT = 4096


def _component_fft(data: np.ndarray, forward: bool, threads: int) -> np.ndarray:
    """fftn/ifftn over the spatial axes, optionally one thread per component.

    Each component is transformed by the same single-threaded kernel whatever
    the pool size, so results are bitwise independent of `threads`.
    """
    axes = tuple(range(data.ndim - 1))
    fn = np.fft.fftn if forward else np.fft.ifftn
    m = data.shape[-1]
    if threads <= 1 or m == 1:
        return fn(data, axes=axes)
    out = np.empty(data.shape, dtype=np.complex128)
    with ThreadPoolExecutor(max_workers=min(threads, m)) as pool:
        futures = [pool.submit(fn, np.ascontiguousarray(data[..., j]))
                   for j in range(m)]
        for j, fut in enumerate(futures):
            out[..., j] = fut.result()
    return out


def _real_checked(grid: Grid, m: int, full: np.ndarray,
                  tol: float = 1e-10) -> VoxelField:
    # same policy as grid.dft_inverse, for transforms done component-wise
    scale = np.linalg.norm(full.ravel())
    residue = 0.0 if scale == 0.0 else np.linalg.norm(full.imag.ravel()) / scale
    if residue > tol:
        raise SpectralSymmetryError(residue)
    return VoxelField(grid, m, np.ascontiguousarray(full.real))


def _convolve(tau: VoxelField, table: np.ndarray, threads: int) -> VoxelField:
    spec = _component_fft(tau.data, forward=True, threads=threads)
    spec = np.einsum("...ij,...j->...i", table, spec)
    full = _component_fft(spec, forward=False, threads=threads)
    return _real_checked(tau.grid, tau.m, full)


def apply_green_field(tau: VoxelField, green: GreenVariant,
                      threads: int = 1) -> VoxelField:
    """Periodic convolution with the discrete Green operator."""
    if tau.grid != green.grid:
        raise ValueError("field and Green operator live on different grids")
    if tau.m != green.m:
        raise ValueError("field has %d components, physics needs %d"
                         % (tau.m, green.m))
    return _convolve(tau, green.symbol_table(), threads)


class SystemOperator:
    """tau -> K tau + (Gamma0 * tau), zeroed outside the solve mask.

    The symbol table is built once at construction and shared by every
    application.  `threads` only splits independent per-component FFTs, so
    output is deterministic for any thread count.
    """

    def __init__(self, coeff: CoefficientField, green: GreenVariant,
                 threads: int = 1):
        if coeff.grid != green.grid:
            raise ValueError("coefficients and Green operator grids differ")
        if coeff.physics != green.ref.physics:
            raise ValueError("coefficients are %s but the Green operator is %s"
                             % (coeff.physics, green.ref.physics))
        if coeff.m != green.m:
            raise ValueError("component counts differ: %d vs %d"
                             % (coeff.m, green.m))
        if threads < 1:
            raise ValueError("thread count must be positive")
        self.coeff = coeff
        self.green = green
        self.grid = coeff.grid
        self.m = coeff.m
        self.threads = int(threads)
        self.table = green.symbol_table()

    def apply_green(self, tau: VoxelField) -> VoxelField:
        if tau.grid != self.grid or tau.m != self.m:
            raise ValueError("field does not match the operator space")
        return _convolve(tau, self.table, self.threads)

    def apply(self, tau: VoxelField) -> VoxelField:
        """Full system action; rejects input supported outside the mask."""
        if tau.grid != self.grid or tau.m != self.m:
            raise ValueError("field does not match the operator space")
        if np.any(tau.data[~self.coeff.mask] != 0.0):
            raise ValueError("polarization must vanish on masked-out voxels")
        out = self.coeff.apply(tau).data + self.apply_green(tau).data
        out[~self.coeff.mask] = 0.0
        return VoxelField(self.grid, self.m, out)

    def rhs(self, p) -> VoxelField:
        """Loading direction on masked-in voxels, zero elsewhere."""
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        if p.shape[0] != self.m:
            raise ValueError("loading has %d components, physics needs %d"
                             % (p.shape[0], self.m))
        data = np.zeros(self.grid.shape + (self.m,))
        data[self.coeff.mask] = p
        return VoxelField(self.grid, self.m, data)


def apply_system(tau: VoxelField, op: SystemOperator) -> VoxelField:
    return op.apply(tau)


@dataclass
class DenseSystem:
    """Explicit block matrix of the system on the masked voxels."""

    grid: Grid
    m: int
    voxels: np.ndarray  # (R, d) multi-indices of masked-in voxels, C order
    matrix: np.ndarray  # (R*m, R*m)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    def gather(self, field: VoxelField) -> np.ndarray:
        return field.data[tuple(self.voxels.T)].reshape(-1)

    def scatter(self, vec: np.ndarray) -> VoxelField:
        data = np.zeros(self.grid.shape + (self.m,))
        data[tuple(self.voxels.T)] = vec.reshape(-1, self.m)
        return VoxelField(self.grid, self.m, data)

    def matvec(self, tau: VoxelField) -> VoxelField:
        return self.scatter(self.matrix @ self.gather(tau))

    def solve(self, rhs: VoxelField) -> VoxelField:
        return self.scatter(np.linalg.solve(self.matrix, self.gather(rhs)))


def assemble_dense(op: SystemOperator, limit: int = DENSE_ROW_LIMIT) -> DenseSystem:
    """Materialize the system matrix; refuse more than `limit` rows."""
    voxels = np.argwhere(op.coeff.mask)
    rows = len(voxels) * op.m
    if rows > limit:
        raise ValueError("dense system would need %d rows (limit %d)"
                         % (rows, limit))
    axes = tuple(range(op.grid.d))
    kernel = np.fft.ifftn(op.table, axes=axes)
    scale = np.linalg.norm(kernel.ravel())
    residue = 0.0 if scale == 0.0 else np.linalg.norm(kernel.imag.ravel()) / scale
    if residue > 1e-10:
        raise SpectralSymmetryError(residue)
    kernel = kernel.real

    r = len(voxels)
    diff = (voxels[:, None, :] - voxels[None, :, :]) % op.grid.n
    green_blocks = kernel[tuple(diff[..., j] for j in range(op.grid.d))]
    matrix = np.transpose(green_blocks, (0, 2, 1, 3)).reshape(rows, rows).copy()
    k_blocks = op.coeff.k_data[tuple(voxels.T)]
    for i in range(r):
        matrix[i * op.m:(i + 1) * op.m, i * op.m:(i + 1) * op.m] += k_blocks[i]
    return DenseSystem(op.grid, op.m, voxels, matrix)
