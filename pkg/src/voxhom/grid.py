"""Periodic voxel grids and the discrete Fourier transform pair.

Fields live on the unit cell (0,1)^d sampled by N voxels per side, voxel
centers at h*(beta + 1/2) with h = 1/N.  The forward transform is the plain
unnormalized DFT

    F_k = sum_beta f_beta exp(-2i*pi * beta.k / N),

and the inverse carries the 1/N^d factor.  All spectral indices k live in
{0..N-1}^d; `centered_freq` maps them to the signed range used by the Green
symbols, with the positive convention at the even-N Nyquist index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Guard against grids whose fields cannot possibly fit in memory.
MAX_VOXELS = 2**31


class SpectralSymmetryError(ValueError):
    """Inverse DFT of a field that is not conjugate-symmetric."""

    def __init__(self, residue: float):
        super().__init__(
            "inverse DFT left a relative imaginary residue of %.3e; the "
            "spectral field is not conjugate-symmetric" % residue)
        self.residue = residue


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: dimension d in {1,2,3} and N voxels per side."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3, got %r" % (self.d,))
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError("need an integer N >= 2, got %r" % (self.n,))
        if self.n ** self.d > MAX_VOXELS:
            raise ValueError(
                "grid with %d^%d voxels exceeds the %d-voxel limit"
                % (self.n, self.d, MAX_VOXELS))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n ** self.d


def make_grid(d: int, n: int) -> Grid:
    return Grid(d, int(n))


def centered_freq(k: int, n: int) -> int:
    """Signed frequency of grid index k: k itself for k <= N//2, else k - N.

    For even N = 2M the Nyquist index k = M maps to +M; for odd N = 2M+1 the
    image is the symmetric range {-M..M}.
    """
    if not 0 <= k < n:
        raise ValueError("grid index %d outside {0..%d}" % (k, n - 1))
    return k if k <= n // 2 else k - n


def is_nyquist(k: int, n: int) -> bool:
    """True for the self-conjugate index k = N/2 on even grids."""
    return n % 2 == 0 and k == n // 2


def centered_axis(n: int) -> np.ndarray:
    ks = np.arange(n)
    return np.where(ks <= n // 2, ks, ks - n)


def frequency_grid(grid: Grid) -> np.ndarray:
    """Centered integer frequencies, shape grid.shape + (d,)."""
    axes = np.meshgrid(*(centered_axis(grid.n),) * grid.d, indexing="ij")
    return np.stack(axes, axis=-1)


def nyquist_mask(grid: Grid) -> np.ndarray:
    """Boolean mask of indices with at least one component at N/2 (even N)."""
    if grid.n % 2:
        return np.zeros(grid.shape, dtype=bool)
    hit = np.arange(grid.n) == grid.n // 2
    axes = np.meshgrid(*(hit,) * grid.d, indexing="ij")
    return np.stack(axes, axis=-1).any(axis=-1)


@dataclass
class VoxelField:
    """Real m-component field sampled on a grid, stored as shape + (m,)."""

    grid: Grid
    m: int
    data: np.ndarray

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one component")
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        want = self.grid.shape + (self.m,)
        if self.data.shape != want:
            raise ValueError("field data has shape %s, expected %s"
                             % (self.data.shape, want))
        if not np.isfinite(self.data).all():
            raise ValueError("field contains non-finite entries")

    @classmethod
    def zeros(cls, grid: Grid, m: int) -> "VoxelField":
        return cls(grid, m, np.zeros(grid.shape + (m,)))

    @classmethod
    def constant(cls, grid: Grid, values) -> "VoxelField":
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        data = np.broadcast_to(values, grid.shape + values.shape).copy()
        return cls(grid, values.shape[0], data)

    def at(self, beta) -> np.ndarray:
        """Components at multi-index beta, with periodic wrap for any integers."""
        idx = tuple(int(b) % self.grid.n for b in np.atleast_1d(beta))
        if len(idx) != self.grid.d:
            raise ValueError("expected %d indices, got %d" % (self.grid.d, len(idx)))
        return self.data[idx]

    def mean(self) -> np.ndarray:
        return self.data.mean(axis=tuple(range(self.grid.d)))

    def copy(self) -> "VoxelField":
        return VoxelField(self.grid, self.m, self.data.copy())


@dataclass
class SpectralField:
    """Complex m-component field over spectral indices {0..N-1}^d."""

    grid: Grid
    m: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        want = self.grid.shape + (self.m,)
        if self.data.shape != want:
            raise ValueError("spectral data has shape %s, expected %s"
                             % (self.data.shape, want))


def dft_forward(field: VoxelField) -> SpectralField:
    """Unnormalized forward DFT of every component."""
    axes = tuple(range(field.grid.d))
    return SpectralField(field.grid, field.m, np.fft.fftn(field.data, axes=axes))


def dft_inverse(spec: SpectralField, tol: float = 1e-10) -> VoxelField:
    """Normalized inverse DFT; the result must be real up to `tol` (relative).

    Raises SpectralSymmetryError when the imaginary residue exceeds the
    tolerance, which indicates a conjugate-symmetry bug upstream.
    """
    axes = tuple(range(spec.grid.d))
    full = np.fft.ifftn(spec.data, axes=axes)
    scale = np.linalg.norm(full.ravel())
    residue = 0.0 if scale == 0.0 else np.linalg.norm(full.imag.ravel()) / scale
    if residue > tol:
        raise SpectralSymmetryError(residue)
    return VoxelField(spec.grid, spec.m, np.ascontiguousarray(full.real))


def conjugate_symmetry_residue(spec: SpectralField) -> float:
    """Relative norm of F(k) - conj(F(-k mod N)); 0 for Hermitian fields."""
    rev = spec.data
    for ax in range(spec.grid.d):
        rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
    scale = np.linalg.norm(spec.data.ravel())
    if scale == 0.0:
        return 0.0
    return np.linalg.norm((spec.data - rev.conj()).ravel()) / scale


def weighted_dot(a: VoxelField, b: VoxelField) -> float:
    """h^d-weighted Euclidean inner product (the discrete L2 pairing)."""
    if a.grid != b.grid or a.m != b.m:
        raise ValueError("fields live on different spaces")
    return a.grid.h ** a.grid.d * float(np.sum(a.data * b.data))


def weighted_norm(a: VoxelField) -> float:
    return weighted_dot(a, a) ** 0.5
