"""Periodic microstructures: sphere packings, voxel phase maps, coefficients.

A microstructure is a phase-index map on a fine reference grid plus a catalog
of per-phase coefficient tensors.  Solving happens on a coarser grid whose
side divides the reference side; `build_coefficients` averages the *inverted*
phase contrast (A_phase - A0)^-1 over the fine voxels inside each coarse one,
which is the exact cell integral because phases are voxel-wise constant.  A
coarse voxel enters the solve mask only when every fine voxel inside carries
a phase different from the reference; elsewhere the polarization is pinned to
zero and the stored coefficient block is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elasticity import IsotropicStiffness, sym_component_count
from .grid import Grid, VoxelField, make_grid

CONDUCTION = "conduction"
ELASTICITY = "elasticity"


class PackingError(RuntimeError):
    """Sphere placement budget exhausted before the target count."""

    def __init__(self, wanted: int, placed: int, steps: int):
        super().__init__(
            "placed %d of %d spheres in %d steps; lower the count/radius or "
            "raise max_steps" % (placed, wanted, steps))
        self.placed = placed


class ContrastError(ValueError):
    """A phase tensor sits too close to the reference to invert stably."""


@dataclass(frozen=True, eq=False)
class PhaseTensor:
    """One catalog entry: an SPD conduction tensor or isotropic stiffness."""

    physics: str
    matrix: np.ndarray = None
    mu: float = None
    nu: float = None

    @classmethod
    def conduction(cls, a, d: int = None) -> "PhaseTensor":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim == 0:
            if d is None:
                raise ValueError("scalar conductivity needs a dimension")
            a = float(a) * np.eye(d)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("conductivity must be a square matrix")
        if not np.isfinite(a).all():
            raise ValueError("conductivity entries must be finite")
        a = (a + a.T) / 2.0
        if np.min(np.linalg.eigvalsh(a)) <= 0:
            raise ValueError("conductivity must be positive definite")
        a.setflags(write=False)
        return cls(CONDUCTION, matrix=a)

    @classmethod
    def elasticity(cls, mu: float, nu: float) -> "PhaseTensor":
        IsotropicStiffness(float(mu), float(nu), 3)  # range validation
        return cls(ELASTICITY, mu=float(mu), nu=float(nu))

    def tensor(self, d: int) -> np.ndarray:
        """Action on field coordinates, shape (m, m)."""
        if self.physics == CONDUCTION:
            if self.matrix.shape[0] != d:
                raise ValueError("phase tensor built for d=%d, asked for d=%d"
                                 % (self.matrix.shape[0], d))
            return np.array(self.matrix)
        return IsotropicStiffness(self.mu, self.nu, d).matrix()


def _min_image(delta: np.ndarray) -> np.ndarray:
    return delta - np.rint(delta)


def min_pair_distance(centers: np.ndarray) -> float:
    """Smallest periodic center distance; inf for fewer than two spheres."""
    n = len(centers)
    if n < 2:
        return np.inf
    best = np.inf
    for i in range(n - 1):
        d = _min_image(centers[i + 1:] - centers[i])
        best = min(best, float(np.sqrt(np.min(np.sum(d * d, axis=1)))))
    return best


@dataclass
class SpherePack:
    """Equal-radius hard spheres in the periodic unit cube."""

    centers: np.ndarray
    r: float
    gap: float = 0.0
    seed: int = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 3)
        if not (0.0 < self.r < 0.5):
            raise ValueError("radius must lie in (0, 1/2)")
        if len(self.centers) and (self.centers.min() < 0 or self.centers.max() >= 1.0):
            raise ValueError("centers must lie in [0, 1)^3")
        # small slack tolerates text round trips of the contact distance
        if min_pair_distance(self.centers) < 2 * self.r + self.gap - 1e-12:
            raise ValueError("sphere pair closer than 2r + gap")

    @property
    def count(self) -> int:
        return len(self.centers)

    def volume_fraction(self) -> float:
        return self.count * 4.0 / 3.0 * np.pi * self.r ** 3


def _fits(candidate, centers, min_dist, skip=-1):
    if len(centers) == 0:
        return True
    delta = _min_image(centers - candidate)
    dist2 = np.sum(delta * delta, axis=1)
    if skip >= 0:
        dist2[skip] = np.inf
    return bool(np.min(dist2) >= min_dist ** 2)


def generate_hard_spheres(n: int, r: float, gap: float = 0.0, seed: int = 0,
                          max_steps: int = 200_000) -> SpherePack:
    """Pack n spheres of radius r with pairwise clearance gap.

    Sequential random insertion handles dilute targets; when insertions start
    failing, hard-core displacement moves (step scale r/2) open room and
    insertion retries are interleaved.  One seeded generator drives every
    draw, so results are reproducible across platforms.  Raises PackingError
    with the achieved count when the step budget runs out.
    """
    if not (0.0 < r < 0.5):
        raise ValueError("radius must lie in (0, 1/2)")
    if n < 0:
        raise ValueError("sphere count must be nonnegative")
    vol = n * 4.0 / 3.0 * np.pi * r ** 3
    if vol >= 0.5:
        raise ValueError("volume fraction %.2f is beyond this packer" % vol)
    rng = np.random.default_rng(seed)
    min_dist = 2 * r + gap
    centers = []
    steps = 0
    misses = 0
    while len(centers) < n and steps < max_steps and misses < 2000:
        steps += 1
        cand = rng.random(3)
        if _fits(cand, np.asarray(centers), min_dist):
            centers.append(cand)
            misses = 0
        else:
            misses += 1
    arr = np.asarray(centers).reshape(-1, 3)
    while len(arr) < n and steps < max_steps:
        steps += 1
        if len(arr) == 0 or rng.random() < 0.25:
            cand = rng.random(3)
            if _fits(cand, arr, min_dist):
                arr = np.vstack([arr, cand])
        else:
            i = int(rng.integers(len(arr)))
            cand = (arr[i] + rng.normal(0.0, r / 2.0, 3)) % 1.0
            if _fits(cand, arr, min_dist, skip=i):
                arr[i] = cand
    if len(arr) < n:
        raise PackingError(n, len(arr), steps)
    return SpherePack(arr, r, gap, seed)


@dataclass
class Microstructure:
    """Phase indices on a reference grid plus the phase catalog."""

    grid: Grid
    phase: np.ndarray
    catalog: list

    def __post_init__(self):
        self.phase = np.ascontiguousarray(self.phase, dtype=np.uint8)
        if self.phase.shape != self.grid.shape:
            raise ValueError("phase map shape %s does not match grid %s"
                             % (self.phase.shape, self.grid.shape))
        if not self.catalog:
            raise ValueError("empty phase catalog")
        kinds = {p.physics for p in self.catalog}
        if len(kinds) != 1:
            raise ValueError("catalog mixes physics: %s" % kinds)
        if self.phase.max(initial=0) >= len(self.catalog):
            raise ValueError("phase index exceeds the catalog")

    @property
    def physics(self) -> str:
        return self.catalog[0].physics

    def volume_fractions(self) -> np.ndarray:
        counts = np.bincount(self.phase.ravel(), minlength=len(self.catalog))
        return counts / self.grid.size


def rasterize_spheres(pack: SpherePack, n_ref: int) -> np.ndarray:
    """Binary phase map: voxel centers within r of a sphere center get 1."""
    grid = make_grid(3, n_ref)
    phase = np.zeros(grid.shape, dtype=np.uint8)
    h = grid.h
    for center in pack.centers:
        axes_idx = []
        axes_delta = []
        for j in range(3):
            lo = int(np.floor((center[j] - pack.r) / h - 0.5))
            hi = int(np.ceil((center[j] + pack.r) / h - 0.5))
            idx = np.arange(lo, hi + 1)
            if len(idx) > n_ref:  # a fat sphere on a coarse grid: whole axis
                idx = np.arange(n_ref)
            axes_idx.append(idx % n_ref)
            axes_delta.append(_min_image((idx + 0.5) * h - center[j]))
        d2 = (axes_delta[0][:, None, None] ** 2
              + axes_delta[1][None, :, None] ** 2
              + axes_delta[2][None, None, :] ** 2)
        inside = d2 <= pack.r ** 2
        sub = np.ix_(*axes_idx)
        phase[sub] = np.maximum(phase[sub], inside.astype(np.uint8))
    return phase


def voxelize(pack: SpherePack, n_ref: int, catalog: list) -> Microstructure:
    if len(catalog) != 2:
        raise ValueError("need a [matrix, inclusion] catalog")
    return Microstructure(make_grid(3, n_ref), rasterize_spheres(pack, n_ref),
                          list(catalog))


def uniform_microstructure(d: int, n: int, phase: PhaseTensor) -> Microstructure:
    grid = make_grid(d, n)
    return Microstructure(grid, np.zeros(grid.shape, dtype=np.uint8), [phase])


def laminate_microstructure(d: int, n: int, catalog: list, axis: int = 0,
                            fraction: float = 0.5) -> Microstructure:
    """Layers normal to `axis`: phase 0 on the first `fraction` of the cell."""
    grid = make_grid(d, n)
    cut = round(fraction * n)
    coord = np.arange(n)
    shape = [1] * d
    shape[axis] = n
    phase = np.broadcast_to((coord >= cut).reshape(shape), grid.shape)
    return Microstructure(grid, phase.astype(np.uint8), list(catalog))


def checkerboard_microstructure(n: int, catalog: list) -> Microstructure:
    """2d quadrant checkerboard with period 1; n must be even."""
    if n % 2:
        raise ValueError("checkerboard needs an even side")
    grid = make_grid(2, n)
    half = np.arange(n) < n // 2
    phase = half[:, None] ^ half[None, :]
    return Microstructure(grid, phase.astype(np.uint8), list(catalog))


def voigt_reuss(micro: Microstructure) -> tuple:
    """Arithmetic and harmonic catalog averages (voigt, reuss) as matrices."""
    d = micro.grid.d
    fracs = micro.volume_fractions()
    voigt = sum(f * p.tensor(d) for f, p in zip(fracs, micro.catalog))
    reuss = np.linalg.inv(
        sum(f * np.linalg.inv(p.tensor(d)) for f, p in zip(fracs, micro.catalog)))
    return voigt, reuss


@dataclass
class CoefficientField:
    """Per-voxel inverted contrast blocks K = (A^h - A0)^-1 and the solve mask."""

    grid: Grid
    m: int
    physics: str
    k_data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        want = self.grid.shape + (self.m, self.m)
        if self.k_data.shape != want:
            raise ValueError("coefficient blocks must have shape %s" % (want,))
        if self.mask.shape != self.grid.shape:
            raise ValueError("mask shape does not match the grid")
        if np.any(np.abs(self.k_data[~self.mask]) != 0.0):
            raise ValueError("masked-out voxels must carry zero blocks")

    @property
    def masked_count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def apply(self, tau: VoxelField) -> VoxelField:
        out = np.einsum("...ij,...j->...i", self.k_data, tau.data)
        return VoxelField(self.grid, self.m, out)

    def inverse_table(self) -> np.ndarray:
        """(A^h - A0) per masked voxel; zero blocks elsewhere.

        Mixed-sign averaging can make K singular, in which case the contrast
        itself is not representable and callers should stick to solvers that
        only need K.
        """
        out = np.zeros_like(self.k_data)
        blocks = self.k_data[self.mask]
        try:
            out[self.mask] = np.linalg.inv(blocks)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                "singular averaged contrast block; this medium has no "
                "per-voxel (A^h - A0) and needs a Krylov solver")
        return out


def build_coefficients(micro: Microstructure, ref, n: int,
                       min_contrast: float = 1e-8) -> CoefficientField:
    """Average inverted phase contrast onto an n-per-side solve grid.

    `ref` is the reference medium the Green operator is built on.  Every
    phase must either equal the reference exactly or keep all eigenvalues of
    (A_phase - A0) at magnitude >= min_contrast; violations name the phase.
    """
    d = micro.grid.d
    if micro.physics != ref.physics:
        raise ValueError("microstructure is %s but the reference is %s"
                         % (micro.physics, ref.physics))
    if micro.grid.n % n:
        raise ValueError("solve side %d must divide the reference side %d"
                         % (n, micro.grid.n))
    grid = make_grid(d, n)
    m = micro.catalog[0].tensor(d).shape[0]
    a0 = ref.tensor(d)

    inverses = []
    is_ref = []
    for p, phase in enumerate(micro.catalog):
        delta = phase.tensor(d) - a0
        if np.array_equal(delta, np.zeros_like(delta)):
            is_ref.append(True)
            inverses.append(np.zeros((m, m)))
            continue
        is_ref.append(False)
        eigs = np.linalg.eigvalsh(delta)
        if np.min(np.abs(eigs)) < min_contrast:
            raise ContrastError(
                "phase %d sits within %.1e of the reference (needs "
                "min_contrast=%.1e); adjust A0" % (p, np.min(np.abs(eigs)),
                                                   min_contrast))
        inverses.append(np.linalg.inv(delta))

    c = micro.grid.n // n
    block_axes = tuple(2 * i + 1 for i in range(d))
    block_shape = sum(((n, c),) * d, ())
    k_data = np.zeros(grid.shape + (m, m))
    ref_count = np.zeros(grid.shape, dtype=np.int64)
    for p in range(len(micro.catalog)):
        counts = (micro.phase == p).reshape(block_shape).sum(axis=block_axes)
        if is_ref[p]:
            ref_count += counts
        else:
            k_data += (counts / c ** d)[..., None, None] * inverses[p]
    mask = ref_count == 0
    k_data[~mask] = 0.0
    return CoefficientField(grid, m, micro.physics, k_data, mask)
