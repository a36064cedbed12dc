"""Discrete periodic Green operators for the polarization formulation.

Every variant maps a polarization field to minus the strain (or gradient) it
induces in a homogeneous reference medium.  On the spectral side the action is
a per-frequency m x m matrix, the "symbol".  All symbols derive from one
continuous building block evaluated on a gradient vector V:

    conduction:  G(V) = V V* / (V* . A0 V)
    elasticity:  G(V) = B (B* C0 B)^-1 B*,   B = strain coordinates of sym(V x u)

which for real V reproduces the classical expressions in the unit direction
n = V/|V| and stays Hermitian positive semidefinite for complex V.  The four
variants differ only in which V (or combination) represents a grid frequency:

* truncated:  V = centered integer frequency; even-N Nyquist indices take the
  inverse reference tensor so the symbol table stays conjugate-symmetric.
* filtered:   weighted sum over the 2^d shifts k/N + n, n in {-1,0}^d, with
  weights prod_i cos^2(pi (k_i/N + n_i) / 2).
* fd:         V_i = exp(2i pi k_i/N) - 1, the forward-difference symbol.  The
  elastic version extends the same construction and is experimental.
* consistent: lattice sum over shifts k/N + n, n in Z^d, with squared-sinc
  weights; exact in 1d conduction, elsewhere a partial sum with a reported
  last-shell convergence estimate.  Intended as a small-grid oracle.

All variants vanish identically at k = 0, so applying them never moves the
field mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .elasticity import IsotropicStiffness, sym_basis, sym_component_count
from .grid import Grid, frequency_grid, nyquist_mask

CONDUCTION = "conduction"
ELASTICITY = "elasticity"

VARIANTS = ("consistent", "truncated", "filtered", "fd")


class SeriesConvergenceError(RuntimeError):
    """Partial lattice sum whose last shell is still too large."""

    def __init__(self, estimate: float, n_max: int, tol: float):
        super().__init__(
            "consistent symbol series not converged: last-shell estimate "
            "%.3e exceeds tol %.1e at n_max=%d; increase n_max or loosen tol"
            % (estimate, tol, n_max))
        self.estimate = estimate


def field_components(physics: str, d: int) -> int:
    if physics == CONDUCTION:
        return d
    if physics == ELASTICITY:
        return sym_component_count(d)
    raise ValueError("unknown physics %r" % (physics,))


@dataclass(frozen=True, eq=False)
class ReferenceMedium:
    """Homogeneous reference: an SPD conduction tensor or isotropic stiffness."""

    physics: str
    matrix: np.ndarray = None  # conduction only, shape (d, d)
    mu0: float = None          # elasticity only
    nu0: float = None

    @classmethod
    def conduction(cls, a0, d: int = None) -> "ReferenceMedium":
        a0 = np.asarray(a0, dtype=np.float64)
        if a0.ndim == 0:
            if d is None:
                raise ValueError("scalar reference needs an explicit dimension")
            a0 = float(a0) * np.eye(d)
        if a0.ndim != 2 or a0.shape[0] != a0.shape[1]:
            raise ValueError("conduction reference must be a square matrix")
        if np.max(np.abs(a0 - a0.T)) > 1e-12 * max(1.0, np.max(np.abs(a0))):
            raise ValueError("conduction reference must be symmetric")
        a0 = (a0 + a0.T) / 2.0
        if np.min(np.linalg.eigvalsh(a0)) <= 0:
            raise ValueError("conduction reference must be positive definite")
        a0.setflags(write=False)
        return cls(CONDUCTION, matrix=a0)

    @classmethod
    def elasticity(cls, mu0: float, nu0: float) -> "ReferenceMedium":
        IsotropicStiffness(float(mu0), float(nu0), 3)  # parameter validation
        return cls(ELASTICITY, mu0=float(mu0), nu0=float(nu0))

    @property
    def d(self):
        return None if self.physics == ELASTICITY else self.matrix.shape[0]

    @property
    def lam0(self) -> float:
        return IsotropicStiffness(self.mu0, self.nu0, 3).lam

    def components(self, d: int) -> int:
        return field_components(self.physics, d)

    def tensor(self, d: int) -> np.ndarray:
        """Action on field coordinates: the matrix itself, or the stiffness."""
        if self.physics == CONDUCTION:
            if self.matrix.shape[0] != d:
                raise ValueError("reference built for d=%d, asked for d=%d"
                                 % (self.matrix.shape[0], d))
            return np.array(self.matrix)
        return IsotropicStiffness(self.mu0, self.nu0, d).matrix()

    def tensor_inv(self, d: int) -> np.ndarray:
        if self.physics == CONDUCTION:
            return np.linalg.inv(self.tensor(d))
        return IsotropicStiffness(self.mu0, self.nu0, d).compliance()


def _gradient_symbol(v: np.ndarray, ref: ReferenceMedium, d: int) -> np.ndarray:
    """Continuous symbol on gradient vectors v of shape (..., d).

    Real input gives the classical real-symmetric symbol; complex input (the
    forward-difference case) gives its Hermitian PSD generalization.  Rows
    with v = 0 produce zero blocks.
    """
    v = np.asarray(v)
    single = v.ndim == 1
    if single:
        v = v[None]
    zero = np.einsum("...i,...i->...", v, v.conj()).real == 0.0
    if ref.physics == CONDUCTION:
        a0 = ref.tensor(d)
        num = np.einsum("...i,...j->...ij", v, v.conj())
        den = np.einsum("...i,ij,...j->...", v.conj(), a0, v).real
        den = np.where(zero, 1.0, den)
        out = num / den[..., None, None]
    else:
        mu0, lam0 = ref.mu0, ref.lam0
        basis = sym_basis(d)
        b = np.einsum("ajs,...s->...aj", basis, v)
        vv = np.einsum("...i,...i->...", v, v.conj()).real
        eye = np.eye(d)
        k = (mu0 * vv[..., None, None] * eye
             + mu0 * np.einsum("...i,...h->...ih", v, v.conj())
             + lam0 * np.einsum("...i,...h->...ih", v.conj(), v))
        k[zero] = eye  # placeholder; the block is zeroed below
        kinv = np.linalg.inv(k)
        out = np.einsum("...aj,...jh,...bh->...ab", b, kinv, b.conj())
    out[zero] = 0.0
    return out[0] if single else out


def gamma_continuous(kappa, a0) -> np.ndarray:
    """Conduction symbol kappa kappa^T / (kappa . A0 kappa); zero at kappa = 0."""
    kappa = np.asarray(kappa, dtype=np.float64)
    a0 = np.asarray(a0, dtype=np.float64)
    return _gradient_symbol(kappa, ReferenceMedium.conduction(a0), a0.shape[0])


def gamma_continuous_elastic(kappa, mu0: float, nu0: float) -> np.ndarray:
    """Isotropic strain symbol in tensor coordinates; zero at kappa = 0."""
    kappa = np.asarray(kappa, dtype=np.float64)
    d = kappa.shape[-1]
    return _gradient_symbol(kappa, ReferenceMedium.elasticity(mu0, nu0), d)


class GreenVariant:
    """Base class: a reference medium bound to a grid, exposing symbols."""

    name = None

    def __init__(self, ref: ReferenceMedium, grid: Grid):
        if ref.physics == CONDUCTION and ref.matrix.shape[0] != grid.d:
            raise ValueError("reference dimension does not match the grid")
        if ref.physics == ELASTICITY and grid.d == 1:
            raise ValueError("elasticity needs d in {2, 3}")
        self.ref = ref
        self.grid = grid

    @property
    def m(self) -> int:
        return self.ref.components(self.grid.d)

    def symbol(self, k) -> np.ndarray:
        """Symbol at one grid index, shape (m, m)."""
        k = np.asarray(k, dtype=np.int64).reshape(self.grid.d)
        if np.any(k < 0) or np.any(k >= self.grid.n):
            raise ValueError("grid index %s outside {0..%d}^%d"
                             % (k.tolist(), self.grid.n - 1, self.grid.d))
        return self._symbol_block(k[None])[0]

    def symbol_table(self) -> np.ndarray:
        """Symbols at every grid index, shape grid.shape + (m, m)."""
        raise NotImplementedError

    def _symbol_block(self, ks) -> np.ndarray:
        raise NotImplementedError


class TruncatedGreen(GreenVariant):
    """Continuous symbol at the centered frequency, Nyquist rows replaced.

    Raw truncation breaks the conjugate symmetry table(N-k) = conj(table(k))
    exactly at even-N Nyquist indices, where the centered frequency has no
    mirror partner; those rows take the full inverse reference tensor instead.
    """

    name = "truncated"

    def _symbol_block(self, ks):
        n = self.grid.n
        cent = np.where(ks <= n // 2, ks, ks - n).astype(np.float64)
        out = _gradient_symbol(cent, self.ref, self.grid.d)
        ny = (n % 2 == 0) & np.any(ks == n // 2, axis=-1)
        if np.any(ny):
            out[ny] = self.ref.tensor_inv(self.grid.d)
        return out

    def symbol_table(self):
        freqs = frequency_grid(self.grid).astype(np.float64)
        out = _gradient_symbol(freqs, self.ref, self.grid.d)
        ny = nyquist_mask(self.grid)
        if ny.any():
            out[ny] = self.ref.tensor_inv(self.grid.d)
        return out


class FilteredGreen(GreenVariant):
    """Cosine-filtered combination of the 2^d aliases k/N + n, n in {-1,0}^d."""

    name = "filtered"

    def _weighted_sum(self, frac):
        d = self.grid.d
        out = None
        for shift in product((-1.0, 0.0), repeat=d):
            kap = frac + np.asarray(shift)
            w = np.prod(np.cos(np.pi * kap / 2.0) ** 2, axis=-1)
            term = w[..., None, None] * _gradient_symbol(kap, self.ref, d)
            out = term if out is None else out + term
        # cos(pi/2) rounds to ~6e-17, not 0; the k = 0 block is exactly zero
        out[np.all(frac == 0.0, axis=-1)] = 0.0
        return out

    def _symbol_block(self, ks):
        return self._weighted_sum(ks.astype(np.float64) / self.grid.n)

    def symbol_table(self):
        n, d = self.grid.n, self.grid.d
        idx = np.meshgrid(*(np.arange(n),) * d, indexing="ij")
        frac = np.stack(idx, axis=-1).astype(np.float64) / n
        return self._weighted_sum(frac)


class FiniteDifferenceGreen(GreenVariant):
    """Rank-structured symbol on the forward-difference vector.

    V_i(k) = exp(2i pi k_i/N) - 1 replaces the frequency vector in the
    continuous construction; V(N-k) = conj(V(k)) keeps the table
    conjugate-symmetric with no Nyquist special case.  The elastic version
    follows the same substitution and is experimental.
    """

    name = "fd"

    def _symbol_block(self, ks):
        v = np.exp(2j * np.pi * ks / self.grid.n) - 1.0
        return _gradient_symbol(v, self.ref, self.grid.d)

    def symbol_table(self):
        n, d = self.grid.n, self.grid.d
        idx = np.meshgrid(*(np.arange(n),) * d, indexing="ij")
        ks = np.stack(idx, axis=-1)
        return self._symbol_block(ks)


class ConsistentGreen(GreenVariant):
    """Squared-sinc lattice sum over all integer shifts of k/N.

    In 1d conduction the sum telescopes exactly: sum_n sinc^2(x + n) = 1 for
    every x, and the direction factor is constant, so the symbol is A0^-1 off
    the zero frequency.  In higher dimensions the sum is truncated to the
    window max_i |n_i| <= n_max and the largest last-shell contribution is
    kept as `series_estimate`; evaluation fails when it exceeds `tol`.

    Single-index evaluation sums around k/N itself, so the lattice identity
    symbol(k + N e_j) = symbol(k) holds only up to the partial-sum tolerance.
    The table uses the centered representative of each index, which makes the
    table exactly conjugate-symmetric.  Cost grows like (2 n_max + 1)^d per
    frequency; this variant is meant as a small-grid oracle.
    """

    name = "consistent"

    def __init__(self, ref, grid, n_max: int = 4, tol: float = 1e-3):
        super().__init__(ref, grid)
        if n_max < 1:
            raise ValueError("need n_max >= 1")
        self.n_max = int(n_max)
        self.tol = float(tol)
        self.series_estimate = 0.0
        self._table = None

    @property
    def _exact_1d(self) -> bool:
        return self.grid.d == 1 and self.ref.physics == CONDUCTION

    def _lattice_sum(self, base):
        """Partial sum and last-shell estimate around base frequencies (..., d)."""
        d = self.grid.d
        total = None
        shell = None
        for offs in product(range(-self.n_max, self.n_max + 1), repeat=d):
            kap = base + np.asarray(offs, dtype=np.float64)
            w = np.prod(np.sinc(kap), axis=-1) ** 2
            term = w[..., None, None] * _gradient_symbol(kap, self.ref, d)
            total = term if total is None else total + term
            if max(abs(o) for o in offs) == self.n_max:
                shell = term if shell is None else shell + term
        # integer bases sit on the sinc zeros: those sums vanish identically
        total[np.all(base == np.round(base), axis=-1)] = 0.0
        tnorm = np.linalg.norm(total, axis=(-2, -1))
        snorm = np.linalg.norm(shell, axis=(-2, -1))
        rel = np.where(tnorm > 0, snorm / np.where(tnorm > 0, tnorm, 1.0), 0.0)
        estimate = float(np.max(rel))
        if estimate > self.tol:
            raise SeriesConvergenceError(estimate, self.n_max, self.tol)
        self.series_estimate = max(self.series_estimate, estimate)
        return total

    def _symbol_block(self, ks):
        if self._exact_1d:
            inv = self.ref.tensor_inv(1)
            off = (ks[..., 0] % self.grid.n) != 0
            return off[..., None, None] * inv
        return self._lattice_sum(ks.astype(np.float64) / self.grid.n)

    def symbol(self, k):
        """Series value at any integer multi-index, not reduced mod N."""
        k = np.asarray(k, dtype=np.int64).reshape(self.grid.d)
        return self._symbol_block(k[None])[0]

    def symbol_table(self):
        if self._table is not None:
            return self._table
        if self._exact_1d:
            inv = self.ref.tensor_inv(1)
            off = np.arange(self.grid.n) != 0
            self._table = off[:, None, None] * inv
        else:
            base = frequency_grid(self.grid).astype(np.float64) / self.grid.n
            table = self._lattice_sum(base)
            # The full lattice sum is even in k, but a finite window around
            # the +N/2 representative is not the window around -N/2: partial
            # sums differ by a boundary shell at even-N Nyquist rows.
            # Averaging with the conjugate mirror restores exact symmetry and
            # stays within the shell estimate of either partial sum.
            mirror = table
            for ax in range(self.grid.d):
                mirror = np.roll(np.flip(mirror, axis=ax), 1, axis=ax)
            self._table = (table + mirror.conj()) / 2.0
        return self._table


_VARIANTS = {
    "truncated": TruncatedGreen,
    "filtered": FilteredGreen,
    "fd": FiniteDifferenceGreen,
    "consistent": ConsistentGreen,
}


def make_green(kind: str, ref: ReferenceMedium, grid: Grid, **opts) -> GreenVariant:
    """Build a Green variant from its command-line name."""
    try:
        cls = _VARIANTS[kind]
    except KeyError:
        raise ValueError("unknown Green variant %r; pick one of %s"
                         % (kind, "|".join(VARIANTS)))
    return cls(ref, grid, **opts)
