"""Symmetric-tensor coordinates and isotropic stiffness algebra.

Symmetric d x d tensors are handled through an orthonormal basis: the d unit
diagonal tensors followed by the off-diagonal pairs (e_i e_j + e_j e_i)/sqrt(2)
in the order (2,3), (1,3), (1,2) for d = 3 and (1,2) for d = 2.  Coordinates in
this basis preserve the Frobenius inner product, so fourth-order tensors with
minor and major symmetries become plain symmetric m x m matrices with
m = d(d+1)/2, and double contractions become matrix-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_AXES = "xyz"

# off-diagonal pair order per dimension
_PAIRS = {1: [], 2: [(0, 1)], 3: [(1, 2), (0, 2), (0, 1)]}


def sym_component_count(d: int) -> int:
    return d * (d + 1) // 2


def sym_basis(d: int) -> np.ndarray:
    """Orthonormal basis of symmetric tensors, shape (m, d, d)."""
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    m = sym_component_count(d)
    basis = np.zeros((m, d, d))
    for i in range(d):
        basis[i, i, i] = 1.0
    for a, (i, j) in enumerate(_PAIRS[d]):
        basis[d + a, i, j] = basis[d + a, j, i] = 1.0 / np.sqrt(2.0)
    return basis


def tensor_to_coords(t: np.ndarray) -> np.ndarray:
    """Coordinates of symmetric tensors, shape (..., d, d) -> (..., m)."""
    t = np.asarray(t)
    d = t.shape[-1]
    if t.shape[-2] != d:
        raise ValueError("expected square tensors")
    if np.max(np.abs(t - np.swapaxes(t, -1, -2))) > 1e-12 * max(1.0, np.max(np.abs(t))):
        raise ValueError("tensor is not symmetric")
    return np.einsum("aij,...ij->...a", sym_basis(d), t)


def coords_to_tensor(c: np.ndarray, d: int) -> np.ndarray:
    """Inverse of tensor_to_coords, shape (..., m) -> (..., d, d)."""
    c = np.asarray(c)
    if c.shape[-1] != sym_component_count(d):
        raise ValueError("expected %d components" % sym_component_count(d))
    return np.einsum("...a,aij->...ij", c, sym_basis(d))


def identity_coords(d: int) -> np.ndarray:
    """Coordinates of the identity tensor: ones on the diagonal slots."""
    m = sym_component_count(d)
    out = np.zeros(m)
    out[:d] = 1.0
    return out


@dataclass(frozen=True)
class IsotropicStiffness:
    """Isotropic elastic stiffness from a shear modulus and Poisson ratio."""

    mu: float
    nu: float
    d: int = 3

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("shear modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 1/2)")
        if self.d not in (2, 3):
            raise ValueError("elasticity supports d in {2, 3}")

    @property
    def lam(self) -> float:
        return 2.0 * self.mu * self.nu / (1.0 - 2.0 * self.nu)

    def matrix(self) -> np.ndarray:
        """Stiffness acting on strain coordinates: lam * m m^T + 2 mu * I."""
        ident = identity_coords(self.d)
        m = sym_component_count(self.d)
        return self.lam * np.outer(ident, ident) + 2.0 * self.mu * np.eye(m)

    def compliance(self) -> np.ndarray:
        """Exact inverse of matrix() using the hydrostatic/deviatoric split."""
        ident = identity_coords(self.d)
        m = sym_component_count(self.d)
        hydro = np.outer(ident, ident) / self.d
        bulk = self.d * self.lam + 2.0 * self.mu
        return hydro / bulk + (np.eye(m) - hydro) / (2.0 * self.mu)


def parse_plane(plane, d: int) -> tuple:
    """Normalize a shear plane given as 'xy' or an index pair."""
    if isinstance(plane, str):
        axes = [_AXES.index(c) for c in plane.lower()]
    else:
        axes = [int(a) for a in plane]
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ValueError("a shear plane needs two distinct axes, got %r" % (plane,))
    if not all(0 <= a < d for a in axes):
        raise ValueError("plane %r outside dimension %d" % (plane, d))
    return tuple(sorted(axes))


def shear_loading(d: int, plane="xy") -> np.ndarray:
    """Coordinates of the unit shear e_i x e_j + e_j x e_i on the given plane."""
    i, j = parse_plane(plane, d)
    t = np.zeros((d, d))
    t[i, j] = t[j, i] = 1.0
    return tensor_to_coords(t)


def project_component(a, p: np.ndarray) -> float:
    """Double contraction p : A : p through coordinates, i.e. p^T A p."""
    matrix = getattr(a, "matrix", a)
    if callable(matrix):
        matrix = matrix()
    matrix = np.asarray(matrix, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return float(p @ matrix @ p)
