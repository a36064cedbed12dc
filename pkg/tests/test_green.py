import numpy as np
import pytest

from voxhom.elasticity import identity_coords, sym_basis
from voxhom.green import (
    ConsistentGreen,
    FilteredGreen,
    FiniteDifferenceGreen,
    ReferenceMedium,
    SeriesConvergenceError,
    TruncatedGreen,
    gamma_continuous,
    gamma_continuous_elastic,
    make_green,
)
from voxhom.grid import make_grid


def elastic_symbol_oracle(kappa, mu0, nu0):
    """Literal unit-direction formula contracted onto the tensor basis."""
    lam0 = 2 * mu0 * nu0 / (1 - 2 * nu0)
    n = np.asarray(kappa, dtype=float)
    n = n / np.linalg.norm(n)
    d = n.shape[0]
    eye = np.eye(d)
    g4 = (np.einsum("ih,j,l->ijhl", eye, n, n)
          + np.einsum("il,j,h->ijhl", eye, n, n)
          + np.einsum("jh,i,l->ijhl", eye, n, n)
          + np.einsum("jl,i,h->ijhl", eye, n, n)) / (4 * mu0)
    g4 -= (lam0 + mu0) / (mu0 * (lam0 + 2 * mu0)) * np.einsum(
        "i,j,h,l->ijhl", n, n, n, n)
    basis = sym_basis(d)
    return np.einsum("aij,ijhl,bhl->ab", basis, g4, basis)


def hermitian_residue(table):
    return np.max(np.abs(table - np.swapaxes(table, -1, -2).conj()))


def mirror_residue(table, d):
    """Max |T(k) - conj(T(N-k mod N))| over the table."""
    rev = table
    for ax in range(d):
        rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
    return np.max(np.abs(table - rev.conj()))


# ---------------------------------------------------------------- continuous


def test_gamma_continuous_hand_values():
    eye = np.eye(2)
    assert np.allclose(gamma_continuous([1.0, 0.0], eye), [[1, 0], [0, 0]])
    assert np.allclose(gamma_continuous([1.0, 1.0], eye),
                       [[0.5, 0.5], [0.5, 0.5]])
    assert np.all(gamma_continuous([0.0, 0.0], eye) == 0.0)


def test_gamma_continuous_scale_invariance_and_projection():
    rng = np.random.default_rng(3)
    for _ in range(20):
        kappa = rng.standard_normal(3)
        b = rng.standard_normal((3, 3))
        a0 = b @ b.T + 3 * np.eye(3)
        g = gamma_continuous(kappa, a0)
        assert np.allclose(gamma_continuous(2.7 * kappa, a0), g, atol=1e-12)
        # Green symbol times A0 is a projection: G A0 G = G
        assert np.max(np.abs(g @ a0 @ g - g)) < 1e-12


def test_gamma_elastic_matches_index_formula():
    rng = np.random.default_rng(5)
    for d in (2, 3):
        for _ in range(10):
            kappa = rng.standard_normal(d)
            got = gamma_continuous_elastic(kappa, 1.7, 0.28)
            want = elastic_symbol_oracle(kappa, 1.7, 0.28)
            assert np.max(np.abs(got - want)) < 1e-12


def test_gamma_elastic_hydrostatic_hand_value():
    # along e1 the identity strain maps to 1/(lam0 + 2 mu0) on the 11 slot
    mu0, nu0 = 0.5, 0.3
    lam0 = 2 * mu0 * nu0 / (1 - 2 * nu0)
    g = gamma_continuous_elastic([1.0, 0.0, 0.0], mu0, nu0)
    out = g @ identity_coords(3)
    want = np.zeros(6)
    want[0] = 1.0 / (lam0 + 2 * mu0)
    assert np.max(np.abs(out - want)) < 1e-12


def test_gamma_elastic_projection():
    rng = np.random.default_rng(8)
    ref = ReferenceMedium.elasticity(1.3, 0.22)
    c0 = ref.tensor(3)
    for _ in range(10):
        g = gamma_continuous_elastic(rng.standard_normal(3), 1.3, 0.22)
        assert np.max(np.abs(g @ c0 @ g - g)) < 1e-12


# ----------------------------------------------------------------- truncated


def test_truncated_matches_continuous_off_nyquist():
    grid = make_grid(2, 8)
    ref = ReferenceMedium.conduction(2.0, d=2)
    green = TruncatedGreen(ref, grid)
    assert np.allclose(green.symbol((1, 6)), gamma_continuous([1, -2], ref.matrix))
    assert np.all(green.symbol((0, 0)) == 0.0)


def test_truncated_nyquist_fix():
    grid = make_grid(2, 4)
    a0 = np.array([[2.0, 0.5], [0.5, 1.0]])
    green = TruncatedGreen(ReferenceMedium.conduction(a0), grid)
    inv = np.linalg.inv(a0)
    for k in [(2, 0), (2, 1), (1, 2), (2, 2)]:
        assert np.allclose(green.symbol(k), inv)
    # raw centered evaluation would pair (2,1) with (2,-1), which differ:
    raw_a = gamma_continuous([2.0, 1.0], a0)
    raw_b = gamma_continuous([2.0, -1.0], a0)
    assert np.max(np.abs(raw_a - raw_b)) > 0.01
    # ... the replacement restores exact table mirror symmetry
    assert mirror_residue(green.symbol_table(), 2) == 0.0


def test_truncated_elastic_nyquist_uses_compliance():
    grid = make_grid(3, 4)
    ref = ReferenceMedium.elasticity(0.5, 0.3)
    green = TruncatedGreen(ref, grid)
    assert np.allclose(green.symbol((2, 1, 0)), ref.tensor_inv(3))


# ------------------------------------------------------------------ filtered


def test_filtered_hand_value_1d():
    # N=2, k=1: two aliases at +-1/2, each with weight cos(pi/4)^2 = 1/2
    grid = make_grid(1, 2)
    green = FilteredGreen(ReferenceMedium.conduction(1.0, d=1), grid)
    assert abs(green.symbol((1,))[0, 0] - 1.0) < 1e-14
    assert green.symbol((0,))[0, 0] == 0.0


def test_filtered_psd_random():
    rng = np.random.default_rng(12)
    grid = make_grid(2, 6)
    for _ in range(20):
        b = rng.standard_normal((2, 2))
        ref = ReferenceMedium.conduction(b @ b.T + 2 * np.eye(2))
        green = FilteredGreen(ref, grid)
        k = rng.integers(0, 6, size=2)
        vals = np.linalg.eigvalsh(green.symbol(tuple(k)))
        assert vals.min() > -1e-13


# ------------------------------------------------------------------------ fd


def test_fd_hand_values():
    green = FiniteDifferenceGreen(
        ReferenceMedium.conduction(3.0, d=1), make_grid(1, 4))
    # scalar case: V Vbar / (a |V|^2) = 1/a at every k != 0
    assert abs(green.symbol((1,))[0, 0] - 1 / 3.0) < 1e-14
    assert green.symbol((0,))[0, 0] == 0.0

    green2 = FiniteDifferenceGreen(
        ReferenceMedium.conduction(1.0, d=2), make_grid(2, 2))
    assert np.allclose(green2.symbol((1, 1)), [[0.5, 0.5], [0.5, 0.5]])


def test_fd_phase_invariance_on_diagonal():
    # equal index components share one complex phase, which cancels: the fd
    # symbol on the grid diagonal reproduces the continuous one exactly
    ref = ReferenceMedium.conduction(np.array([[2.0, 0.3], [0.3, 1.0]]))
    target = gamma_continuous([1.0, 1.0], ref.matrix)
    green = FiniteDifferenceGreen(ref, make_grid(2, 8))
    assert np.max(np.abs(green.symbol((1, 1)) - target)) < 1e-14


def test_fd_reduces_to_continuous_for_fine_grids():
    ref = ReferenceMedium.conduction(np.array([[2.0, 0.3], [0.3, 1.0]]))
    target = gamma_continuous([1.0, 2.0], ref.matrix)
    gaps = []
    for n in (8, 16, 32, 64):
        green = FiniteDifferenceGreen(ref, make_grid(2, n))
        gaps.append(np.max(np.abs(green.symbol((1, 2)) - target)))
    assert gaps[-1] < gaps[0] / 4
    assert gaps[-1] < 0.05


def test_fd_elastic_hermitian_psd_and_limit():
    ref = ReferenceMedium.elasticity(1.0, 0.3)
    green = FiniteDifferenceGreen(ref, make_grid(3, 8))
    s = green.symbol((1, 2, 3))
    assert hermitian_residue(s[None]) < 1e-14
    assert np.linalg.eigvalsh(s).min() > -1e-13
    target = gamma_continuous_elastic([1.0, 2.0, 0.0], 1.0, 0.3)
    fine = FiniteDifferenceGreen(ref, make_grid(3, 64)).symbol((1, 2, 0))
    coarse = FiniteDifferenceGreen(ref, make_grid(3, 8)).symbol((1, 2, 0))
    assert np.max(np.abs(fine - target)) < np.max(np.abs(coarse - target)) / 4


# ---------------------------------------------------------------- consistent


def test_consistent_1d_closed_form_vs_partial_sums():
    grid = make_grid(1, 2)
    green = ConsistentGreen(ReferenceMedium.conduction(1.0, d=1), grid)
    assert abs(green.symbol((1,))[0, 0] - 1.0) < 1e-15
    assert green.symbol((0,))[0, 0] == 0.0
    assert green.series_estimate == 0.0
    # partial sums of 4 / (pi^2 (1+2n)^2) climb toward the closed-form value
    sums = []
    for bound in (4, 64, 1024):
        ns = np.arange(-bound, bound + 1)
        sums.append(np.sum(np.sinc(0.5 + ns) ** 2))
    assert sums[0] < sums[1] < sums[2] < 1.0
    assert 1.0 - sums[2] < 1e-3


def test_consistent_periodicity_within_tolerance():
    grid = make_grid(2, 4)
    green = ConsistentGreen(
        ReferenceMedium.conduction(1.0, d=2), grid, n_max=8, tol=0.1)
    for k in [(1, 0), (1, 1), (3, 2)]:
        a = green.symbol(k)
        b = green.symbol((k[0] + 4, k[1]))
        rel = np.max(np.abs(a - b)) / np.max(np.abs(a))
        assert rel < 0.1


def test_consistent_series_error_reports_estimate():
    grid = make_grid(2, 4)
    green = ConsistentGreen(
        ReferenceMedium.conduction(1.0, d=2), grid, n_max=2, tol=1e-6)
    with pytest.raises(SeriesConvergenceError) as err:
        green.symbol_table()
    assert err.value.estimate > 1e-6


def test_consistent_approaches_continuous():
    ref = ReferenceMedium.conduction(1.0, d=2)
    target = gamma_continuous([1.0, 0.0], ref.matrix)
    gaps = []
    for n in (4, 16, 64):
        green = ConsistentGreen(ref, make_grid(2, n), n_max=8, tol=0.1)
        gaps.append(np.max(np.abs(green.symbol((1, 0)) - target)))
    assert gaps[2] < gaps[0]
    assert gaps[2] < 0.02


# ---------------------------------------------------- shared symbol structure


def _variant_cases():
    cases = []
    for d, n in [(1, 4), (1, 5), (2, 4), (2, 5), (3, 4)]:
        cases.append(("conduction", d, n))
        if d > 1:
            cases.append(("elasticity", d, n))
    return cases


@pytest.mark.parametrize("kind", ["truncated", "filtered", "fd", "consistent"])
@pytest.mark.parametrize("physics,d,n", _variant_cases())
def test_symbol_structure_sweep(kind, physics, d, n):
    grid = make_grid(d, n)
    if physics == "conduction":
        ref = ReferenceMedium.conduction(1.5, d=d)
    else:
        ref = ReferenceMedium.elasticity(1.2, 0.27)
    opts = {"n_max": 3, "tol": 1.0} if kind == "consistent" else {}
    green = make_green(kind, ref, grid, **opts)
    table = green.symbol_table()
    assert table.shape == grid.shape + (green.m, green.m)
    # zero mean mode, exactly
    assert np.all(table[(0,) * d] == 0.0)
    # Hermitian per frequency, PSD, conjugate-symmetric across the table
    assert hermitian_residue(table) < 1e-12 * max(1.0, np.abs(table).max())
    eigs = np.linalg.eigvalsh(table)
    assert eigs.min() > -1e-12 * max(1.0, np.abs(table).max())
    assert mirror_residue(table, d) < 1e-12 * max(1.0, np.abs(table).max())


def test_make_green_rejects_unknown_kind_and_bad_dim():
    grid = make_grid(2, 4)
    ref = ReferenceMedium.conduction(1.0, d=2)
    with pytest.raises(ValueError):
        make_green("spectral", ref, grid)
    with pytest.raises(ValueError):
        make_green("fd", ReferenceMedium.elasticity(1.0, 0.3), make_grid(1, 4))
    with pytest.raises(ValueError):
        make_green("fd", ReferenceMedium.conduction(1.0, d=3), grid)
