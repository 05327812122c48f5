import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from helmsweep.assembly import assemble_panel
from helmsweep.banded import banded_factorize, banded_solve
from helmsweep.errors import FactorizationError
from helmsweep.pml import PmlConfig
from helmsweep.problem import Grid, HelmholtzProblem


def random_banded(rng, size, kl, ku):
    dense = np.zeros((size, size), dtype=complex)
    i, j = np.indices((size, size))
    mask = (i - j <= kl) & (j - i <= ku)
    vals = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
    dense[mask] = vals
    # diagonal dominance keeps every draw well conditioned
    dense[np.diag_indices(size)] += 2.0 * (kl + ku + 2)
    return dense


def test_identity_zero_bandwidth():
    fac = banded_factorize(np.eye(4, dtype=complex), 0, 0)
    x = banded_solve(fac, np.arange(4, dtype=complex))
    assert np.array_equal(x, np.arange(4, dtype=complex))
    assert fac.lower_bw == 0 and fac.upper_bw == 0 and fac.size == 4


@pytest.mark.parametrize("size,kl,ku", [(50, 11, 11), (37, 3, 7), (8, 1, 1)])
def test_solution_matches_dense_oracle(size, kl, ku):
    rng = np.random.default_rng(size)
    A = random_banded(rng, size, kl, ku)
    fac = banded_factorize(A, kl, ku)
    b = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    x = banded_solve(fac, b)
    x_ref = la.solve(A, b)
    assert np.linalg.norm(x - x_ref) <= 1e-11 * np.linalg.norm(x_ref)


def test_sparse_input_equivalent_to_dense():
    rng = np.random.default_rng(9)
    A = random_banded(rng, 30, 4, 2)
    b = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    xd = banded_solve(banded_factorize(A, 4, 2), b)
    xs = banded_solve(banded_factorize(sp.csr_matrix(A), 4, 2), b)
    assert np.array_equal(xd, xs)


def test_toeplitz_pivot_sequence():
    # tridiagonal (-1, 2, -1): U diagonal is 2, 3/2, 4/3, ... (k+1)/k
    size = 10
    T = (np.diag(np.full(size, 2.0)) + np.diag(np.full(size - 1, -1.0), 1)
         + np.diag(np.full(size - 1, -1.0), -1))
    fac = banded_factorize(T, 1, 1)
    udiag = fac.lu[fac.lower_bw + fac.upper_bw, :].real
    expect = np.array([(k + 2) / (k + 1) for k in range(size)])
    assert np.abs(udiag - expect).max() < 1e-14


def test_zero_rhs():
    rng = np.random.default_rng(2)
    A = random_banded(rng, 12, 2, 2)
    fac = banded_factorize(A, 2, 2)
    assert np.all(banded_solve(fac, np.zeros(12, dtype=complex)) == 0)


def test_multiply_then_solve_roundtrip():
    rng = np.random.default_rng(3)
    A = random_banded(rng, 64, 5, 5)
    fac = banded_factorize(A, 5, 5)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    got = banded_solve(fac, A @ x)
    assert np.linalg.norm(got - x) <= 1e-11 * np.linalg.norm(x)


def test_batched_rhs_matches_columnwise():
    rng = np.random.default_rng(4)
    A = random_banded(rng, 20, 3, 3)
    fac = banded_factorize(A, 3, 3)
    B = rng.standard_normal((20, 5)) + 1j * rng.standard_normal((20, 5))
    batched = banded_solve(fac, B)
    for c in range(5):
        single = banded_solve(fac, B[:, c])
        assert np.abs(batched[:, c] - single).max() <= 1e-13 * np.abs(single).max()


def test_roundtrip_property_sweep():
    rng = np.random.default_rng(7)
    for _ in range(60):
        size = int(rng.integers(5, 120))
        kl = int(rng.integers(1, min(15, size)))
        ku = int(rng.integers(1, min(15, size)))
        A = random_banded(rng, size, kl, ku)
        fac = banded_factorize(A, kl, ku)
        b = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        x = banded_solve(fac, b)
        assert (np.abs(A @ x - b).max()
                <= 1e-10 * max(np.abs(b).max(), 1e-30))


def test_every_panel_of_reference_problem_factorizes():
    # 2D n=63, moving ramp 12 layers: no pivot failure across the sweep
    n, b = 63, 12
    grid = Grid(n=n, dim=2)
    prob = HelmholtzProblem(grid=grid, omega=2 * np.pi * 8,
                            velocity=np.ones(grid.shape),
                            pml=PmlConfig.from_layers(8, grid.h), alpha=0.0,
                            boundary_mode="pml-three-sides-dirichlet-top")
    for m in range(b, n):
        panel = assemble_panel(prob, m=m, depth=b)
        fac = banded_factorize(panel.matrix_sweep_inner(), b, b)
        assert fac.size == n * b


def test_zero_pivot_error_names_row():
    A = np.diag(np.array([1.0, 0.0, 2.0], dtype=complex))
    with pytest.raises(FactorizationError) as err:
        banded_factorize(A, 0, 0)
    assert err.value.where == 1


def test_entries_outside_band_rejected():
    A = np.eye(5, dtype=complex)
    A[4, 0] = 1.0
    with pytest.raises(ValueError, match="outside declared band"):
        banded_factorize(A, 1, 1)


def test_rhs_length_checked():
    fac = banded_factorize(np.eye(4, dtype=complex), 0, 0)
    with pytest.raises(ValueError):
        banded_solve(fac, np.zeros(5, dtype=complex))


def test_nonsquare_rejected():
    with pytest.raises(ValueError):
        banded_factorize(np.ones((3, 4), dtype=complex), 1, 1)
