import time

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from helmsweep.assembly import assemble_global, assemble_panel
from helmsweep.errors import FactorizationError
from helmsweep.multifrontal import (
    mf_factorize,
    mf_solve,
    nested_dissection_order,
)
from helmsweep.oracle import exact_factorize, exact_solve
from helmsweep.pml import PmlConfig
from helmsweep.problem import Grid, HelmholtzProblem


def slab_problem(n, depth, anchor=None, dim=3, omega_cycles=3.0, b=4):
    grid = Grid(n=n, dim=dim)
    prob = HelmholtzProblem(grid=grid, omega=2 * np.pi * omega_cycles,
                            velocity=np.ones(grid.shape),
                            pml=PmlConfig.from_layers(b, grid.h), alpha=1.0,
                            boundary_mode="pml-all-sides")
    anchor = anchor if anchor is not None else n - 2
    panel = assemble_panel(prob, m=anchor, depth=depth, ramp_layers=b)
    return sp.csc_matrix(panel.matrix_sweep_inner())


class TestOrdering:
    def test_groups_partition_the_plane(self):
        for nx, ny, leaf in [(15, 15, 3), (9, 13, 4), (1, 1, 1), (2, 7, 2)]:
            ordering = nested_dissection_order(nx, ny, 1, leaf)
            allpos = np.sort(np.concatenate(ordering.groups))
            assert np.array_equal(allpos, np.arange(nx * ny))
            sizes = [g.size for g in ordering.groups]
            assert sum(sizes) == nx * ny

    def test_fifteen_square_top_separator_is_full_line(self):
        ordering = nested_dissection_order(15, 15, 1, 3)
        root = ordering.n_groups - 1
        assert ordering.parent[root] == -1
        assert ordering.groups[root].size == 15
        # the root separator is a full grid line: constant i or constant j
        pos = ordering.groups[root]
        assert (np.unique(pos % 15).size == 1) or (np.unique(pos // 15).size == 1)

    def test_single_cell_plane(self):
        ordering = nested_dissection_order(1, 1, 4, 2)
        assert ordering.n_groups == 1
        assert ordering.groups[0].tolist() == [0]

    def test_children_precede_parents(self):
        ordering = nested_dissection_order(12, 12, 2, 4)
        for g, p in enumerate(ordering.parent):
            if p >= 0:
                assert p > g

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ValueError):
            nested_dissection_order(0, 3, 1, 1)
        with pytest.raises(ValueError):
            nested_dissection_order(3, 3, 1, 0)


class TestFactorization:
    def test_diagonal_matrix_trivial_fronts(self):
        ordering = nested_dissection_order(4, 4, 2, 1)
        D = sp.diags(np.arange(1, 33, dtype=complex)).tocsc()
        fac = mf_factorize(D, ordering)
        rhs = np.ones(32, dtype=complex)
        x = mf_solve(fac, rhs)
        assert np.abs(x - 1.0 / np.arange(1, 33)).max() < 1e-14

    @pytest.mark.parametrize("n,depth", [(9, 3), (15, 4)])
    def test_panel_vs_dense_oracle(self, n, depth):
        H = slab_problem(n, depth)
        ordering = nested_dissection_order(n, n, depth, 4)
        fac = mf_factorize(H, ordering, check_fill=True)
        rng = np.random.default_rng(n)
        b = rng.standard_normal(H.shape[0]) + 1j * rng.standard_normal(H.shape[0])
        x = mf_solve(fac, b)
        x_ref = la.solve(H.toarray(), b)
        assert np.linalg.norm(x - x_ref) <= 1e-10 * np.linalg.norm(x_ref)

    def test_global_2d_operator_matches_exact_sweep(self):
        # depth-1 usage on the plain 2D five-point operator
        n = 31
        grid = Grid(n=n, dim=2)
        prob = HelmholtzProblem(grid=grid, omega=2 * np.pi * 4,
                                velocity=np.ones(grid.shape),
                                pml=PmlConfig.from_layers(6, grid.h), alpha=1.0,
                                boundary_mode="pml-all-sides")
        system = assemble_global(prob)
        fact = exact_factorize(system)
        rng = np.random.default_rng(1)
        f = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
        u_sweep = exact_solve(fact, f)
        ordering = nested_dissection_order(n, n, 1, 8)
        fac = mf_factorize(sp.csc_matrix(system.matrix), ordering)
        u_mf = mf_solve(fac, f)
        assert np.linalg.norm(u_mf - u_sweep) <= 1e-9 * np.linalg.norm(u_sweep)

    def test_solve_residual_on_reference_panel(self):
        n, b = 31, 6
        H = slab_problem(n, b, anchor=n - 2, b=b)
        ordering = nested_dissection_order(n, n, b, 8)
        fac = mf_factorize(H, ordering)
        rng = np.random.default_rng(0)
        rhs = rng.standard_normal(H.shape[0]) + 1j * rng.standard_normal(H.shape[0])
        x = mf_solve(fac, rhs)
        assert (np.abs(H @ x - rhs).max()
                <= 1e-9 * np.abs(rhs).max())

    def test_zero_rhs(self):
        H = slab_problem(7, 3)
        fac = mf_factorize(H, nested_dissection_order(7, 7, 3, 4))
        assert np.all(mf_solve(fac, np.zeros(H.shape[0], complex)) == 0)

    def test_linearity(self):
        H = slab_problem(9, 3)
        fac = mf_factorize(H, nested_dissection_order(9, 9, 3, 4))
        rng = np.random.default_rng(5)
        r1 = rng.standard_normal(H.shape[0]) + 1j * rng.standard_normal(H.shape[0])
        r2 = rng.standard_normal(H.shape[0]) + 1j * rng.standard_normal(H.shape[0])
        a = 1.3 - 0.4j
        lhs = mf_solve(fac, a * r1 + r2)
        rhs = a * mf_solve(fac, r1) + mf_solve(fac, r2)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)

    def test_shape_mismatch(self):
        H = slab_problem(7, 3)
        fac = mf_factorize(H, nested_dissection_order(7, 7, 3, 4))
        with pytest.raises(ValueError):
            mf_solve(fac, np.zeros(5, complex))
        with pytest.raises(ValueError):
            mf_factorize(H, nested_dissection_order(6, 6, 3, 4))

    def test_singular_front_names_group(self):
        ordering = nested_dissection_order(3, 3, 1, 1)
        M = sp.identity(9, format="lil", dtype=complex)
        M[ordering.groups[0][0], ordering.groups[0][0]] = 0.0
        with pytest.raises(FactorizationError) as err:
            mf_factorize(M.tocsc(), ordering)
        assert err.value.where == 0


def _median_time(fn, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


@pytest.mark.slow
def test_complexity_scaling_panels():
    """Doubling the plane size grows factor work ~8x and solve work ~4x.

    The growth windows are asserted on operation counts extracted from the
    factorization actually built (elimination-front sizes), because wall
    clock per flop is not size-independent at these problem sizes: measured
    throughput on the dev box rises ~3x from the n=31 fronts to the n=127
    ones, compressing time ratios well below the work ratios.  Wall time is
    still measured and held to a loose window as a regression tripwire.
    """
    b = 6
    work_f, work_s, times_f, times_s = [], [], [], []
    for n, reps in ((31, 3), (63, 3), (127, 1)):
        H = slab_problem(n, b, anchor=n - 2, b=b)
        ordering = nested_dissection_order(n, n, b, 8)
        times_f.append(_median_time(lambda: mf_factorize(H, ordering), reps))
        fac = mf_factorize(H, ordering)
        flops = 0
        traffic = 0
        for rec in fac.records:
            k, nb = rec.gidx.size, rec.bidx.size
            flops += k**3 * 2 / 3 + k * k * nb + nb * k * nb
            traffic += rec.lu.size + 2 * rec.coupling.size
        work_f.append(flops)
        work_s.append(traffic)
        rng = np.random.default_rng(0)
        rhs = rng.standard_normal(H.shape[0]) + 1j * rng.standard_normal(H.shape[0])
        times_s.append(_median_time(lambda: mf_solve(fac, rhs), max(3, reps)))
    for small, big in zip(work_f, work_f[1:]):
        assert 6.0 <= big / small <= 12.0, f"factor work growth {big / small:.2f}"
    for small, big in zip(work_s, work_s[1:]):
        assert 3.0 <= big / small <= 6.0, f"solve work growth {big / small:.2f}"
    for small, big in zip(times_f, times_f[1:]):
        assert 3.0 <= big / small <= 16.0, f"factor time growth {big / small:.2f}"
    for small, big in zip(times_s, times_s[1:]):
        assert 2.0 <= big / small <= 16.0, f"solve time growth {big / small:.2f}"
