import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from varfrac.geometry import Interval, build_grid
from varfrac.operator import GridFunction
from varfrac.vistools import (
    inf_convolve,
    inf_convolve_values,
    semiconvexity_check,
    spacetime_sup_convolve,
    sup_convolve,
    sup_convolve_values,
)


@pytest.fixture(scope="module")
def conv_grid():
    return build_grid(Interval(-1.0, 1.0), 2.0 / 200)


class TestSupConvolve:
    def test_constant_is_fixed_point(self, conv_grid):
        u = GridFunction(conv_grid, np.full(conv_grid.n_nodes, 2.5))
        res = sup_convolve(u, 0.1)
        assert np.allclose(res.values, 2.5)
        assert np.array_equal(res.argopt, np.arange(conv_grid.n_nodes))

    def test_quadratic_envelope_closed_form(self, conv_grid):
        # continuum: sup_y { -y^2 - (x-y)^2/eps } = -x^2 / (1 + eps)
        eps = 0.1
        u = GridFunction(conv_grid, -conv_grid.coords[:, 0] ** 2)
        res = sup_convolve(u, eps)
        i = int(np.argmin(np.abs(conv_grid.coords[:, 0] - 0.5)))
        exact = -0.25 / 1.1
        cell = (1 + 1 / eps) * conv_grid.dx**2
        assert abs(res.values[i] - exact) <= cell
        assert res.values[i] == pytest.approx(-0.22727272727272727, abs=cell)

    def test_control_estimate(self, conv_grid):
        x = conv_grid.coords[:, 0]
        for fn in (np.sin(3 * x), np.abs(x) - x**2, np.cos(5 * x) * x):
            u = GridFunction(conv_grid, fn)
            for eps in (0.1, 0.01, 0.001):
                res = sup_convolve(u, eps)
                bound = res.control_bound(u.values)
                assert np.all(res.control <= bound + 1e-12)

    def test_dominates_and_monotone_in_eps(self, conv_grid):
        x = conv_grid.coords[:, 0]
        u = GridFunction(conv_grid, np.sin(4 * x))
        r1 = sup_convolve(u, 0.01)
        r2 = sup_convolve(u, 0.1)
        assert np.all(r1.values >= u.values)          # u^eps >= u
        assert np.all(r2.values >= r1.values - 1e-15)  # increasing in eps

    def test_converges_as_eps_vanishes(self, conv_grid):
        x = conv_grid.coords[:, 0]
        u = GridFunction(conv_grid, np.sin(2 * x))
        gaps = []
        for eps in (1e-1, 1e-2, 1e-3):
            res = sup_convolve(u, eps)
            gaps.append(np.abs(res.values - u.values).max())
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-2


class TestInfConvolve:
    def test_constant(self, conv_grid):
        u = GridFunction(conv_grid, np.full(conv_grid.n_nodes, -1.5))
        res = inf_convolve(u, 0.2)
        assert np.allclose(res.values, -1.5)

    def test_identity_bit_identical_to_direct_minimization(self, conv_grid):
        x = conv_grid.coords[:, 0]
        vals = np.sin(5 * x) + 0.3 * x
        res = inf_convolve_values(vals, conv_grid.coords, 0.05)
        # direct brute-force minimization oracle
        d2 = (x[:, None] - x[None, :]) ** 2
        scores = vals[None, :] + d2 / 0.05
        direct = scores.min(axis=1)
        assert np.array_equal(res.values, direct)

    def test_below_original(self, conv_grid):
        x = conv_grid.coords[:, 0]
        u = GridFunction(conv_grid, np.cos(3 * x))
        res = inf_convolve(u, 0.07)
        assert np.all(res.values <= u.values)

    @given(hnp.arrays(np.float64, st.integers(4, 40),
                      elements=st.floats(-5, 5)),
           st.floats(1e-3, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_duality_exact(self, vals, eps):
        coords = np.linspace(0.0, 1.0, vals.size).reshape(-1, 1)
        sup = sup_convolve_values(-vals, coords, eps)
        inf = inf_convolve_values(vals, coords, eps)
        assert np.array_equal(inf.values, -sup.values)


class TestSemiconvexity:
    def test_smooth_function_passes(self, conv_grid):
        x = conv_grid.coords[:, 0]
        u = GridFunction(conv_grid, np.sin(2 * x))
        res = sup_convolve(u, 0.05)
        verdict = semiconvexity_check(res, conv_grid)
        assert verdict.ok

    def test_kink_attains_sharp_bound(self, conv_grid):
        # u = -|x|: the envelope near 0 is the parabola -x^2/eps, whose
        # second difference equals -2/eps exactly
        eps = 0.2
        u = GridFunction(conv_grid, -np.abs(conv_grid.coords[:, 0]))
        res = sup_convolve(u, eps)
        verdict = semiconvexity_check(res, conv_grid)
        assert verdict.ok
        assert verdict.min_second_difference == pytest.approx(-2 / eps, rel=1e-9)

    def test_random_noise_regularized(self, conv_grid):
        rng = np.random.default_rng(21)
        u = GridFunction(conv_grid, rng.standard_normal(conv_grid.n_nodes))
        res = sup_convolve(u, 0.05)
        verdict = semiconvexity_check(res, conv_grid, tol=1e-9)
        assert verdict.ok


class TestSpaceTime:
    def test_matches_flat_product_grid(self):
        g = build_grid(Interval(0.0, 1.0), 0.05)
        stamps = np.array([0.0, 0.1, 0.2])
        snaps = np.stack([np.sin(g.coords[:, 0] + t) for t in stamps])
        res = spacetime_sup_convolve(snaps, stamps, g.coords, 0.05)
        assert res.values.shape == snaps.shape
        assert np.all(res.values >= snaps - 1e-15)
        assert np.all(res.control <= 2 * 0.05 * np.abs(snaps).max() + 1e-12)
