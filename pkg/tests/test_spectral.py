import numpy as np
import pytest

from varfrac.errors import OracleMismatchError, SpectralShiftError
from varfrac.geometry import DomainFamily, SigmaSpec
from varfrac.operator import (
    CoefficientProfile,
    DiscreteOperator,
    FracParams,
    GridFunction,
    assemble,
    localize,
)
from varfrac.spectral import (
    check_simplicity,
    dense_eigen_oracle,
    principal_eigen,
    probe_E,
    solve_below_lambda,
)


def ones_f(grid):
    return GridFunction(grid, np.where(grid.interior, 1.0, 0.0))


def diag_operator(grid, family, h):
    return DiscreteOperator(grid=grid, family=family, params=FracParams(s=0.5),
                            h=np.asarray(h, dtype=float),
                            L=np.zeros((len(h), len(h))),
                            node_index=grid.interior_idx.copy(), is_dense=True)


class TestPrincipalEigen:
    def test_diag_only_gives_min_h_and_peak(self, grid_1d, const_family):
        n = grid_1d.n_interior
        h = np.linspace(2.0, 5.0, n)
        h[n // 3] = 1.25  # unique minimum
        op = diag_operator(grid_1d, const_family, h)
        res = principal_eigen(op, tol=1e-13)
        assert res.lam == pytest.approx(1.25, rel=1e-9)
        phi = res.phi.values[op.node_index]
        assert int(np.argmax(phi)) == n // 3
        assert phi[n // 3] == pytest.approx(1.0)

    def test_matches_dense_oracle(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        assert res.oracle_lam is not None
        assert abs(res.lam - res.oracle_lam) <= 1e-8 * abs(res.oracle_lam)
        assert res.positivity > 0
        assert res.lam > 0
        assert res.phi.values[op_1d.node_index].max() == pytest.approx(1.0)

    def test_scaling_doubles_lambda_keeps_phi(self, op_1d):
        res1 = principal_eigen(op_1d, tol=1e-12)
        doubled = DiscreteOperator(
            grid=op_1d.grid, family=op_1d.family, params=op_1d.params,
            h=2 * op_1d.h, L=2 * op_1d.L,
            node_index=op_1d.node_index.copy(), is_dense=op_1d.is_dense)
        res2 = principal_eigen(doubled, tol=1e-12)
        assert res2.lam == pytest.approx(2 * res1.lam, rel=1e-8)
        p1 = res1.phi.values[op_1d.node_index]
        p2 = res2.phi.values[op_1d.node_index]
        assert np.abs(p1 - p2).max() <= 1e-7

    def test_oracle_mismatch_raises(self, op_1d, monkeypatch):
        import varfrac.spectral as spectral

        def fake_oracle(op, force=False):
            vals, vecs = dense_eigen_oracle.__wrapped__(op) if hasattr(
                dense_eigen_oracle, "__wrapped__") else (None, None)
            return np.array([1e3 + 0j]), np.eye(op.n, 1)

        monkeypatch.setattr(spectral, "dense_eigen_oracle", fake_oracle)
        with pytest.raises(OracleMismatchError):
            spectral.principal_eigen(op_1d, tol=1e-12)

    def test_perron_frobenius_structure(self, op_1d):
        vals, vecs = dense_eigen_oracle(op_1d)
        lam0 = vals[0]
        assert abs(lam0.imag) < 1e-10
        assert lam0.real > 0
        vec = vecs[:, 0].real
        vec *= np.sign(vec[np.argmax(np.abs(vec))])
        assert np.all(vec > -1e-12 * np.abs(vec).max())
        # simple: no other eigenvalue shares the smallest real part
        assert vals[1].real - lam0.real > 1e-10


class TestProbeE:
    def test_zero_shift_solvable(self, op_1d):
        probe = probe_E(op_1d, ones_f(op_1d.grid), [0.0])
        assert probe.outcomes == ("solvable_positive",)

    def test_monotone_outcomes_and_bracket(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        lams = np.linspace(0.0, 1.3 * res.lam, 14)
        probe = probe_E(op_1d, ones_f(op_1d.grid), lams)
        assert probe.monotone
        kinds = list(probe.outcomes)
        first_bad = next(i for i, k in enumerate(kinds) if k != "solvable_positive")
        assert all(k == "solvable_positive" for k in kinds[:first_bad])
        lo, hi = probe.bracket()
        assert lo < res.lam <= hi + 1e-9

    def test_norm_increases_toward_lambda_bar(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        lams = np.linspace(0.0, 0.999 * res.lam, 12)
        probe = probe_E(op_1d, ones_f(op_1d.grid), lams)
        norms = np.array(probe.sup_norms)
        assert np.all(np.diff(norms) > 0)

    def test_bracket_is_forcing_independent(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        lams = np.linspace(0.8 * res.lam, 1.2 * res.lam, 21)
        grid = op_1d.grid
        f = ones_f(grid)
        g = GridFunction(grid, np.where(grid.interior,
                                        1.0 + grid.coords[:, 0] ** 2, 0.0))
        b1 = probe_E(op_1d, f, lams).bracket()
        b2 = probe_E(op_1d, g, lams).bracket()
        cell = lams[1] - lams[0]
        assert abs(b1[0] - b2[0]) <= cell + 1e-12
        assert abs(b1[1] - b2[1]) <= cell + 1e-12


class TestSimplicity:
    def test_simple_instances(self, op_1d, op_2d):
        for op in (op_1d, op_2d):
            res = principal_eigen(op, tol=1e-12)
            verdict = check_simplicity(res, op)
            assert verdict.ok
            assert verdict.rank_deficiency == 1
            assert verdict.multiplicity == 1
            assert verdict.bestfit_residual <= 1e-8

    def test_ball_radius_family_simple(self, grid_1d):
        fam = DomainFamily(rule="ball_radius", sigma=SigmaSpec(), zeta=0.3,
                           rho=lambda d, x: 0.35 * max(d, 1e-12) + 0.05)
        op = assemble(grid_1d, fam, FracParams(s=0.5),
                      CoefficientProfile(kind="killing"))
        res = principal_eigen(op, tol=1e-12)
        assert check_simplicity(res, op).ok

    def test_constructed_degeneracy_flagged(self, grid_1d, const_family):
        h = np.full(grid_1d.n_interior, 3.0)
        h[4] = h[11] = 1.0  # two equal minima: eigenvalue is not simple
        op = diag_operator(grid_1d, const_family, h)
        res = principal_eigen(op, tol=1e-13)
        verdict = check_simplicity(res, op)
        assert not verdict.ok
        assert verdict.multiplicity >= 2


class TestSolveBelowLambda:
    def test_zero_shift_reduces_to_plain_solve(self, op_1d):
        from varfrac.elliptic import EllipticProblem, solve

        f = ones_f(op_1d.grid)
        u1 = solve_below_lambda(op_1d, 0.0, f)
        u2 = solve(EllipticProblem(operator=op_1d, f=f))
        assert np.abs(u1.values - u2.values).max() <= 1e-10 * u2.sup_norm()

    def test_half_lambda_positive_solution(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        f = ones_f(op_1d.grid)
        u = solve_below_lambda(op_1d, 0.5 * res.lam, f)
        assert np.all(u.values[op_1d.node_index] > 0)

    def test_dense_lu_oracle_residual(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        lam = 0.5 * res.lam
        f = ones_f(op_1d.grid)
        u = solve_below_lambda(op_1d, lam, f)
        rows = op_1d.node_index
        oracle = np.linalg.solve(op_1d.dense() - lam * np.eye(op_1d.n),
                                 f.values[rows])
        assert np.abs(u.values[rows] - oracle).max() <= 1e-10 * np.abs(oracle).max()

    def test_shift_above_lambda_rejected(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        with pytest.raises(SpectralShiftError):
            solve_below_lambda(op_1d, 1.1 * res.lam, ones_f(op_1d.grid))


class TestMonotonicityAndRefinedMax:
    def test_lambda_monotone_under_localization(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        grid = op_1d.grid
        x = grid.coords[:, 0]
        for radius in (0.35, 0.25, 0.15):
            sel = grid.interior_idx[np.abs(x[grid.interior_idx] - 0.5) < radius]
            loc = localize(op_1d, sel)
            res_loc = principal_eigen(loc, tol=1e-12)
            assert res_loc.lam >= res.lam - 1e-10
            res = res_loc  # nested balls: lambda increases inward

    def test_refined_maximum_principle_analog(self, op_1d):
        res = principal_eigen(op_1d, tol=1e-12)
        lam = 0.6 * res.lam
        rng = np.random.default_rng(11)
        A = op_1d.dense()
        n = op_1d.n
        shifted = A - lam * np.eye(n)
        inv = np.linalg.inv(shifted)
        for _ in range(25):
            # v = (A - lam)^{-1} g with g <= 0 gives A v <= lam v and v <= 0
            g = -rng.random(n)
            v = inv @ g
            assert np.all(shifted @ v <= 1e-10)
            assert np.all(v <= 1e-10)
