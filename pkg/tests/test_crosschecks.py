"""Cross-route checks that tie independent computations together."""

import math

import numpy as np
import pytest

from varfrac.geometry import (
    Ball,
    DomainFamily,
    Interval,
    Polygon,
    SigmaSpec,
    TimeDecay,
    build_grid,
)
from varfrac.operator import (
    CoefficientProfile,
    FracParams,
    GridFunction,
    assemble,
    kernel_weights,
    killing_term,
    kinetic_coefficient,
    omega_surface,
)

from conftest import L_SHAPE


def test_kinetic_crosscheck_star_complement_on_lshape():
    # a(x)/Gamma(2s+1) equals the kernel mass of the star-set complement;
    # independent route: midpoint lattice sum over (domain \ star set)
    # plus the radial-exact exterior mass
    s = 0.5
    poly = Polygon(L_SHAPE)
    g = build_grid(poly, 1.0 / 20)
    params = FracParams(s=s)
    a = kinetic_coefficient(g, poly, params, n_angles=1024)
    k = killing_term(g, poly, params, n_angles=1024)
    fam = DomainFamily(rule="star_shaped", sigma=SigmaSpec(), zeta=0.3)
    gam = math.gamma(2 * s + 1)
    # probe nodes deep in a leg, where the star set is a proper subset
    for target in ((0.85, 0.2), (0.2, 0.85)):
        i = int(np.argmin(np.linalg.norm(g.coords - np.asarray(target), axis=1)))
        assert g.interior[i]
        mask = fam.member_mask(g, i)
        shadow = g.interior & ~mask
        shadow[i] = False
        z = np.linalg.norm(g.coords[shadow] - g.coords[i], axis=1)
        inside_part = float((g.dx**2 / z ** (2 + 2 * s)).sum())
        complement = inside_part + k.values[i]
        assert a.values[i] == pytest.approx(gam * complement, rel=0.05)
        assert complement > k.values[i]  # the notch genuinely shadows the node


def test_assemble_matches_bruteforce_2d():
    g = build_grid(Ball((0.0, 0.0), 1.0), 2.0 / 10)
    s = 0.5
    fam = DomainFamily(rule="constant", sigma=SigmaSpec(), zeta=0.3)
    op = assemble(g, fam, FracParams(s=s), CoefficientProfile(kind="synthetic"))
    dx = g.dx
    n = g.n_interior
    L = np.zeros((n, n))
    coords = g.coords
    for a_row, i in enumerate(g.interior_idx):
        x = coords[i]
        w = {}
        shell = []
        for j in g.interior_idx:
            if j == i:
                continue
            r = float(np.linalg.norm(coords[j] - x))
            if r > 2 * dx * (1 + 1e-9):
                w[j] = dx**2 / r ** (2 + 2 * s)
            else:
                shell.append((j, r))
        paired, unpaired = [], []
        for j, r in shell:
            mirror = 2 * x - coords[j]
            hit = [jj for jj, _ in shell
                   if np.linalg.norm(coords[jj] - mirror) < 1e-12]
            (paired if hit else unpaired).append((j, r))
        for j, r in unpaired:
            w[j] = dx**2 / r ** (2 + 2 * s)
        if paired:
            rp = min(2 * dx, max(r for _, r in paired) + dx / 2)
            mass = 2 * math.pi * rp ** (2 - 2 * s) / (2 - 2 * s)
            ps = np.array([dx**2 * r ** (-2 * s) for _, r in paired])
            ps /= ps.sum()
            for (j, r), p in zip(paired, ps):
                w[j] = w.get(j, 0.0) + mass * p / r**2
        for j, wj in w.items():
            b = g.interior_pos[j]
            L[a_row, b] -= wj
            L[a_row, a_row] += wj
    assert np.allclose(op.dense() - np.diag(op.h), L, rtol=1e-12, atol=1e-12)


def test_membership_with_time_modulated_radius(grid_1d):
    fam = DomainFamily(rule="ball_radius", sigma=SigmaSpec(), zeta=0.3,
                       rho=lambda d, x: 0.1,
                       time=TimeDecay(amplitude=1.0, rate=2.0))
    i = grid_1d.interior_idx[len(grid_1d.interior_idx) // 2]
    early = fam.member_mask(grid_1d, i, t=0.0)      # radius 0.2
    late = fam.member_mask(grid_1d, i, t=50.0)      # radius ~0.1
    assert early.sum() > late.sum()
    dist = np.abs(grid_1d.coords[:, 0] - grid_1d.coords[i, 0])
    assert np.array_equal(late, grid_1d.interior & (dist < fam.radius_at(grid_1d, i, 50.0))
                          & (np.arange(grid_1d.n_nodes) != i))


def test_dense_oracle_skipped_above_limit(op_1d, monkeypatch):
    import varfrac.spectral as spectral

    monkeypatch.setattr(spectral, "DENSE_ORACLE_LIMIT", 10)
    with pytest.warns(RuntimeWarning, match="dense oracle skipped"):
        out = spectral.dense_eigen_oracle(op_1d)
    assert out is None
    res = spectral.principal_eigen(op_1d, tol=1e-10)
    assert res.oracle_lam is None and res.simplicity_gap is None


def test_evolve_infinite_horizon_stops_at_stationarity(op_1d):
    from varfrac.parabolic import ParabolicProblem, evolve

    grid = op_1d.grid
    prob = ParabolicProblem(grid=grid, family=op_1d.family, params=op_1d.params,
                            profile=CoefficientProfile(kind="killing"),
                            f_stat=GridFunction(grid, np.where(grid.interior, 1.0, 0.0)),
                            u0=GridFunction.zeros(grid),
                            T=math.inf, dt=0.01)
    traj = evolve(prob, t_max=40.0)
    v_norm = traj.stationary.sup_norm()
    assert traj.sup_distances[-1] <= 1e-12 * v_norm
    assert traj.stamps[-1] < 40.0  # stopped early, not at the cap


def test_masked_cone_family_assembles_and_solves():
    # the cone-mask family: membership is the translated double cone, the
    # shell correction carries the measured angular density
    s = 0.5
    g = build_grid(Ball((0.0, 0.0), 1.0), 2.0 / 16)
    sig = SigmaSpec(kind="double_cone", axes=((1.0, 0.0),),
                    half_angles=(math.pi / 3,), q=0.5)
    fam = DomainFamily(rule="masked", sigma=sig, zeta=0.3)
    op = assemble(g, fam, FracParams(s=s), CoefficientProfile(kind="killing", n_angles=256))
    dense = op.dense()
    off = dense - np.diag(np.diag(dense))
    assert off.max() <= 0
    assert op.meta["row_dominance_margin"] > 0
    mid = int(np.argmin(np.linalg.norm(g.coords, axis=1)))
    row = kernel_weights(g, fam, FracParams(s=s), mid,
                         density=sig.angular_density(2))
    expected = sig.angular_density(2) * omega_surface(2) \
        * (2 * g.dx) ** (2 - 2 * s) / (2 - 2 * s)
    assert row.pair_mass == pytest.approx(expected, rel=1e-12)
    u = np.linalg.solve(dense, np.ones(op.n))
    assert np.all(u > 0)


def test_readme_config_example_parses(tmp_path):
    # the annotated example in the README must stay loadable
    import re
    from pathlib import Path

    from varfrac.config import load_config

    readme = Path(__file__).resolve().parent.parent / "README.md"
    blocks = re.findall(r"```ini\n(.*?)```", readme.read_text(), re.S)
    assert blocks, "README lost its annotated config example"
    p = tmp_path / "readme.cfg"
    p.write_text(blocks[0])
    cfg = load_config(str(p))
    grid = cfg.build_grid()
    cfg.build_family()
    cfg.build_profile(grid)
    cfg.build_forcing(grid)


def test_fractional_laplacian_constant_on_sprofile():
    # (1 - x^2)^s extended by zero has a constant full-space PV integral
    # inside (-1, 1); pin the value with an adaptive-quadrature oracle and
    # check constancy of the lattice route away from the boundary
    import scipy.integrate as integrate

    from varfrac.operator import fractional_laplacian_apply

    s = 0.5
    g = build_grid(Interval(-1.0, 1.0), 2.0 / 512)
    params = FracParams(s=s)
    prof = lambda y: np.maximum(1.0 - np.asarray(y) ** 2, 0.0) ** s
    u = GridFunction(g, np.where(g.interior, prof(g.coords[:, 0]), 0.0))
    nodes = g.interior_idx[np.abs(g.coords[g.interior_idx, 0]) < 0.6]
    vals = fractional_laplacian_apply(g, params, u, nodes=nodes)

    def oracle(x):
        def integrand(z):
            return (2 * prof(x) - prof(x + z) - prof(x - z)) / z ** (1 + 2 * s)

        splits = sorted({1.0 - x, 1.0 + x})
        total, err = integrate.quad(integrand, 0.0, 4.0, points=[0.0] + splits,
                                    limit=400)
        tail = prof(x) * (4.0 ** (-2 * s)) / (2 * s) * 2
        return total + tail, err

    ref, err = oracle(0.0)
    assert err < 1e-8
    ref_half, _ = oracle(0.5)
    assert ref_half == pytest.approx(ref, rel=1e-8)  # the profile is exact
    assert np.abs(vals - ref).max() <= 0.02 * abs(ref)


def test_gridfunction_from_callable(grid_1d):
    u = GridFunction.from_callable(grid_1d, lambda c: np.sin(c[:, 0]))
    assert np.all(u.values[~grid_1d.interior] == 0.0)
    i = grid_1d.interior_idx[5]
    assert u.values[i] == pytest.approx(math.sin(grid_1d.coords[i, 0]))


def test_shell_cap_limits_pair_mass(grid_1d):
    # interaction radius between dx and 2dx: the correction mass shrinks to
    # the covered ball instead of assuming the full shell
    s = 0.5
    rho = 1.6 * grid_1d.dx
    fam = DomainFamily(rule="ball_radius", sigma=SigmaSpec(), zeta=0.3,
                       rho=lambda d, x: rho)
    i = grid_1d.interior_idx[len(grid_1d.interior_idx) // 2]
    row = kernel_weights(grid_1d, fam, FracParams(s=s), i)
    expected = omega_surface(1) * (1.5 * grid_1d.dx) ** (2 - 2 * s) / (2 - 2 * s)
    assert row.pair_mass == pytest.approx(expected, rel=1e-12)
    assert row.far_idx.size == 0
