"""Experiment runner: parse a config, run one stage, write CSV + figure.

Exit codes: 0 success, 1 configuration error, 2 numerical/geometry error,
3 acceptance or oracle failure.  Every failure prints one machine-readable
line ``error kind=<kind> detail=<message>`` on stderr.  A manifest file is
written next to each output before the output itself.
"""

from __future__ import annotations

import argparse
import math
import sys
from importlib import resources

import numpy as np

from . import __version__
from .config import load_config
from .errors import (
    AcceptanceError,
    AssemblyError,
    BarrierFailureError,
    ConfigurationError,
    GeometryError,
    NumericalError,
    OracleMismatchError,
    VarfracError,
)
from .manifest import RunManifest
from .reporting import (
    render_field,
    render_matrix,
    render_series,
    render_summary,
    write_csv,
)

DEFAULT_CONFIG = "reference_1d.cfg"


def packaged_config(name=DEFAULT_CONFIG):
    return str(resources.files("varfrac.configs") / name)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (ConfigurationError,) as exc:
        print(f"error kind=config detail={exc}", file=sys.stderr)
        return 1
    except (GeometryError, AssemblyError, NumericalError, BarrierFailureError) as exc:
        print(f"error kind=numerical detail={exc}", file=sys.stderr)
        return 2
    except (OracleMismatchError, AcceptanceError) as exc:
        print(f"error kind=acceptance detail={exc}", file=sys.stderr)
        return 3
    except VarfracError as exc:
        print(f"error kind=numerical detail={exc}", file=sys.stderr)
        return 2


def build_parser():
    p = argparse.ArgumentParser(prog="varfrac",
                                description="variable-domain nonlocal operator lab")
    p.add_argument("--version", action="version", version=f"varfrac {__version__}")
    sub = p.add_subparsers(dest="command")
    p.set_defaults(command=None)

    def add(name, fn, **extra):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="experiment config file")
        sp.add_argument("--out", default=f"{name}.csv", help="output CSV path")
        sp.add_argument("--no-figures", action="store_true",
                        help="skip rendering figures next to the CSV")
        for flag, kw in extra.items():
            sp.add_argument(flag, **kw)
        sp.set_defaults(func=fn)
        return sp

    add("validate-geometry", cmd_validate_geometry)
    add("assemble", cmd_assemble)
    add("solve-elliptic", cmd_solve_elliptic)
    add("eig", cmd_eig)
    add("probe-e", cmd_probe_e,
        **{"--lambda-min": dict(type=float, default=0.0),
           "--lambda-max": dict(type=float, default=None),
           "--steps": dict(type=int, default=12)})
    add("solve-parabolic", cmd_solve_parabolic)
    add("decay-rate", cmd_decay_rate,
        **{"--window": dict(type=str, default=None, help="t0:t1")})
    sp = sub.add_parser("supconv")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", default="supconv.csv")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_supconv)
    add("verify-all", cmd_verify_all,
        **{"--fast": dict(action="store_true", help="smaller grids, same criteria")})
    return p


def _setup(args, command):
    path = args.config or packaged_config()
    cfg = load_config(path)
    manifest = RunManifest(path=str(args.out) + ".manifest",
                           config_hash=cfg.config_hash, command=command)
    return cfg, manifest


def _coord_columns(grid):
    return ["x"] if grid.dim == 1 else ["x", "y"]


def _coords_of(grid, node):
    c = grid.coords[node]
    return [float(v) for v in c]


def _figures_wanted(args, cfg):
    return cfg.figures and not args.no_figures


# ---------------------------------------------------------------------------


def cmd_validate_geometry(args):
    from .geometry import validate_family

    cfg, manifest = _setup(args, "validate-geometry")
    manifest.begin("validate")
    grid = cfg.build_grid()
    family = cfg.build_family()
    report = validate_family(family, grid, seed=cfg.seed)
    manifest.done("validate")
    manifest.register_output(args.out)
    rows = list(report.csv_rows())
    write_csv(args.out, ["node", "x", "y", "check", "pass", "value"], rows,
              manifest.config_hash,
              extra_comments=[f"family={family.rule}", f"ok={report.ok}"])
    if _figures_wanted(args, cfg):
        status = np.ones(grid.n_nodes)
        for node, _, check, passed, _ in report.rows:
            if node >= 0 and not passed:
                status[node] = 0.0
        render_field(args.out, grid, np.where(grid.interior, status, np.nan),
                     "geometry checks (1 = pass)")
    if not report.ok:
        print(f"validation violations: {len(report.violations)}", file=sys.stderr)
    return 0


def cmd_assemble(args):
    from .operator import assemble

    cfg, manifest = _setup(args, "assemble")
    manifest.begin("assemble")
    grid = cfg.build_grid()
    family = cfg.build_family()
    params = cfg.build_params()
    profile = cfg.build_profile(grid)
    op = assemble(grid, family, params, profile)
    manifest.done("assemble")
    manifest.register_output(args.out)
    # coordinate-format triplets with the build header
    dense = op.dense()
    rows = []
    for i in range(op.n):
        for j in np.flatnonzero(dense[i]):
            rows.append((i, int(j), float(dense[i, j])))
    write_csv(args.out, ["row", "col", "value"], rows, manifest.config_hash,
              extra_comments=[f"s={params.s}", f"dx={grid.dx}",
                              f"family={family.rule}", f"n={op.n}"])
    coeff_out = str(args.out).replace(".csv", "_coefficient.csv")
    manifest.register_output(coeff_out)
    crows = [(int(nd), float(h)) for nd, h in zip(op.node_index, op.h)]
    write_csv(coeff_out, ["node", "value"], crows, manifest.config_hash)
    if _figures_wanted(args, cfg):
        render_matrix(args.out, dense, f"A = diag(h) + L  (n={op.n})")
        render_field(coeff_out, grid, grid.embed(op.h), "coefficient h")
    return 0


def _build_operator(cfg):
    from .operator import assemble

    grid = cfg.build_grid()
    family = cfg.build_family()
    params = cfg.build_params()
    profile = cfg.build_profile(grid)
    return grid, family, params, profile, assemble(grid, family, params, profile)


def cmd_solve_elliptic(args):
    from .elliptic import EllipticProblem, find_barrier, solve
    from .spectral import solve_below_lambda

    cfg, manifest = _setup(args, "solve-elliptic")
    manifest.begin("assemble")
    grid, family, params, profile, op = _build_operator(cfg)
    manifest.done("assemble")
    manifest.begin("solve")
    f = cfg.build_forcing(grid)
    lam = cfg.get_float("problem", "lambda", 0.0)
    eta_f = cfg.get_float("problem", "eta_f", params.s)
    if lam == 0.0:
        u = solve(EllipticProblem(operator=op, f=f, eta_f=eta_f))
    else:
        u = solve_below_lambda(op, lam, f)
    barrier = find_barrier(op, op.meta["alpha_measured"], forcing=f)
    manifest.done("solve")
    manifest.register_output(args.out)
    cols = ["node"] + _coord_columns(grid) + ["d", "f", "u", "barrier"]
    rows = []
    for nd in op.node_index:
        rows.append((int(nd), *_coords_of(grid, nd), float(grid.d[nd]),
                     float(f.values[nd]), float(u.values[nd]),
                     float(barrier.values.values[nd])))
    write_csv(args.out, cols, rows, manifest.config_hash,
              extra_comments=[f"lambda={lam}", f"eta={barrier.eta}",
                              f"Q={barrier.Q}"])
    if _figures_wanted(args, cfg):
        render_field(args.out, grid, u.values, "elliptic solution",
                     overlay=barrier.values.values, overlay_label="barrier")
    return 0


def cmd_eig(args):
    from .spectral import check_simplicity, principal_eigen

    cfg, manifest = _setup(args, "eig")
    manifest.begin("assemble")
    grid, family, params, profile, op = _build_operator(cfg)
    manifest.done("assemble")
    manifest.begin("eigen")
    res = principal_eigen(op, tol=cfg.get_float("solver", "eig_tol", 1e-10))
    verdict = check_simplicity(res, op)
    manifest.done("eigen")
    if not verdict.ok:
        raise OracleMismatchError(
            f"principal eigenvalue failed the simplicity check: "
            f"multiplicity={verdict.multiplicity}, residual={verdict.bestfit_residual:.3g}")
    manifest.register_output(args.out)
    write_csv(args.out, ["lambda_bar", "gap", "min_phi", "iterations"],
              [(res.lam, res.simplicity_gap, res.positivity, res.iterations)],
              manifest.config_hash,
              extra_comments=[f"oracle_lambda={res.oracle_lam!r}"])
    if _figures_wanted(args, cfg):
        render_field(args.out, grid, res.phi.values,
                     f"principal eigenfunction (lambda = {res.lam:.6g})")
        trace_out = str(args.out).replace(".csv", "_trace.csv")
        manifest.register_output(trace_out)
        write_csv(trace_out, ["iteration", "lambda_estimate"],
                  list(enumerate(res.trace)), manifest.config_hash)
        render_series(trace_out, np.arange(len(res.trace)),
                      {"lambda estimate": np.asarray(res.trace)},
                      "eigenvalue iteration trace", "iteration", "lambda")
    return 0


def cmd_probe_e(args):
    from .spectral import principal_eigen, probe_E

    cfg, manifest = _setup(args, "probe-e")
    manifest.begin("assemble")
    grid, family, params, profile, op = _build_operator(cfg)
    manifest.done("assemble")
    manifest.begin("probe")
    lam_max = args.lambda_max
    if lam_max is None:
        lam_max = 1.25 * principal_eigen(
            op, tol=cfg.get_float("solver", "eig_tol", 1e-10)).lam
    lams = np.linspace(args.lambda_min, lam_max, args.steps)
    f = cfg.build_forcing(grid)
    probe = probe_E(op, f, lams)
    manifest.done("probe")
    manifest.register_output(args.out)
    rows = list(zip(probe.lambdas, probe.outcomes, probe.sup_norms))
    lo, hi = probe.bracket()
    write_csv(args.out, ["lambda", "outcome", "sup_norm"], rows,
              manifest.config_hash,
              extra_comments=[f"bracket_lo={lo!r}", f"bracket_hi={hi!r}",
                              f"cap={probe.cap!r}"])
    if _figures_wanted(args, cfg):
        render_series(args.out, np.asarray(probe.lambdas),
                      {"sup norm of v": np.asarray(probe.sup_norms)},
                      "shifted solvability probe", "lambda", "sup norm", logy=True)
    return 0


def _build_parabolic(cfg, grid, family, params, profile):
    from .parabolic import ParabolicProblem

    f_stat = cfg.build_forcing(grid)
    decay = cfg.get_float("problem", "decay_rate", 0.0)
    f_amp = cfg.get_float("problem", "f_time_amplitude", 0.0)
    f_pert = None
    if f_amp != 0.0:
        from .operator import GridFunction

        f_pert = GridFunction(grid, f_amp * f_stat.values)
    u0 = cfg.build_u0(grid)
    return ParabolicProblem(
        grid=grid, family=family, params=params, profile=profile,
        f_stat=f_stat, u0=u0,
        T=cfg.get_float("solver", "t_max", 2.0),
        dt=cfg.get_float("solver", "dt", 0.01),
        f_pert=f_pert, decay_rate=decay,
        eta_1=cfg.get_float("problem", "eta_1", params.s),
        eta_2=cfg.get_float("problem", "eta_2", params.s),
    )


def cmd_solve_parabolic(args):
    from .elliptic import find_barrier
    from .parabolic import evolve

    cfg, manifest = _setup(args, "solve-parabolic")
    manifest.begin("assemble")
    grid, family, params, profile, op = _build_operator(cfg)
    manifest.done("assemble")
    manifest.begin("evolve")
    problem = _build_parabolic(cfg, grid, family, params, profile)
    traj = evolve(problem)
    barrier = find_barrier(op, op.meta["alpha_measured"], forcing=problem.f_stat)
    lam_w = problem.meta["data_rate"]
    if not math.isfinite(lam_w):
        lam_w = 0.0
    manifest.done("evolve")
    manifest.register_output(args.out)
    rows = []
    d_eta = np.where(grid.interior, grid.d, np.nan) ** barrier.eta
    for k, t in enumerate(traj.stamps):
        w = np.abs(traj.snapshots[k] - traj.stationary.values)
        with np.errstate(invalid="ignore"):
            wc = np.nanmax(w / d_eta) * math.exp(lam_w * t)
        rows.append((float(t), float(traj.sup_distances[k]), float(wc)))
    write_csv(args.out, ["stamp", "sup_distance", "weighted_constant"], rows,
              manifest.config_hash,
              extra_comments=[f"eta={barrier.eta}", f"lambda_weight={lam_w}"])
    if _figures_wanted(args, cfg):
        dists = np.maximum(traj.sup_distances, 1e-300)
        render_series(args.out, traj.stamps, {"sup distance": dists},
                      "distance to the stationary solution", "t",
                      "sup norm", logy=True)
    return 0


def cmd_decay_rate(args):
    from .parabolic import decay_rate, evolve
    from .spectral import principal_eigen

    cfg, manifest = _setup(args, "decay-rate")
    manifest.begin("assemble")
    grid, family, params, profile, op = _build_operator(cfg)
    manifest.done("assemble")
    manifest.begin("evolve")
    problem = _build_parabolic(cfg, grid, family, params, profile)
    traj = evolve(problem)
    manifest.done("evolve")
    manifest.begin("fit")
    if args.window:
        t0, t1 = (float(tok) for tok in args.window.split(":"))
    else:
        t0, t1 = 0.25 * traj.stamps[-1], traj.stamps[-1]
    fit = decay_rate(traj, traj.stationary, (t0, t1))
    lam_bar = principal_eigen(op, tol=cfg.get_float("solver", "eig_tol", 1e-10)).lam
    manifest.done("fit")
    manifest.register_output(args.out)
    write_csv(args.out, ["t0", "t1", "fitted_rate", "lambda_bar", "data_rate"],
              [(fit.window[0], fit.window[1], fit.rate, lam_bar,
                problem.meta["data_rate"])],
              manifest.config_hash)
    if _figures_wanted(args, cfg):
        dists = np.maximum(traj.sup_distances, 1e-300)
        fit_curve = np.exp(fit.intercept - fit.rate * traj.stamps)
        render_series(args.out, traj.stamps, {"sup distance": dists},
                      f"decay fit: rate {fit.rate:.4g}", "t", "sup norm",
                      logy=True, fit=("fit", fit_curve))
    return 0


def cmd_supconv(args):
    from .vistools import sup_convolve_values

    rows_in = []
    try:
        with open(args.infile) as fh:
            header = None
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                rows_in.append([float(tok) for tok in line.split(",")])
    except OSError as exc:
        raise ConfigurationError(f"cannot read input CSV: {exc}") from exc
    if header is None or len(rows_in) == 0:
        raise ConfigurationError("input CSV carries no data rows")
    ncol = len(header)
    if ncol < 2:
        raise ConfigurationError("input CSV needs coordinates and a value column")
    data = np.asarray(rows_in)
    coords = data[:, :-1] if ncol == 2 else data[:, 1:-1]
    values = data[:, -1]
    res = sup_convolve_values(values, coords, args.eps)
    manifest = RunManifest(path=str(args.out) + ".manifest",
                           config_hash="-", command="supconv")
    manifest.begin("supconv")
    manifest.done("supconv")
    manifest.register_output(args.out)
    cols = ["node"] + [f"c{j}" for j in range(coords.shape[1])] + \
        ["value", "sup", "argopt", "control"]
    rows = []
    for i in range(len(values)):
        rows.append((i, *[float(c) for c in coords[i]], float(values[i]),
                     float(res.values[i]), int(res.argopt[i]), float(res.control[i])))
    write_csv(args.out, cols, rows, manifest.config_hash,
              extra_comments=[f"eps={args.eps}"])
    if not args.no_figures and coords.shape[1] == 1:
        order = np.argsort(coords[:, 0])
        render_series(args.out, coords[order, 0],
                      {"u": values[order], "sup-convolution": res.values[order]},
                      f"sup-convolution, eps = {args.eps}", "x", "value")
    return 0


def cmd_verify_all(args):
    from .acceptance import run_all

    cfg, manifest = _setup(args, "verify-all")
    manifest.begin("acceptance")
    results = run_all(seed=cfg.seed, fast=args.fast)
    manifest.done("acceptance")
    manifest.register_output(args.out)
    rows = [(r.index, r.name, int(r.passed), r.detail, round(r.seconds, 3))
            for r in results]
    write_csv(args.out, ["criterion", "name", "pass", "detail", "seconds"],
              rows, manifest.config_hash)
    if _figures_wanted(args, cfg):
        render_summary(args.out, [f"{r.index}: {r.name}" for r in results],
                       [r.passed for r in results], "acceptance criteria")
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] criterion {r.index}: "
              f"{r.name} -- {r.detail}")
    if not all(r.passed for r in results):
        raise AcceptanceError("one or more acceptance criteria failed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
