"""Implicit-Euler time stepping and long-time decay measurement.

One step solves (I + dt*A(t+dt)) u_new = u + dt*f(t+dt).  The step matrix
inherits the M-matrix property for every dt > 0, so the scheme is
unconditionally monotone: ordered data stay ordered, and with
time-independent data the error u - v obeys the homogeneous recurrence
exactly and contracts in the sup norm.

Time-dependent data decay exponentially toward their stationary limits:
the coefficient and forcing carry multiplicative e^{-rate t} perturbations
and the family may modulate its radius law the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .elliptic import EllipticProblem, _solve_linear, solve
from .errors import ConfigurationError, NumericalError
from .operator import GridFunction, assemble

__all__ = [
    "ParabolicProblem",
    "Trajectory",
    "DecayFit",
    "WeightedDecayVerdict",
    "step",
    "evolve",
    "decay_rate",
    "weighted_decay_check",
]

SNAPSHOT_CAP = 200
STATIONARY_STOP = 1e-12


@dataclass
class ParabolicProblem:
    """Initial-boundary value problem with exponentially settling data.

    Stationary data: ``profile`` (coefficient) and ``f_stat`` (forcing).
    Perturbations: profile.time_amplitude/time_rate on h, ``f_pert`` with
    ``decay_rate`` on f, family.time on the radius law.  Certificates for
    the initial datum and the data decay are measured on construction.
    """

    grid: object
    family: object
    params: object
    profile: object
    f_stat: GridFunction
    u0: GridFunction
    T: float
    dt: float
    f_pert: GridFunction = None
    decay_rate: float = 0.0
    eta_1: float = None
    eta_2: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = self.params.s
        self.eta_1 = float(self.eta_1 if self.eta_1 is not None else s)
        self.eta_2 = float(self.eta_2 if self.eta_2 is not None else s)
        for name, eta in (("eta_1", self.eta_1), ("eta_2", self.eta_2)):
            if not 0 < eta < 2 * s:
                raise ConfigurationError(f"{name} must lie in (0, 2s), got {eta}")
        if self.dt <= 0:
            raise ConfigurationError("time step must be positive")
        if self.T <= 0:
            raise ConfigurationError("horizon must be positive")
        ii = self.grid.interior_idx
        d = self.grid.d[ii]
        self.meta["C_u0"] = float(np.max(np.abs(self.u0.values[ii]) * d ** (-self.eta_1),
                                         initial=0.0))
        self.meta["data_rate"] = self.data_rate()
        rate = self.meta["data_rate"]
        samples = [0.0] if math.isinf(rate) else [0.0, 1.0 / rate, 3.0 / rate]
        c1 = 0.0
        h_base = None
        if self.profile.time_amplitude:
            h_base = self.profile.base_values(self.grid, self.params)[ii]
        for t in samples:
            pert = np.zeros(ii.size)
            if self.f_pert is not None:
                pert += np.abs(self.f_pert.values[ii]) * math.exp(-self.decay_rate * t)
            if h_base is not None:
                pert += np.abs(self.profile.time_factor(t) - 1.0) * h_base
            weighted = pert * d ** (2 * s - self.eta_2) * math.exp(rate * t) \
                if not math.isinf(rate) else pert * d ** (2 * s - self.eta_2)
            c1 = max(c1, float(np.max(weighted, initial=0.0)))
        self.meta["C_1"] = c1
        self.meta["C_2"] = self._measure_set_decay(samples)

    def _measure_set_decay(self, samples):
        """Certificate for |Omega(t,x) symdiff Omega(x)| d^{-N-eta_2} e^{rate t}."""
        if self.family.time is None:
            return 0.0
        grid = self.grid
        cell = grid.dx**grid.dim
        rate = self.meta["data_rate"]
        c2 = 0.0
        probe = grid.interior_idx[:: max(1, grid.n_interior // 24)]
        for t in samples:
            for i in probe:
                now = self.family.member_mask(grid, i, t)
                limit = self.family.member_mask(grid, i, None)
                vol = float(np.logical_xor(now, limit).sum()) * cell
                weighted = vol * grid.d[i] ** (-grid.dim - self.eta_2)
                if not math.isinf(rate):
                    weighted *= math.exp(rate * t)
                c2 = max(c2, weighted)
        return c2

    def data_rate(self):
        """Slowest decay rate among the time-dependent data pieces."""
        rates = []
        if self.f_pert is not None and np.any(self.f_pert.values):
            rates.append(self.decay_rate)
        if self.profile.time_amplitude:
            rates.append(self.profile.time_rate)
        if self.family.time is not None and self.family.time.amplitude:
            rates.append(self.family.time.rate)
        return min(rates) if rates else math.inf

    @property
    def stationary_assembly(self):
        return self.family.time is None

    def forcing_at(self, t):
        vals = self.f_stat.values
        if self.f_pert is not None:
            vals = vals + self.f_pert.values * math.exp(-self.decay_rate * t)
        return vals

    def operator_at(self, t, cache=None):
        """Operator at time t; the nonlocal part is cached when the family
        is stationary (only the diagonal h varies)."""
        if cache is not None and self.stationary_assembly:
            base = cache.get("base_op")
            if base is None:
                base = assemble(self.grid, self.family, self.params, self.profile)
                cache["base_op"] = base
                cache["h_base"] = base.h / self.profile.time_factor(None)
            factor = self.profile.time_factor(t)
            op = _with_diagonal(base, cache["h_base"] * factor)
            return op
        return assemble(self.grid, self.family, self.params, self.profile, t)


def _with_diagonal(op, h_new):
    from .operator import DiscreteOperator

    return DiscreteOperator(
        grid=op.grid, family=op.family, params=op.params,
        h=np.asarray(h_new, dtype=float), L=op.L,
        node_index=op.node_index, is_dense=op.is_dense,
        meta=dict(op.meta, row_dominance_margin=float(np.min(h_new))),
    )


def step(problem, u, t, cache=None):
    """One implicit Euler step from t to t + dt.

    The step matrix I + dt*A(t+dt) keeps nonpositive off-diagonal entries
    and diagonal dominance margin 1 + dt*h > 1 for any dt > 0.
    """
    dt = problem.dt
    t_next = t + dt
    op = problem.operator_at(t_next, cache)
    rows = op.node_index
    rhs = u.values[rows] + dt * problem.forcing_at(t_next)[rows]
    frozen = (cache is not None and problem.stationary_assembly
              and not problem.profile.time_amplitude)
    if frozen and "step_lu" in cache:
        lu = cache["step_lu"]
        u_new = sla.lu_solve(lu, rhs)
    else:
        if op.is_dense:
            mat = np.eye(op.n) + dt * op.A
            if frozen:
                cache["step_lu"] = sla.lu_factor(mat)
                u_new = sla.lu_solve(cache["step_lu"], rhs)
            else:
                u_new = sla.solve(mat, rhs)
        else:
            mat = (sp.eye(op.n) + dt * op.A).tocsr()
            u_new = _solve_linear(op, None, mat, rhs)
        res = None
        if not frozen:
            res = float(np.linalg.norm(mat @ u_new - rhs))
            if res > 1e-9 * max(1.0, float(np.linalg.norm(rhs))):
                raise NumericalError("implicit Euler solve residual too large",
                                     residual=res)
    full = np.zeros(problem.grid.n_nodes)
    full[rows] = u_new
    return GridFunction(problem.grid, full)


@dataclass(frozen=True)
class Trajectory:
    """Decimated snapshots with sup-norm distances to the stationary state."""

    stamps: np.ndarray
    snapshots: np.ndarray       # (n_stamps, n_nodes) full-lattice values
    sup_distances: np.ndarray
    stationary: GridFunction

    def __post_init__(self):
        if not np.all(np.diff(self.stamps) > 0):
            raise ConfigurationError("trajectory stamps must be strictly increasing")

    def snapshot(self, k):
        return GridFunction(self.stationary.grid, self.snapshots[k])


def stationary_solution(problem, cache=None):
    """Elliptic solution of the limiting (t -> infinity) data."""
    op = problem.operator_at(None, cache)
    prob = EllipticProblem(operator=op, f=problem.f_stat, lam=0.0,
                           eta_f=problem.eta_2)
    return solve(prob)


def evolve(problem, t_max=None):
    """March the problem to its horizon (or to numerical stationarity).

    An infinite horizon runs until the sup distance to the stationary
    solution falls below 1e-12 of its norm, capped at ``t_max``.
    """
    cache = {}
    v = stationary_solution(problem, cache)
    v_norm = max(v.sup_norm(), 1e-300)
    horizon = problem.T
    if math.isinf(horizon):
        if t_max is None:
            raise ConfigurationError("an infinite horizon needs t_max")
        horizon = t_max
    n_steps = int(math.ceil(horizon / problem.dt - 1e-12))
    want = min(SNAPSHOT_CAP, n_steps + 1)
    keep = set(np.unique(np.round(np.linspace(0, n_steps, want)).astype(int)).tolist())

    u = problem.u0
    stamps = [0.0]
    snaps = [u.values.copy()]
    dists = [float(np.abs(u.values - v.values).max())]
    t = 0.0
    for k in range(1, n_steps + 1):
        u = step(problem, u, t, cache)
        t = k * problem.dt
        dist = float(np.abs(u.values - v.values).max())
        if k in keep or k == n_steps:
            stamps.append(t)
            snaps.append(u.values.copy())
            dists.append(dist)
        if math.isinf(problem.T) and dist <= STATIONARY_STOP * v_norm:
            if stamps[-1] != t:
                stamps.append(t)
                snaps.append(u.values.copy())
                dists.append(dist)
            break
    return Trajectory(stamps=np.asarray(stamps),
                      snapshots=np.asarray(snaps),
                      sup_distances=np.asarray(dists),
                      stationary=v)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    n_points: int
    window: tuple


def decay_rate(traj, stationary, window):
    """Least-squares decay rate of log sup-distance over a time window.

    Stamps whose distance sits at the round-off floor are rejected: fitting
    noise would fake an arbitrary rate.
    """
    t0, t1 = window
    sel = (traj.stamps >= t0) & (traj.stamps <= t1)
    if sel.sum() < 2:
        raise ConfigurationError("decay window needs at least two stamps")
    dists = np.array([
        float(np.abs(traj.snapshots[k] - stationary.values).max())
        for k in np.flatnonzero(sel)
    ])
    floor = 1e-13 * max(stationary.sup_norm(), 1.0)
    if np.any(dists <= floor):
        raise ConfigurationError(
            "window rejected: distances at the round-off floor"
        )
    ts = traj.stamps[sel]
    slope, intercept = np.polyfit(ts, np.log(dists), 1)
    return DecayFit(rate=float(-slope), intercept=float(intercept),
                    n_points=int(sel.sum()), window=(float(t0), float(t1)))


@dataclass(frozen=True)
class WeightedDecayVerdict:
    C: float
    node: int
    stamp: float
    stable: bool
    ok: bool


def weighted_decay_check(traj, stationary, eta, lam):
    """Smallest constant with |u(t,x) - v(x)| <= C d(x)^eta e^(-lam t).

    Pass requires a finite constant that stays stable when measured on the
    growing trajectory (the second half must not inflate it by more than
    a factor 1.01 relative to the first).
    """
    grid = stationary.grid
    ii = grid.interior_idx
    d_eta = grid.d[ii] ** eta
    best = 0.0
    best_node = -1
    best_stamp = 0.0
    half = traj.stamps[-1] / 2.0
    c_half = 0.0
    for k, t in enumerate(traj.stamps):
        w = np.abs(traj.snapshots[k][ii] - stationary.values[ii])
        ratio = w / d_eta * math.exp(lam * t)
        j = int(np.argmax(ratio))
        if ratio[j] > best:
            best = float(ratio[j])
            best_node = int(ii[j])
            best_stamp = float(t)
        if t <= half:
            c_half = max(c_half, float(ratio[j]))
    stable = best <= c_half * 1.01 + 1e-12
    return WeightedDecayVerdict(C=best, node=best_node, stamp=best_stamp,
                                stable=stable, ok=math.isfinite(best) and stable)
