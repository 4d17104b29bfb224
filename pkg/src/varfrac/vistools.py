"""Sup/inf-convolution transforms and their structural estimates.

The sup-convolution u^eps(x) = max_y { u(y) - |x-y|^2/eps } is computed by
exact brute-force maximization over all nodes; no distance-transform
shortcuts, since the argmax locations feed the control estimate
|x - x^eps|^2 <= 2 eps ||u||_inf.  The inf-convolution is the exact dual
-(-u)^eps.  Semiconvexity is checked through centered second differences
against the touching-parabola bound -2/eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "ConvolutionResult",
    "SemiconvexityVerdict",
    "sup_convolve",
    "inf_convolve",
    "sup_convolve_values",
    "inf_convolve_values",
    "semiconvexity_check",
    "spacetime_sup_convolve",
]


@dataclass(frozen=True)
class ConvolutionResult:
    """Transformed values with per-node extremizer locations."""

    values: np.ndarray
    argopt: np.ndarray          # index of the extremizer node
    control: np.ndarray         # |x - x^eps|^2 (plus |t - t^eps|^2 in space-time)
    eps: float
    kind: str                   # 'sup' or 'inf'

    def control_bound(self, u_values):
        """Right-hand side of the control estimate, 2 eps ||u||_inf."""
        return 2.0 * self.eps * float(np.abs(u_values).max())


def _pairwise_sq_dist(coords):
    diff = coords[:, None, :] - coords[None, :, :]
    return (diff * diff).sum(axis=2)


def sup_convolve_values(values, coords, eps):
    """Sup-convolution of sampled values at arbitrary coordinates."""
    if eps <= 0:
        raise ConfigurationError("convolution parameter eps must be positive")
    values = np.asarray(values, dtype=float)
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[0] != values.size:
        raise ConfigurationError("values and coordinates disagree in length")
    d2 = _pairwise_sq_dist(coords)
    scores = values[None, :] - d2 / eps
    argopt = np.argmax(scores, axis=1)
    out = scores[np.arange(values.size), argopt]
    control = d2[np.arange(values.size), argopt]
    return ConvolutionResult(values=out, argopt=argopt, control=control,
                             eps=float(eps), kind="sup")


def inf_convolve_values(values, coords, eps):
    """Inf-convolution via the exact identity u_eps = -(-u)^eps."""
    res = sup_convolve_values(-np.asarray(values, dtype=float), coords, eps)
    return ConvolutionResult(values=-res.values, argopt=res.argopt,
                             control=res.control, eps=res.eps, kind="inf")


def sup_convolve(u, eps):
    """Sup-convolution of a grid function over all lattice nodes."""
    return sup_convolve_values(u.values, u.grid.coords, eps)


def inf_convolve(u, eps):
    return inf_convolve_values(u.values, u.grid.coords, eps)


@dataclass(frozen=True)
class SemiconvexityVerdict:
    ok: bool
    min_second_difference: float
    bound: float
    worst_node: int


def semiconvexity_check(result, grid, tol=1e-9):
    """Centered second differences of u^eps against the -2/eps bound.

    Checked along each axis at nodes with both lattice neighbors; the
    touching parabola of the transform has curvature -2/eps, which is the
    sharp lower bound.
    """
    if result.kind != "sup":
        raise ConfigurationError("semiconvexity applies to sup-convolutions")
    vals = result.values
    dx2 = grid.dx**2
    bound = -2.0 / result.eps
    worst = np.inf
    worst_node = -1
    for axis in range(grid.dim):
        off = tuple(1 if a == axis else 0 for a in range(grid.dim))
        for i in range(grid.n_nodes):
            up = grid.offset_index(i, off)
            dn = grid.offset_index(i, tuple(-o for o in off))
            if up < 0 or dn < 0:
                continue
            d2 = (vals[up] - 2 * vals[i] + vals[dn]) / dx2
            if d2 < worst:
                worst = d2
                worst_node = i
    ok = worst >= bound - tol
    return SemiconvexityVerdict(ok=bool(ok), min_second_difference=float(worst),
                                bound=bound, worst_node=int(worst_node))


def spacetime_sup_convolve(snapshots, stamps, coords, eps):
    """Sup-convolution on the product (time x space) grid.

    The quadratic penalty weighs both coordinates identically, matching
    the space-time transform used for parabolic subsolutions.
    """
    if eps <= 0:
        raise ConfigurationError("convolution parameter eps must be positive")
    snap = np.asarray(snapshots, dtype=float)
    stamps = np.asarray(stamps, dtype=float)
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    n_t, n_x = snap.shape
    if stamps.size != n_t or coords.shape[0] != n_x:
        raise ConfigurationError("snapshot axes disagree with stamps/coordinates")
    flat_vals = snap.ravel()
    tgrid = np.repeat(stamps, n_x).reshape(-1, 1)
    xgrid = np.tile(coords, (n_t, 1))
    prod_coords = np.concatenate([tgrid, xgrid], axis=1)
    res = sup_convolve_values(flat_vals, prod_coords, eps)
    return ConvolutionResult(values=res.values.reshape(n_t, n_x),
                             argopt=res.argopt.reshape(n_t, n_x),
                             control=res.control.reshape(n_t, n_x),
                             eps=res.eps, kind="sup")
