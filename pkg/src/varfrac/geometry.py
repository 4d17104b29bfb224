"""Domains, grids, and families of variable integration sets.

The base domain is an open bounded set in 1D or 2D (interval, ball, simple
polygon).  A uniform lattice is laid over its bounding box; interior nodes
carry the exact distance-to-boundary field.  On top of that, a
:class:`DomainFamily` describes the set each node integrates over: the whole
domain, a variable-radius ball, the largest star-shaped subset, or a
symmetric cone mask.  ``validate_family`` measures the structural
assumptions (locality radius, point symmetry, annular density, symmetric
difference continuity) instead of assuming them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GeometryError

__all__ = [
    "DomainSpec",
    "Interval",
    "Ball",
    "Polygon",
    "Grid",
    "SigmaSpec",
    "DomainFamily",
    "TimeDecay",
    "DensityCertificate",
    "ValidationReport",
    "build_grid",
    "membership",
    "validate_family",
    "density_certificate",
]

_EDGE_TOL = 1e-12


class DomainSpec:
    """Common interface of interval / ball / polygon base domains."""

    kind = "abstract"
    dim = 0

    def contains(self, pts):
        """Strict interior test for an (m, dim) array of points."""
        raise NotImplementedError

    def distance(self, pts):
        """Distance to the boundary (0 outside the closure)."""
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def inradius(self):
        raise NotImplementedError

    def diameter(self):
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))

    def boundary_samples(self, n):
        """Points on the boundary, used for density measurements."""
        raise NotImplementedError

    def ray_crossings(self, x, direction):
        """All positive crossing parameters of the ray ``x + t*direction``.

        Returned sorted ascending; for x inside, the count is odd and the
        segments (0,t1), (t2,t3), ... lie inside the domain.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(DomainSpec):
    """Open interval (a, b) on the line."""

    a: float
    b: float
    kind = "interval"
    dim = 1

    def __post_init__(self):
        if not self.b > self.a:
            raise ConfigurationError(f"interval requires a < b, got ({self.a}, {self.b})")

    def contains(self, pts):
        x = np.asarray(pts, dtype=float).reshape(-1)
        return (x > self.a + _EDGE_TOL) & (x < self.b - _EDGE_TOL)

    def distance(self, pts):
        x = np.asarray(pts, dtype=float).reshape(-1)
        d = np.minimum(x - self.a, self.b - x)
        return np.maximum(d, 0.0)

    def bounding_box(self):
        return (np.array([self.a]), np.array([self.b]))

    def inradius(self):
        return 0.5 * (self.b - self.a)

    def boundary_samples(self, n):
        return np.array([[self.a], [self.b]])

    def ray_crossings(self, x, direction):
        x0 = float(np.asarray(x).reshape(-1)[0])
        s = float(np.asarray(direction).reshape(-1)[0])
        t = (self.b - x0) / s if s > 0 else (self.a - x0) / s
        if t <= 0:
            raise GeometryError("ray cast from a point outside the interval")
        return np.array([t])


@dataclass(frozen=True)
class Ball(DomainSpec):
    """Open disk in the plane."""

    center: tuple
    radius: float
    kind = "ball"
    dim = 2

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ConfigurationError("ball radius must be positive")
        if len(self.center) != 2:
            raise ConfigurationError("ball domains are 2D; center needs two coordinates")

    def _c(self):
        return np.asarray(self.center, dtype=float)

    def contains(self, pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(p - self._c(), axis=1)
        return r < self.radius - _EDGE_TOL

    def distance(self, pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        d = self.radius - np.linalg.norm(p - self._c(), axis=1)
        return np.maximum(d, 0.0)

    def bounding_box(self):
        c = self._c()
        return (c - self.radius, c + self.radius)

    def inradius(self):
        return self.radius

    def boundary_samples(self, n):
        th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
        return self._c() + self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)

    def ray_crossings(self, x, direction):
        p = np.asarray(x, dtype=float) - self._c()
        s = np.asarray(direction, dtype=float)
        s = s / np.linalg.norm(s)
        beta = float(p @ s)
        gamma = float(p @ p) - self.radius**2
        disc = beta * beta - gamma
        if gamma >= 0 or disc <= 0:
            raise GeometryError("ray cast from a point outside the ball")
        return np.array([-beta + math.sqrt(disc)])


@dataclass(frozen=True)
class Polygon(DomainSpec):
    """Simple (possibly nonconvex) polygon, vertices in order."""

    vertices: tuple
    kind = "polygon"
    dim = 2

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ConfigurationError("polygon needs at least 3 two-dimensional vertices")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))
        self._check_simple(v)

    @staticmethod
    def _check_simple(v):
        m = len(v)
        segs = [(v[i], v[(i + 1) % m]) for i in range(m)]
        for i in range(m):
            for j in range(i + 1, m):
                if j == i or (j + 1) % m == i or (i + 1) % m == j:
                    continue
                if _segments_intersect(*segs[i], *segs[j]):
                    raise ConfigurationError("polygon is self-intersecting")

    def _v(self):
        return np.asarray(self.vertices, dtype=float)

    def _edges(self):
        v = self._v()
        return v, np.roll(v, -1, axis=0)

    def contains(self, pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        a, b = self._edges()
        x, y = p[:, 0:1], p[:, 1:2]
        ya, yb = a[:, 1][None, :], b[:, 1][None, :]
        xa, xb = a[:, 0][None, :], b[:, 0][None, :]
        cond = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = xa + (y - ya) * (xb - xa) / (yb - ya)
        crossing = cond & (x < xi)
        inside = (crossing.sum(axis=1) % 2).astype(bool)
        return inside & (self.distance(p) > _EDGE_TOL)

    def distance(self, pts):
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        a, b = self._edges()
        ab = b - a
        denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom[None, :], 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - proj, axis=2).min(axis=1)
        inside = self._inside_parity(p)
        return np.where(inside, dist, 0.0)

    def _inside_parity(self, p):
        a, b = self._edges()
        x, y = p[:, 0:1], p[:, 1:2]
        ya, yb = a[:, 1][None, :], b[:, 1][None, :]
        xa, xb = a[:, 0][None, :], b[:, 0][None, :]
        cond = (ya > y) != (yb > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = xa + (y - ya) * (xb - xa) / (yb - ya)
        return ((cond & (x < xi)).sum(axis=1) % 2).astype(bool)

    def bounding_box(self):
        v = self._v()
        return (v.min(axis=0), v.max(axis=0))

    def inradius(self):
        lo, hi = self.bounding_box()
        xs = np.linspace(lo[0], hi[0], 64)
        ys = np.linspace(lo[1], hi[1], 64)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        probe = np.stack([xx.ravel(), yy.ravel()], axis=1)
        return float(self.distance(probe).max())

    def boundary_samples(self, n):
        # vertices are included: density minima sit at reentrant corners
        a, b = self._edges()
        lengths = np.linalg.norm(b - a, axis=1)
        total = lengths.sum()
        pts = [ai for ai in a]
        for ai, bi, li in zip(a, b, lengths):
            k = max(1, int(round(n * li / total)))
            for t in (np.arange(k) + 0.5) / k:
                pts.append(ai + t * (bi - ai))
        return np.asarray(pts)

    def ray_crossings(self, x, direction):
        x = np.asarray(x, dtype=float)
        s = np.asarray(direction, dtype=float)
        s = s / np.linalg.norm(s)
        for nudge in range(4):
            d = s if nudge == 0 else _rotate(s, 1e-9 * 3**nudge)
            ts = self._ray_hits(x, d)
            if len(ts) % 2 == 1:
                return ts
        raise GeometryError(f"degenerate ray cast from {x.tolist()}")

    def _ray_hits(self, x, s):
        a, b = self._edges()
        ab = b - a
        # solve x + t s = a + u ab, u in [0, 1)
        det = s[0] * (-ab[:, 1]) - s[1] * (-ab[:, 0])
        rhs = a - x
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rhs[:, 0] * (-ab[:, 1]) - rhs[:, 1] * (-ab[:, 0])) / det
            u = (s[0] * rhs[:, 1] - s[1] * rhs[:, 0]) / det
        ok = (np.abs(det) > 1e-300) & (t > 1e-12) & (u >= 0.0) & (u < 1.0)
        ts = np.sort(t[ok])
        if len(ts) > 1:
            keep = np.concatenate([[True], np.diff(ts) > 1e-12 * max(1.0, self.diameter())])
            ts = ts[keep]
        return ts


def _rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class Grid:
    """Uniform lattice over a domain's bounding box.

    ``coords`` lists every lattice node; ``interior`` marks nodes strictly
    inside the domain and ``d`` carries their distance to the boundary
    (exactly zero elsewhere).  Immutable after construction.
    """

    domain: DomainSpec
    dx: float
    shape: tuple
    origin: np.ndarray
    coords: np.ndarray
    interior: np.ndarray
    d: np.ndarray
    interior_idx: np.ndarray = field(repr=False)
    interior_pos: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_interior(self):
        return self.interior_idx.size

    def multi_index(self, flat):
        if self.dim == 1:
            return (flat,)
        return (flat // self.shape[1], flat % self.shape[1])

    def flat_index(self, multi):
        if self.dim == 1:
            return multi[0]
        return multi[0] * self.shape[1] + multi[1]

    def offset_index(self, flat, offset):
        """Flat index of the node at integer lattice offset, or -1."""
        m = self.multi_index(flat)
        out = tuple(mi + oi for mi, oi in zip(m, offset))
        for oi, si in zip(out, self.shape):
            if oi < 0 or oi >= si:
                return -1
        return self.flat_index(out)

    def interior_values(self, values):
        return np.asarray(values)[self.interior_idx]

    def embed(self, interior_values):
        """Full-lattice array with zeros off the interior."""
        full = np.zeros(self.n_nodes)
        full[self.interior_idx] = interior_values
        return full


def build_grid(domain, dx):
    """Lay a uniform lattice with spacing ``dx`` over the domain.

    Raises a configuration error if the spacing is too coarse to produce
    interior nodes (it must stay below the domain's inradius).
    """
    if dx <= 0:
        raise ConfigurationError("grid spacing must be positive")
    if dx >= domain.inradius():
        raise ConfigurationError(
            f"grid spacing {dx} is not below the domain inradius {domain.inradius():.6g}"
        )
    lo, hi = domain.bounding_box()
    counts = tuple(int(math.floor((h - l) / dx + 1e-9)) + 1 for l, h in zip(lo, hi))
    axes = [l + dx * np.arange(c) for l, c in zip(lo, counts)]
    if domain.dim == 1:
        coords = axes[0].reshape(-1, 1)
        shape = (counts[0],)
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        coords = np.stack([xx.ravel(), yy.ravel()], axis=1)
        shape = counts
    interior = domain.contains(coords)
    d = np.where(interior, domain.distance(coords), 0.0)
    interior = interior & (d > 0)
    d = np.where(interior, d, 0.0)
    if not interior.any():
        raise ConfigurationError("grid spacing leaves no interior nodes")
    half_diag = 0.5 * float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
    if d.max() > half_diag + 1e-12:
        raise GeometryError("distance field exceeds half the box diagonal")
    interior_idx = np.flatnonzero(interior)
    interior_pos = np.full(coords.shape[0], -1, dtype=int)
    interior_pos[interior_idx] = np.arange(interior_idx.size)
    return Grid(
        domain=domain,
        dx=float(dx),
        shape=shape,
        origin=np.asarray(lo, dtype=float),
        coords=coords,
        interior=interior,
        d=d,
        interior_idx=interior_idx,
        interior_pos=interior_pos,
    )


@dataclass(frozen=True)
class SigmaSpec:
    """Universal centered set: full space, a double cone, or a cone union.

    ``q`` is the declared annular density constant.  Cones are closed (ties
    on the boundary count as inside) and are symmetrized automatically, so
    z and -z always agree.
    """

    kind: str = "full_space"
    axes: tuple = ()
    half_angles: tuple = ()
    q: float = 1.0

    def __post_init__(self):
        if self.kind not in ("full_space", "double_cone", "union_of_cones"):
            raise ConfigurationError(f"unknown sigma kind {self.kind!r}")
        if not 0 < self.q <= 1:
            raise ConfigurationError("sigma density constant q must lie in (0, 1]")
        axes = tuple(tuple(float(c) for c in np.atleast_1d(a)) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "half_angles", tuple(float(t) for t in self.half_angles))
        if self.kind != "full_space" and len(self.axes) != len(self.half_angles):
            raise ConfigurationError("each cone axis needs a half angle")
        if self.kind == "double_cone" and len(self.axes) != 1:
            raise ConfigurationError("double_cone takes exactly one axis")

    def contains(self, z):
        """Vectorized membership for centered offsets z (m, dim)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.kind == "full_space":
            return np.ones(z.shape[0], dtype=bool)
        if z.shape[1] == 1:
            # all 1D cones contain both unit directions
            return np.ones(z.shape[0], dtype=bool)
        r = np.linalg.norm(z, axis=1)
        out = np.zeros(z.shape[0], dtype=bool)
        safe = r > 0
        for axis, theta in zip(self.axes, self.half_angles):
            a = np.asarray(axis, dtype=float)
            a = a / np.linalg.norm(a)
            cosang = np.zeros_like(r)
            cosang[safe] = np.abs(z[safe] @ a) / r[safe]
            out |= safe & (cosang >= math.cos(theta) - 1e-12)
        out[~safe] = True
        return out

    def angular_density(self, dim, n_dirs=4096):
        """Volume fraction of the set in small balls, measured by direction.

        Cones are scale invariant, so the fraction of directions inside the
        set equals the volume fraction in any centered ball.
        """
        if self.kind == "full_space":
            return 1.0
        if dim == 1:
            return 1.0
        th = 2.0 * np.pi * (np.arange(n_dirs) + 0.5) / n_dirs
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        return float(self.contains(dirs).mean())


@dataclass(frozen=True)
class TimeDecay:
    """Multiplicative radius perturbation ``(1 + amplitude * exp(-rate*t))``."""

    amplitude: float
    rate: float

    def __post_init__(self):
        if self.amplitude <= -1:
            raise ConfigurationError("time perturbation amplitude must exceed -1")
        if self.rate < 0:
            raise ConfigurationError("time decay rate must be nonnegative")

    def factor(self, t):
        if t is None:
            return 1.0
        return 1.0 + self.amplitude * math.exp(-self.rate * t)


@dataclass(frozen=True)
class DomainFamily:
    """Rule assigning an integration set to every interior node.

    rules:
      constant     -- the whole domain
      ball_radius  -- ball of node-dependent radius ``rho`` (clipped to the
                      domain through the interior mask)
      star_shaped  -- largest star-shaped subset seen from the node, decided
                      by ray casting sampled at dx/4
      masked       -- the cone set translated to the node
    """

    rule: str
    sigma: SigmaSpec = SigmaSpec()
    zeta: float = 0.3
    rho: object = None  # callable (d, coords) -> radius, for ball_radius
    time: TimeDecay = None

    def __post_init__(self):
        if self.rule not in ("constant", "ball_radius", "star_shaped", "masked"):
            raise ConfigurationError(f"unknown family rule {self.rule!r}")
        if not 0 < self.zeta < 0.5:
            raise ConfigurationError("locality fraction zeta must lie in (0, 1/2)")
        if self.rule == "ball_radius" and not callable(self.rho):
            raise ConfigurationError("ball_radius rule needs a radius law")
        if self.time is not None and self.rule != "ball_radius":
            raise ConfigurationError("time dependence is supported for ball_radius only")

    def radius_at(self, grid, i, t=None):
        base = float(self.rho(grid.d[i], grid.coords[i]))
        if self.time is not None:
            base *= self.time.factor(t)
        return base

    def shell_cap(self, grid, i, t=None):
        """Radius up to which the centered set can extend near the node."""
        if self.rule == "ball_radius":
            return self.radius_at(grid, i, t)
        return math.inf

    def member_mask(self, grid, i, t=None):
        """Boolean mask over all lattice nodes: y in Omega(x_i)."""
        if not grid.interior[i]:
            raise ConfigurationError("membership is defined for interior nodes only")
        x = grid.coords[i]
        mask = grid.interior.copy()
        mask[i] = False
        if self.rule == "constant":
            return mask
        if self.rule == "ball_radius":
            rho = self.radius_at(grid, i, t)
            dist = np.linalg.norm(grid.coords - x, axis=1)
            return mask & (dist < rho)
        if self.rule == "masked":
            return mask & self.sigma.contains(grid.coords - x)
        return mask & self._star_visible(grid, i)

    def _star_visible(self, grid, i):
        x = grid.coords[i]
        cand = np.flatnonzero(grid.interior)
        pts = grid.coords[cand]
        seg = pts - x
        lengths = np.linalg.norm(seg, axis=1)
        lmax = lengths.max()
        if lmax == 0:
            return grid.interior.copy()
        m = max(2, int(math.ceil(4.0 * lmax / grid.dx)))
        tau = (np.arange(1, m + 1) - 0.5) / m
        samples = x[None, None, :] + tau[None, :, None] * seg[:, None, :]
        ok = self.domain_contains(grid, samples.reshape(-1, grid.dim))
        visible_cand = ok.reshape(len(cand), m).all(axis=1)
        out = np.zeros(grid.n_nodes, dtype=bool)
        out[cand[visible_cand]] = True
        out[i] = False
        return out

    @staticmethod
    def domain_contains(grid, pts):
        return grid.domain.contains(pts)


def membership(family, grid, i, j, t=None):
    """True iff node j lies in the integration set of node i."""
    return bool(family.member_mask(grid, i, t)[j])


@dataclass
class ValidationReport:
    """Outcome of the structural checks; violations are data, not errors."""

    rows: list                      # (node, coords, check, passed, value)
    ok: bool
    violations: list

    def csv_rows(self):
        for node, coords, check, passed, value in self.rows:
            cs = list(coords) + [math.nan] * (2 - len(coords))
            yield (node, cs[0], cs[1], check, int(passed), value)


def validate_family(family, grid, seed=0, density_radii=5, mc_samples=20000,
                    symdiff_samples=12, t=None):
    """Measure the structural assumptions of a family on a grid.

    Checks, per interior node, that the centered set agrees with the cone
    mask inside the locality ball of radius ``zeta*d``; measures the annular
    density of the mask against its declared constant; and samples
    symmetric-difference volumes between neighboring nodes.
    """
    rng = np.random.default_rng(seed)
    rows = []
    violations = []

    # locality: membership within B(zeta d) must coincide with the mask
    kmax = int(math.floor(family.zeta * grid.d.max() / grid.dx)) + 1
    offsets = _lattice_offsets(grid.dim, kmax)
    for i in grid.interior_idx:
        radius = family.zeta * grid.d[i]
        mask = family.member_mask(grid, i, t)
        mism = 0
        checked = 0
        for off, offlen in offsets:
            if offlen * grid.dx > radius or offlen == 0:
                continue
            j = grid.offset_index(i, off)
            if j < 0:
                continue
            checked += 1
            z = grid.coords[j] - grid.coords[i]
            if bool(mask[j]) != bool(family.sigma.contains(z[None, :])[0]):
                mism += 1
        passed = mism == 0
        rows.append((int(i), grid.coords[i], "zeta_locality", passed, float(mism)))
        if not passed:
            violations.append((int(i), "zeta_locality", mism))

    # point symmetry of the mask on sampled offsets
    zs = rng.standard_normal((256, grid.dim))
    sym_ok = bool(np.all(family.sigma.contains(zs) == family.sigma.contains(-zs)))
    rows.append((-1, grid.coords[0] * math.nan, "sigma_symmetry", sym_ok, float(sym_ok)))
    if not sym_ok:
        violations.append((-1, "sigma_symmetry", 1))

    # annular density of the mask
    r0 = grid.dx
    for j in range(density_radii):
        r = r0 * 2.0**j
        ratio = _annulus_density(family.sigma, grid.dim, r, mc_samples, rng)
        passed = ratio >= family.sigma.q - 3.0 / math.sqrt(mc_samples)
        rows.append((-1, grid.coords[0] * math.nan, f"sigma_density_r={r:.6g}", passed, ratio))
        if not passed:
            violations.append((-1, f"sigma_density_r={r:.6g}", ratio))

    # symmetric difference continuity between lattice neighbors
    pick = rng.choice(grid.interior_idx, size=min(symdiff_samples, grid.n_interior),
                      replace=False)
    cell = grid.dx**grid.dim
    for i in pick:
        m_i = family.member_mask(grid, i, t)
        for step in (1, 2):
            off = (step,) + (0,) * (grid.dim - 1)
            j = grid.offset_index(i, off)
            if j < 0 or not grid.interior[j]:
                continue
            m_j = family.member_mask(grid, j, t)
            vol = float(np.logical_xor(m_i, m_j).sum()) * cell
            # the pair (i, j) itself always flips; discount it
            vol = max(vol - 2 * cell, 0.0)
            rows.append((int(i), grid.coords[i], f"symdiff_step={step}", True, vol))

    return ValidationReport(rows=rows, ok=not violations, violations=violations)


def _lattice_offsets(dim, kmax):
    offs = []
    if dim == 1:
        for k in range(-kmax, kmax + 1):
            offs.append(((k,), abs(k)))
    else:
        for k1 in range(-kmax, kmax + 1):
            for k2 in range(-kmax, kmax + 1):
                offs.append(((k1, k2), math.hypot(k1, k2)))
    return [(o, l) for o, l in offs]


def _annulus_density(sigma, dim, r, n, rng):
    if dim == 1:
        radii = r * (1 + rng.random(n))
        signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        pts = (radii * signs).reshape(-1, 1)
    else:
        rad = np.sqrt(r**2 + rng.random(n) * (4 * r**2 - r**2))
        th = 2 * np.pi * rng.random(n)
        pts = np.stack([rad * np.cos(th), rad * np.sin(th)], axis=1)
    return float(sigma.contains(pts).mean())


@dataclass(frozen=True)
class DensityCertificate:
    """Measured exterior density at the boundary: |B_rho ∩ Ω^c| / |B_rho|."""

    rho0: float
    kappa: float
    samples: tuple  # rows (x, y, rho, ratio)

    def csv_rows(self):
        return list(self.samples)


def density_certificate(domain, rho0, samples=32, seed=0, n_rho=5, mc_samples=40000):
    """Measure the uniform exterior density constant kappa at the boundary.

    kappa is the minimum measured complement fraction over boundary samples
    and radii in (0, rho0].  For intervals the fraction is computed exactly.
    """
    if rho0 <= 0:
        raise ConfigurationError("rho0 must be positive")
    pts = domain.boundary_samples(samples)
    if len(pts) == 0:
        raise ConfigurationError("degenerate boundary sampling")
    rng = np.random.default_rng(seed)
    rows = []
    kappa = math.inf
    radii = [rho0 * 2.0 ** (-j) for j in range(n_rho)]
    for xb in pts:
        for rho in radii:
            if domain.dim == 1:
                x0 = float(xb[0])
                lo, hi = x0 - rho, x0 + rho
                inside = max(0.0, min(hi, domain.b) - max(lo, domain.a))
                ratio = 1.0 - inside / (2 * rho)
            else:
                rad = rho * np.sqrt(rng.random(mc_samples))
                th = 2 * np.pi * rng.random(mc_samples)
                probe = xb + np.stack([rad * np.cos(th), rad * np.sin(th)], axis=1)
                ratio = float(1.0 - domain.contains(probe).mean())
            coords = list(xb) + [math.nan] * (2 - len(xb))
            rows.append((coords[0], coords[1], rho, ratio))
            kappa = min(kappa, ratio)
    if not 0 < kappa:
        raise ConfigurationError("measured exterior density vanished at a boundary sample")
    return DensityCertificate(rho0=float(rho0), kappa=float(kappa), samples=tuple(rows))
