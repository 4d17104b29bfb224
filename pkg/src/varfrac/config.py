"""Sectioned key=value experiment configs and instance builders.

The format is deliberately flat (INI sections, scalar values, small
space-separated tuples) so configs diff cleanly.  Unknown keys are
rejected by name; every certificate encoded in a config is re-verified
when the instances are built.  All randomness downstream flows from the
single seed in the [solver] section.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import (
    Ball,
    DomainFamily,
    Interval,
    Polygon,
    SigmaSpec,
    TimeDecay,
    build_grid,
)
from .operator import CoefficientProfile, FracParams, GridFunction

__all__ = ["ExperimentConfig", "load_config"]

_SCHEMA = {
    "domain": {"kind", "a", "b", "center", "radius", "vertices"},
    "family": {
        "rule", "zeta", "sigma", "sigma_axis", "sigma_half_angle",
        "sigma_axes", "sigma_half_angles", "sigma_q", "rho_law",
        "time_amplitude", "time_rate",
    },
    "operator": {"s", "profile", "c", "alpha", "beta", "table", "n_angles"},
    "problem": {
        "f_law", "eta_f", "u0_law", "eta_1", "eta_2", "lambda",
        "f_time_amplitude", "h_time_amplitude", "decay_rate",
    },
    "solver": {
        "dx", "dt", "t_max", "tol", "eig_tol", "seed", "cap_factor", "max_iter",
    },
    "outputs": {"out_dir", "figures"},
}

_REQUIRED = {"domain": ["kind"], "operator": ["s"], "solver": ["dx"]}


@dataclass
class ExperimentConfig:
    """Parsed experiment description plus the raw text and its hash."""

    sections: dict
    text: str
    path: str = None
    config_hash: str = field(init=False)

    def __post_init__(self):
        self.config_hash = hashlib.sha256(self.text.encode()).hexdigest()[:16]

    # -- raw access -------------------------------------------------------
    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def get_float(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise ConfigurationError(f"missing required key {section}.{key}")
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigurationError(f"bad number for {section}.{key}: {raw!r}") from exc

    def get_int(self, section, key, default=None):
        return int(self.get_float(section, key, default))

    @property
    def seed(self):
        return self.get_int("solver", "seed", 12345)

    @property
    def figures(self):
        raw = str(self.get("outputs", "figures", "true")).lower()
        return raw in ("1", "true", "yes", "on")

    # -- builders ----------------------------------------------------------
    def build_domain(self):
        kind = self.get("domain", "kind")
        if kind == "interval":
            return Interval(self.get_float("domain", "a"), self.get_float("domain", "b"))
        if kind == "ball":
            center = _floats(self.get("domain", "center", "0 0"))
            return Ball(tuple(center), self.get_float("domain", "radius"))
        if kind == "polygon":
            verts = _tuple_list(self.get("domain", "vertices"))
            return Polygon(tuple(map(tuple, verts)))
        raise ConfigurationError(f"unknown domain kind {kind!r}")

    def build_grid(self):
        return build_grid(self.build_domain(), self.get_float("solver", "dx"))

    def build_sigma(self):
        kind = self.get("family", "sigma", "full_space")
        q = self.get_float("family", "sigma_q", 1.0)
        if kind == "full_space":
            return SigmaSpec(kind="full_space", q=q)
        if kind == "double_cone":
            axis = _floats(self.get("family", "sigma_axis", "1 0"))
            theta = self.get_float("family", "sigma_half_angle")
            return SigmaSpec(kind="double_cone", axes=(tuple(axis),),
                             half_angles=(theta,), q=q)
        if kind == "union_of_cones":
            axes = tuple(map(tuple, _tuple_list(self.get("family", "sigma_axes"))))
            angles = tuple(_floats(self.get("family", "sigma_half_angles")))
            return SigmaSpec(kind="union_of_cones", axes=axes,
                             half_angles=angles, q=q)
        raise ConfigurationError(f"unknown sigma kind {kind!r}")

    def build_family(self):
        rule = self.get("family", "rule", "constant")
        zeta = self.get_float("family", "zeta", 0.3)
        sigma = self.build_sigma()
        rho = None
        if rule == "ball_radius":
            rho = _rho_law(self.get("family", "rho_law"),
                           self.get_float("operator", "s"))
        amp = self.get_float("family", "time_amplitude", 0.0)
        time = None
        if amp != 0.0:
            time = TimeDecay(amplitude=amp,
                             rate=self.get_float("family", "time_rate", 0.0))
        return DomainFamily(rule=rule, sigma=sigma, zeta=zeta, rho=rho, time=time)

    def build_params(self):
        return FracParams(s=self.get_float("operator", "s"))

    def build_profile(self, grid=None):
        kind = self.get("operator", "profile", "killing")
        alpha = self.get("operator", "alpha")
        beta = self.get("operator", "beta")
        values = None
        if kind == "custom":
            table = self.get("operator", "table")
            if table is None:
                raise ConfigurationError("missing required key operator.table")
            values = _read_table(table, grid)
        return CoefficientProfile(
            kind=kind,
            c=self.get_float("operator", "c", 1.0),
            alpha=float(alpha) if alpha is not None else None,
            beta=float(beta) if beta is not None else None,
            values=values,
            n_angles=self.get_int("operator", "n_angles", 1024),
            time_amplitude=self.get_float("problem", "h_time_amplitude", 0.0),
            time_rate=self.get_float("problem", "decay_rate", 0.0),
        )

    def build_forcing(self, grid):
        s = self.get_float("operator", "s")
        law = self.get("problem", "f_law", "const 1.0")
        return _law_function(grid, law, s)

    def build_u0(self, grid, stationary=None):
        s = self.get_float("operator", "s")
        law = self.get("problem", "u0_law", "zero")
        if law.strip() == "stationary":
            if stationary is None:
                raise ConfigurationError("u0_law = stationary needs the elliptic solution")
            return stationary
        return _law_function(grid, law, s)


def _floats(raw):
    try:
        return [float(tok) for tok in str(raw).replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigurationError(f"bad numeric tuple: {raw!r}") from exc


def _tuple_list(raw):
    if raw is None:
        raise ConfigurationError("missing vertex/axis list")
    out = []
    for part in str(raw).split(";"):
        part = part.strip()
        if part:
            out.append(_floats(part))
    return out


def _rho_law(raw, s):
    if raw is None:
        raise ConfigurationError("missing required key family.rho_law")
    toks = str(raw).split()
    if toks[0] == "const" and len(toks) == 2:
        r = float(toks[1])
        if r <= 0:
            raise ConfigurationError("constant radius must be positive")
        return lambda d, x: r
    if toks[0] == "dpow" and len(toks) == 3:
        p, c = float(toks[1]), float(toks[2])
        return lambda d, x: c * d**p
    if toks[0] == "dcrit" and len(toks) == 1:
        # the counterexample law rho = d^{1/(2-2s)}
        p = 1.0 / (2.0 - 2.0 * s)
        return lambda d, x: d**p
    raise ConfigurationError(f"unknown rho law {raw!r}")


def _law_function(grid, raw, s):
    toks = str(raw).split()
    d = grid.d
    vals = np.zeros(grid.n_nodes)
    ii = grid.interior_idx
    if toks[0] == "zero":
        pass
    elif toks[0] == "const" and len(toks) == 2:
        vals[ii] = float(toks[1])
    elif toks[0] == "dpow" and len(toks) == 3:
        eta, c = float(toks[1]), float(toks[2])
        if not 0 < eta < 2 * s:
            raise ConfigurationError(f"law exponent must lie in (0, 2s), got {eta}")
        vals[ii] = c * d[ii] ** (eta - 2 * s)
    elif toks[0] == "bump" and len(toks) == 2:
        vals[ii] = float(toks[1]) * d[ii] / d[ii].max()
    elif toks[0] == "dpow_plain" and len(toks) == 3:
        # plain power of the distance (vanishes at the boundary)
        eta, c = float(toks[1]), float(toks[2])
        vals[ii] = c * d[ii] ** eta
    else:
        raise ConfigurationError(f"unknown data law {raw!r}")
    return GridFunction(grid, vals)


def _read_table(path, grid):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            idx, val = line.split()[:2]
            rows.append((int(idx), float(val)))
    if grid is None:
        raise ConfigurationError("custom table needs a grid to validate against")
    vals = np.zeros(grid.n_nodes)
    for idx, val in rows:
        if not 0 <= idx < grid.n_nodes:
            raise ConfigurationError(f"table node {idx} outside the grid")
        vals[idx] = val
    return vals


def load_config(path):
    """Parse and validate a config file; unknown keys are rejected by name."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error: {exc}") from exc
    sections = {}
    for name in parser.sections():
        if name not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{name}]")
        allowed = _SCHEMA[name]
        sections[name] = {}
        for key, value in parser.items(name):
            if key not in allowed:
                raise ConfigurationError(f"unknown config key {name}.{key}")
            sections[name][key] = value.strip()
    for section, keys in _REQUIRED.items():
        for key in keys:
            if section not in sections or key not in sections[section]:
                raise ConfigurationError(f"missing required key {section}.{key}")
    cfg = ExperimentConfig(sections=sections, text=text, path=str(path))
    # eagerly validate the numeric core so errors carry key names
    cfg.build_params()
    cfg.get_float("solver", "dx")
    return cfg
