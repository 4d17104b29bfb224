import numpy as np
import pytest

from varfrac.geometry import (
    Ball,
    DomainFamily,
    Interval,
    Polygon,
    SigmaSpec,
    build_grid,
)
from varfrac.operator import CoefficientProfile, FracParams, assemble

L_SHAPE = ((0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0))


@pytest.fixture(scope="session")
def unit_interval():
    return Interval(0.0, 1.0)


@pytest.fixture(scope="session")
def unit_ball():
    return Ball((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def l_shape():
    return Polygon(L_SHAPE)


@pytest.fixture(scope="session")
def grid_1d(unit_interval):
    return build_grid(unit_interval, 1.0 / 64)


@pytest.fixture(scope="session")
def grid_2d(unit_ball):
    return build_grid(unit_ball, 2.0 / 24)


@pytest.fixture(scope="session")
def const_family():
    return DomainFamily(rule="constant", sigma=SigmaSpec(), zeta=0.3)


@pytest.fixture(scope="session")
def op_1d(grid_1d, const_family):
    params = FracParams(s=0.75)
    profile = CoefficientProfile(kind="killing")
    return assemble(grid_1d, const_family, params, profile)


@pytest.fixture(scope="session")
def op_1d_s25(grid_1d, const_family):
    params = FracParams(s=0.25)
    profile = CoefficientProfile(kind="killing")
    return assemble(grid_1d, const_family, params, profile)


@pytest.fixture(scope="session")
def op_2d(grid_2d, const_family):
    params = FracParams(s=0.5)
    profile = CoefficientProfile(kind="killing", n_angles=256)
    return assemble(grid_2d, const_family, params, profile)


def rng(seed=0):
    return np.random.default_rng(seed)
