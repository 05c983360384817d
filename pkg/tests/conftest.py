"""Shared fixtures: the rho = 0.6 reference annulus used throughout."""

import pytest

from ringsoi import RingGeometry, make_quadrature


@pytest.fixture(scope="session")
def geom():
    return RingGeometry(0.6)


@pytest.fixture(scope="session")
def quad(geom):
    return make_quadrature(192, geom)
