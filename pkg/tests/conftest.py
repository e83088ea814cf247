"""Shared fixtures: a handful of small bodies with known answers."""

import os
import tempfile

# Keep the disk cache and user settings out of the developer's home directory.
_scratch = tempfile.mkdtemp(prefix="olcb-tests-")
os.environ.setdefault("OLCB_CACHE_DIR", os.path.join(_scratch, "cache"))
os.environ["OLCB_CONFIG_DIR"] = os.path.join(_scratch, "config")
os.environ.setdefault("OLCB_THREADS", "2")

import numpy as np
import pytest

from olcb.bodies import Ball, Ellipsoid, Polytope, cube, regular_polygon


@pytest.fixture
def square() -> Polytope:
    return Polytope(np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]))


@pytest.fixture
def triangle() -> Polytope:
    """Asymmetric triangle with the origin inside, area 4.5."""
    return Polytope(np.array([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]))


@pytest.fixture
def corner_triangle() -> Polytope:
    """The simplex conv{0, e₁, e₂}; its origin is a vertex."""
    return Polytope(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), check_origin=False)


@pytest.fixture
def disk() -> Ball:
    return Ball(2)


@pytest.fixture
def ellipse() -> Ellipsoid:
    return Ellipsoid(np.diag([4.0, 1.0]))


@pytest.fixture
def unit_cube() -> Polytope:
    return cube(3)


@pytest.fixture
def hexagon() -> Polytope:
    return regular_polygon(6)
