import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import modescent as md


@pytest.fixture(scope="session")
def circle2d():
    return md.registry_get("circle2d")


@pytest.fixture(scope="session")
def sphere3d():
    return md.registry_get("sphere3d")


@pytest.fixture
def rng():
    return np.random.default_rng(170305)


def make_box_problem():
    """Floor x2 >= 0 and wall x1 <= 1, objective pushes along the floor."""
    return md.ProblemSpec(
        name="box", n=2, m=1,
        F=lambda x: np.array([-x[0]]),
        DF=lambda x: np.array([[-1.0, 0.0]]),
        m_G=2,
        G=lambda x: np.array([-x[1], x[0] - 1.0]),
        DG=lambda x: np.array([[0.0, -1.0], [1.0, 0.0]]),
        box=((-2.0, 2.0), (-2.0, 2.0)),
    )


def make_hemisphere_problem():
    """Two linear objectives on the unit sphere, restricted to x3 >= 0.

    The critical set is the pair of closed equator arcs with angles in
    [0, pi/2] and [pi, 3pi/2].
    """
    return md.ProblemSpec(
        name="hemisphere", n=3, m=2,
        F=lambda x: np.array([x[0], x[1]]),
        DF=lambda x: np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        m_H=1,
        H=lambda x: np.array([x @ x - 1.0]),
        DH=lambda x: 2.0 * x.reshape(1, 3),
        m_G=1,
        G=lambda x: np.array([-x[2]]),
        DG=lambda x: np.array([[0.0, 0.0, -1.0]]),
        box=((-1.5, 1.5),) * 3,
    )


def hemisphere_critical_distance(x):
    t = np.arctan2(x[1], x[0]) % (2 * np.pi)
    best = np.inf
    for lo, hi in ((0.0, np.pi / 2), (np.pi, 1.5 * np.pi)):
        for tc in (np.clip(t, lo, hi), lo, hi):
            p = np.array([np.cos(tc), np.sin(tc), 0.0])
            best = min(best, float(np.linalg.norm(x - p)))
    return best


def make_infeasible_problem():
    """Equality x1^2 + 1 = 0 has no solution; feasibility solves must fail."""
    return md.ProblemSpec(
        name="impossible", n=2, m=1,
        F=lambda x: np.array([x[0]]),
        DF=lambda x: np.array([[1.0, 0.0]]),
        m_H=1,
        H=lambda x: np.array([x[0] ** 2 + 1.0]),
        DH=lambda x: np.array([[2.0 * x[0], 0.0]]),
    )


CIRCLE_CONFIG = dict(beta0=0.1, beta=0.5, sigma=1e-4, epsilon=1e-4)
