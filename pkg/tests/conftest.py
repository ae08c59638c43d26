import numpy as np
import pytest
from hypothesis import settings

from curveflow.mesh import NodalField, uniform_partition

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_CRITERIA = {}


def report_criterion(number: int, title: str, passed: bool, detail: str = ""):
    """Record one acceptance line for the terminal summary."""
    _CRITERIA[number] = (title, bool(passed), detail)


@pytest.fixture
def criterion():
    return report_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {title}: {detail}")


def regular_polygon(J, radius=1.0, phase=0.0, centre=(0.0, 0.0)):
    theta = 2 * np.pi * np.arange(J) / J + phase
    values = np.asarray(centre) + radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return NodalField(uniform_partition(J), values)


def diamond():
    """Square with vertices (1,0), (0,1), (-1,0), (0,-1)."""
    return regular_polygon(4)


def random_curve(rng, J, d=2, noise=0.15):
    """Perturbed circle in the first two coordinates; non-degenerate for small noise."""
    theta = 2 * np.pi * np.arange(J) / J
    values = np.zeros((J, d))
    values[:, 0] = np.cos(theta)
    values[:, 1] = np.sin(theta)
    values += noise * rng.uniform(-1, 1, size=(J, d)) / max(J / 8, 1)
    return NodalField(uniform_partition(J), values)


def symmetric_polygon(J):
    """Regular J-gon on the unit circle (J divisible by 8) with exact dihedral symmetry.

    Only angles in [0, pi/4] go through cos/sin; the rest follows by coordinate swaps and
    sign changes, so node rounding stays at one ulp.  Curvature is a second difference
    and amplifies node rounding by 1/h^2, which matters at J = 512.
    """
    if J % 8:
        raise ValueError("J must be divisible by 8")
    q = J // 8
    th = 2 * np.pi * np.arange(q + 1) / J
    c, s = np.cos(th), np.sin(th)
    quarter = np.concatenate([np.stack([c, s], 1), np.stack([s[::-1], c[::-1]], 1)[1:]])[:2 * q]
    turns = [quarter, quarter[:, ::-1] * [-1, 1], -quarter, quarter[:, ::-1] * [1, -1]]
    return NodalField(uniform_partition(J), np.concatenate(turns))
