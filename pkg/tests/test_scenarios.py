import json
import math
from pathlib import Path

import numpy as np
import pytest

from curveflow.errors import InvalidArgumentError
from curveflow.manufactured import reparam
from curveflow.mesh import NodalField, element_geometry, uniform_partition
from curveflow.monitors import mesh_ratio, signed_area
from curveflow.scenarios import (REGISTRY, SLIT_VERTICES, ScenarioSpec, initial_curve,
                                 load_polyline, make_initial_curve, scenario_names, smooth_map)
from curveflow.stepper import FlowKind

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"
NAMES = ["circle", "tube", "semicircle-node", "slit", "interlocked-rings", "helix",
         "lemniscate", "hypocycloid"]


def test_registry():
    assert scenario_names() == NAMES
    assert all(REGISTRY[n].description for n in NAMES)


class TestExamples:
    def test_circle(self):
        x = make_initial_curve("circle", 4, delta=0.1)
        g = reparam(np.arange(4) / 4, 0.1)[0]
        np.testing.assert_allclose(x.values, np.stack([np.cos(g), np.sin(g)], 1), atol=1e-15)

    def test_circle_uniform(self):
        assert abs(mesh_ratio(make_initial_curve("circle", 64, delta=0.0)) - 1) < 1e-10

    def test_rings_node(self):
        x = make_initial_curve("interlocked-rings", 16)
        np.testing.assert_allclose(x.values[0], [2.75, 0, 0], atol=1e-15)
        assert x.d == 3

    def test_rings_closed_form(self):
        r = np.linspace(0, 1, 101)
        pi = np.pi
        expected = np.stack([
            10 * (np.cos(2 * pi * r) + np.cos(6 * pi * r)) + np.cos(4 * pi * r) + np.cos(8 * pi * r),
            6 * np.sin(2 * pi * r) + 10 * np.sin(6 * pi * r),
            4 * np.sin(6 * pi * r) * np.sin(5 * pi * r) + 4 * np.sin(8 * pi * r)
            - 2 * np.sin(12 * pi * r),
        ], axis=1) / 8
        np.testing.assert_allclose(smooth_map("interlocked-rings")(r)[0], expected, atol=1e-14)

    def test_helix(self):
        J = 64
        x = make_initial_curve("helix", J).values
        np.testing.assert_allclose(x[0], [0, 1, 0], atol=1e-15)
        np.testing.assert_allclose(x[J - 3], [0, 1, 1], atol=1e-13)
        np.testing.assert_array_equal(x[J - 2:], [[0, 0, 1], [0, 0, 0]])

    def test_tube(self):
        x = make_initial_curve("tube", 512)
        L = element_geometry(x).lengths
        assert np.ptp(L) / L.mean() < 1e-10
        # chords on the caps lose c^3 / (24 r^2) each, about 6e-4 in total
        assert 0 < (14 + math.pi) - L.sum() < 1e-3
        lo, hi = x.values.min(0), x.values.max(0)
        np.testing.assert_allclose(hi - lo, [8, 1], atol=1e-4)
        assert signed_area(x) > 0

    def test_semicircle(self):
        x = make_initial_curve("semicircle-node", 128).values
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1, atol=1e-15)
        assert np.all(x[:-1, 1] >= -1e-15)
        np.testing.assert_array_equal(x[-1], [0, -1])

    def test_slit(self):
        closed = np.vstack([SLIT_VERTICES, SLIT_VERTICES[:1]])
        assert math.isclose(np.linalg.norm(np.diff(closed, axis=0), axis=1).sum(), 11.6)
        # 4 - 0.02 * 1.8
        assert math.isclose(signed_area(NodalField(uniform_partition(8), SLIT_VERTICES)), 3.964)
        x = make_initial_curve("slit", 512)
        # nodes sit on the boundary at equal arclength spacing; the 0.02 slit is narrower
        # than one element, so the polygon cuts its corners
        on_edge = np.zeros(512, dtype=bool)
        for a, b in zip(closed[:-1], closed[1:]):
            t = np.clip((x.values - a) @ (b - a) / ((b - a) @ (b - a)), 0, 1)
            on_edge |= np.linalg.norm(a + t[:, None] * (b - a) - x.values, axis=1) < 1e-14
        assert on_edge.all()
        assert math.isclose(signed_area(x), 3.964, rel_tol=1e-3)

    def test_lemniscate(self):
        x = make_initial_curve("lemniscate", 100)
        lo, hi = x.values.min(0), x.values.max(0)
        assert math.isclose((hi - lo)[0] / (hi - lo)[1], 2.0, rel_tol=1e-2)
        assert mesh_ratio(x) < 1.05
        # no node at the crossing point
        assert np.linalg.norm(x.values, axis=1).min() > 1e-3

    def test_hypocycloid(self):
        x = make_initial_curve("hypocycloid", 512, delta=0.1).values
        rho = np.arange(512) / 512
        np.testing.assert_allclose(x[:, 2], 0.1 * np.sin(6 * np.pi * rho), atol=1e-15)
        np.testing.assert_allclose(x[0], [1.5, 0, 0], atol=1e-15)
        assert np.all(make_initial_curve("hypocycloid", 64).values[:, 2] == 0)

    @pytest.mark.parametrize("name", NAMES)
    def test_nondegenerate_at_shipped_sizes(self, name):
        J = 100 if name == "lemniscate" else (128 if name == "semicircle-node" else 512)
        x = make_initial_curve(name, J)
        assert x.J == J and x.d == REGISTRY[name].d
        assert not element_geometry(x).any_degenerate


@pytest.mark.parametrize("name", ["circle", "interlocked-rings", "hypocycloid"])
def test_smooth_derivatives(name):
    f = smooth_map(name)
    rho = np.linspace(0, 1, 23)
    h = 1e-5
    x, dx, ddx = f(rho)
    np.testing.assert_allclose((f(rho + h)[0] - f(rho - h)[0]) / (2 * h), dx,
                               atol=1e-6 * (1 + np.abs(dx).max()))
    np.testing.assert_allclose((f(rho + h)[1] - f(rho - h)[1]) / (2 * h), ddx,
                               atol=1e-6 * (1 + np.abs(ddx).max()))


def test_projected_initial_curve():
    a = initial_curve("circle", 64, "projected", delta=0.1)
    b = initial_curve("circle", 64, "interpolant", delta=0.1)
    assert 0 < np.abs(a.values - b.values).max() < 1e-3
    with pytest.raises(InvalidArgumentError):
        initial_curve("tube", 64, "projected")


class TestErrors:
    def test_unknown(self):
        with pytest.raises(InvalidArgumentError):
            make_initial_curve("trefoil", 32)

    @pytest.mark.parametrize("J", [2, 0, 3.5])
    def test_bad_J(self, J):
        with pytest.raises(InvalidArgumentError):
            make_initial_curve("circle", J)

    def test_bad_params(self):
        with pytest.raises(InvalidArgumentError):
            make_initial_curve("circle", 32, delta=1.2)
        with pytest.raises(InvalidArgumentError):
            make_initial_curve("tube", 32, delta=0.1)
        with pytest.raises(InvalidArgumentError):
            make_initial_curve("helix", 5)


class TestSpec:
    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_files_roundtrip(self, path):
        spec = ScenarioSpec.load(path)
        again = ScenarioSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert again == spec
        assert spec.snapshot_times and spec.snapshot_times[-1] == spec.T

    def test_lambda_key(self):
        spec = ScenarioSpec.from_dict({"name": "helix", "flow": "elastic", "lambda": 1})
        assert spec.lam == 1.0 and spec.flow is FlowKind.ELASTIC and spec.d == 3
        assert spec.to_dict()["lambda"] == 1.0

    @pytest.mark.parametrize("bad", [
        {"name": "nope"},
        {"name": "tube", "dt": 0},
        {"name": "tube", "T": -1},
        {"name": "tube", "J": 2},
        {"name": "tube", "lambda": -0.1},
        {"name": "tube", "init": "magic"},
        {"name": "tube", "sample_every": 0},
        {"name": "tube", "T": 1, "snapshot_times": [2]},
        {"name": "tube", "d": 3},
        {"name": "tube", "delta": 0.1},
        {"name": "tube", "colour": "red"},
        {"name": "tube", "flow": "mean-curvature"},
        {"J": 32},
    ])
    def test_invalid(self, bad):
        with pytest.raises(InvalidArgumentError):
            ScenarioSpec.from_dict(bad)

    def test_load_errors(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(InvalidArgumentError):
            ScenarioSpec.load(p)
        p.write_text("[1, 2]")
        with pytest.raises(InvalidArgumentError):
            ScenarioSpec.load(p)
        with pytest.raises(OSError):
            ScenarioSpec.load(tmp_path / "missing.json")

    def test_polyline(self, tmp_path):
        pts = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])
        np.savetxt(tmp_path / "sq.csv", pts, delimiter=",", header="x,y")
        np.savetxt(tmp_path / "sq.txt", pts)
        for name in ("sq.csv", "sq.txt"):
            x = load_polyline(tmp_path / name)
            np.testing.assert_array_equal(x.values, pts)
        (tmp_path / "run.json").write_text(json.dumps({"name": "square", "polyline": "sq.csv",
                                                       "J": 4, "d": 2}))
        spec = ScenarioSpec.load(tmp_path / "run.json")
        np.testing.assert_array_equal(spec.initial_curve().values, pts)
        np.savetxt(tmp_path / "two.txt", pts[:2])
        with pytest.raises(InvalidArgumentError):
            load_polyline(tmp_path / "two.txt")
        spec3 = ScenarioSpec.from_dict({"name": "square", "polyline": str(tmp_path / "sq.csv"),
                                        "d": 3})
        with pytest.raises(InvalidArgumentError):
            spec3.initial_curve()
