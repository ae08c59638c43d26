"""Initial curves for the numerical experiments and the scenario configuration.

Every generator is registered under a name and returns the nodal positions
of a closed polygon on the uniform partition with ``J`` elements.  Curves
given by a smooth closed-form map also expose that map together with its
first and second derivatives, which the projected initial data needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .errors import InvalidArgumentError
from .manufactured import reparam
from .mesh import NodalField, uniform_partition
from .stepper import INITIAL_MODES, FlowKind, initial_position

TWO_PI = 2.0 * np.pi

#: ``(x, x_rho, x_rhorho)`` at an array of parameter values, each of shape (n, d).
SmoothMap = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class CurveGenerator:
    name: str
    d: int
    nodes: Callable[..., np.ndarray]
    smooth: Optional[Callable[..., SmoothMap]] = None
    params: tuple = ()
    description: str = ""


# ---------------------------------------------------------------------------
# smooth closed-form curves

def _circle_map(delta: float = 0.1) -> SmoothMap:
    def f(rho):
        g, g1, g2, _, _ = reparam(np.asarray(rho, dtype=float), delta)
        e = np.stack([np.cos(g), np.sin(g)], axis=-1)
        ep = np.stack([-np.sin(g), np.cos(g)], axis=-1)
        return e, g1[:, None] * ep, g2[:, None] * ep - (g1**2)[:, None] * e
    return f


def _trig(rho, terms):
    """Sum of ``c cos(k pi rho) + s sin(k pi rho)`` and its first two derivatives."""
    v = np.zeros_like(rho)
    d1 = np.zeros_like(rho)
    d2 = np.zeros_like(rho)
    for k, c, s in terms:
        w = k * np.pi
        cs, sn = np.cos(w * rho), np.sin(w * rho)
        v += c * cs + s * sn
        d1 += w * (-c * sn + s * cs)
        d2 -= w * w * (c * cs + s * sn)
    return v, d1, d2


def _trig_map(components, scale=1.0) -> SmoothMap:
    def f(rho):
        rho = np.asarray(rho, dtype=float)
        parts = [_trig(rho, terms) for terms in components]
        return tuple(scale * np.stack([p[i] for p in parts], axis=-1) for i in range(3))
    return f


def _rings_map() -> SmoothMap:
    # 4 sin(6 pi r) sin(5 pi r) = 2 cos(pi r) - 2 cos(11 pi r)
    return _trig_map([
        [(2, 10, 0), (6, 10, 0), (4, 1, 0), (8, 1, 0)],
        [(2, 0, 6), (6, 0, 10)],
        [(1, 2, 0), (11, -2, 0), (8, 0, 4), (12, 0, -2)],
    ], scale=1.0 / 8.0)


def _hypocycloid_map(delta: float = 0.0) -> SmoothMap:
    return _trig_map([
        [(2, -2.5, 0), (10, 4, 0)],
        [(2, 0, -2.5), (10, 0, 4)],
        [(6, 0, delta)],
    ])


def _gerono(u):
    """Figure-eight with a 2:1 bounding box, ``(cos u, sin u cos u)``."""
    return np.stack([np.cos(u), np.sin(u) * np.cos(u)], axis=-1)


# ---------------------------------------------------------------------------
# polygons and arclength sampling

def _polygon_at_arclength(vertices: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Points of the closed polygon at arclength positions ``s`` from vertex 0."""
    closed = np.vstack([vertices, vertices[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.mod(s, cum[-1])
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[k]) / seg[k]
    return closed[k] + frac[:, None] * (closed[k + 1] - closed[k])


def _stadium_point(s, length, width):
    """Stadium boundary at arclength ``s``, counter-clockwise from the bottom midpoint."""
    r = 0.5 * width
    a = 0.5 * (length - width)            # half the straight part
    arc = np.pi * r
    perimeter = 4 * a + 2 * arc
    s = np.mod(np.asarray(s, dtype=float), perimeter)
    out = np.empty(s.shape + (2,))
    bounds = np.cumsum([a, arc, 2 * a, arc])

    m = s < bounds[0]
    out[m] = np.stack([s[m], -r * np.ones(m.sum())], -1)
    m = (s >= bounds[0]) & (s < bounds[1])
    th = (s[m] - bounds[0]) / r - 0.5 * np.pi
    out[m] = np.stack([a + r * np.cos(th), r * np.sin(th)], -1)
    m = (s >= bounds[1]) & (s < bounds[2])
    out[m] = np.stack([a - (s[m] - bounds[1]), r * np.ones(m.sum())], -1)
    m = (s >= bounds[2]) & (s < bounds[3])
    th = (s[m] - bounds[2]) / r + 0.5 * np.pi
    out[m] = np.stack([-a + r * np.cos(th), r * np.sin(th)], -1)
    m = s >= bounds[3]
    out[m] = np.stack([-a + (s[m] - bounds[3]), -r * np.ones(m.sum())], -1)
    return out, perimeter


def _equal_chord_walk(point: Callable, perimeter: float, J: int) -> np.ndarray:
    """Arclength positions of ``J`` points with equal consecutive chords on a convex curve."""

    def chord(s0, u):
        return float(np.linalg.norm(point(np.array([s0 + u]))[0] - point(np.array([s0]))[0]))

    def walk(c):
        s = [0.0]
        for _ in range(J - 1):
            s0 = s[-1]
            s.append(s0 + brentq(lambda u: chord(s0, u) - c, 0.5 * c, 2.0 * c, xtol=1e-15))
        return np.array(s)

    def closing_gap(c):
        s = walk(c)
        return chord(s[-1], perimeter - s[-1]) - c if s[-1] < perimeter else -c

    c0 = perimeter / J
    c = brentq(closing_gap, 0.99 * c0, c0, xtol=1e-15)
    return walk(c)


def tube_nodes(J: int, length: float = 8.0, width: float = 1.0) -> np.ndarray:
    """Stadium of total size ``length x width`` with equal element lengths."""
    if not length > width > 0:
        raise InvalidArgumentError("tube needs length > width > 0")
    _, perimeter = _stadium_point(np.zeros(1), length, width)
    s = _equal_chord_walk(lambda s: _stadium_point(s, length, width)[0], perimeter, J)
    return _stadium_point(s, length, width)[0]


def semicircle_nodes(J: int) -> np.ndarray:
    """``J - 1`` equispaced nodes on the upper unit semicircle and one node at (0, -1)."""
    theta = np.pi * np.arange(J - 1) / (J - 2)
    upper = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return np.vstack([upper, [[0.0, -1.0]]])


SLIT_VERTICES = np.array([
    [0.01, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0],
    [-0.01, -1.0], [-0.01, 0.8], [0.01, 0.8],
])


def slit_nodes(J: int) -> np.ndarray:
    """Boundary of ``[-1, 1]^2`` minus ``[-0.01, 0.01] x [-1, 0.8]``, equidistributed by arclength."""
    closed = np.vstack([SLIT_VERTICES, SLIT_VERTICES[:1]])
    perimeter = np.linalg.norm(np.diff(closed, axis=0), axis=1).sum()
    return _polygon_at_arclength(SLIT_VERTICES, perimeter * np.arange(J) / J)


def helix_nodes(J: int) -> np.ndarray:
    """Eight-turn helix closed by the polygon through (0, 0, 1) and the origin."""
    if J < 6:
        raise InvalidArgumentError("helix needs J >= 6")
    sigma = np.arange(J - 2) / (J - 3)
    w = 16 * np.pi * sigma
    open_part = np.stack([np.sin(w), np.cos(w), sigma], axis=-1)
    return np.vstack([open_part, [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]])


def lemniscate_nodes(J: int, samples: int = 200_000) -> np.ndarray:
    """2:1 figure-eight, nodes equidistributed by arclength and offset by half a spacing."""
    u = np.linspace(0.0, TWO_PI, samples + 1)
    speed = np.linalg.norm(np.stack([-np.sin(u), np.cos(2 * u)], -1), axis=1)
    s = cumulative_trapezoid(speed, u, initial=0.0)
    targets = s[-1] * (np.arange(J) + 0.5) / J
    return _gerono(np.interp(targets, s, u))


def _sample(smooth: SmoothMap, J: int) -> np.ndarray:
    return smooth(np.arange(J) / J)[0]


REGISTRY: dict[str, CurveGenerator] = {}


def _register(gen: CurveGenerator):
    REGISTRY[gen.name] = gen


_register(CurveGenerator("circle", 2, lambda J, delta=0.1: _sample(_circle_map(delta), J),
                         smooth=_circle_map, params=("delta",),
                         description="unit circle with the non-uniform parameterization g"))
_register(CurveGenerator("tube", 2, tube_nodes, description="8 x 1 stadium, equal elements"))
_register(CurveGenerator("semicircle-node", 2, semicircle_nodes,
                         description="upper unit semicircle plus one node at (0, -1)"))
_register(CurveGenerator("slit", 2, slit_nodes,
                         description="2 x 2 square minus a 0.02 x 1.8 slit from the bottom"))
_register(CurveGenerator("interlocked-rings", 3, lambda J: _sample(_rings_map(), J),
                         smooth=lambda: _rings_map(), description="two interlocked rings"))
_register(CurveGenerator("helix", 3, helix_nodes, description="closed eight-turn helix"))
_register(CurveGenerator("lemniscate", 2, lemniscate_nodes,
                         description="2:1 figure-eight, arclength-equidistributed"))
_register(CurveGenerator("hypocycloid", 3,
                         lambda J, delta=0.0: _sample(_hypocycloid_map(delta), J),
                         smooth=_hypocycloid_map, params=("delta",),
                         description="five-fold hypocycloid, lifted by delta sin(6 pi rho)"))


def scenario_names() -> list:
    return list(REGISTRY)


def _generator(name: str) -> CurveGenerator:
    try:
        return REGISTRY[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown curve {name!r}; known: {', '.join(REGISTRY)}") from None


def _check_params(gen: CurveGenerator, params: dict) -> dict:
    extra = set(params) - set(gen.params)
    if extra:
        raise InvalidArgumentError(f"{gen.name} takes no parameter(s) {sorted(extra)}")
    if "delta" in params:
        delta = float(params["delta"])
        if not (math.isfinite(delta) and 0.0 <= delta < 1.0):
            raise InvalidArgumentError("delta must lie in [0, 1)")
    return params


def make_initial_curve(name: str, J: int, **params) -> NodalField:
    """Nodal positions of the named curve on the uniform partition with ``J`` elements."""
    gen = _generator(name)
    if int(J) != J or J < 3:
        raise InvalidArgumentError("J must be an integer >= 3")
    params = _check_params(gen, params)
    values = np.asarray(gen.nodes(int(J), **params), dtype=float)
    return NodalField(uniform_partition(int(J)), values)


def smooth_map(name: str, **params) -> Optional[SmoothMap]:
    """Closed-form ``(x, x_rho, x_rhorho)`` of the named curve, or ``None`` for polygons."""
    gen = _generator(name)
    if gen.smooth is None:
        return None
    return gen.smooth(**_check_params(gen, params))


def initial_curve(name: str, J: int, mode: str = "interpolant", **params) -> NodalField:
    """Initial curve in the requested initial-data mode.

    Projected modes need the smooth map and are only available for the
    closed-form curves (``circle``, ``interlocked-rings``, ``hypocycloid``).
    """
    if mode == "interpolant":
        return make_initial_curve(name, J, **params)
    f = smooth_map(name, **params)
    if f is None:
        raise InvalidArgumentError(f"{mode} initial data needs a smooth curve; {name!r} is a polygon")

    def y0(rho):
        _, a, b = f(rho)
        return b / np.sum(a * a, axis=1)[:, None]

    return initial_position(lambda r: f(r)[0], uniform_partition(int(J)), mode,
                            y0=y0, x0_rho=lambda r: f(r)[1])


def load_polyline(path) -> NodalField:
    """Closed polygon from a text file with one node per row (comma or whitespace separated).

    The last row must not repeat the first; the node count sets ``J``.
    """
    path = Path(path)
    text = path.read_text()
    delimiter = "," if "," in text else None
    values = np.loadtxt(path, delimiter=delimiter, ndmin=2, comments="#")
    if values.shape[0] < 3 or values.shape[1] < 2:
        raise InvalidArgumentError(f"{path}: need at least 3 rows of >= 2 coordinates")
    return NodalField(uniform_partition(values.shape[0]), values)


# ---------------------------------------------------------------------------
# scenario configuration

_KEYS = {"name", "d", "J", "dt", "T", "flow", "lambda", "init", "delta",
         "snapshot_times", "sample_every", "out_dir", "polyline"}


@dataclass
class ScenarioSpec:
    """Everything one run needs; round-trips through the JSON scenario files."""

    name: str
    J: int = 512
    dt: float = 1e-4
    T: float = 1.0
    flow: FlowKind = FlowKind.CURVE_DIFFUSION
    lam: float = 0.0
    init: str = "interpolant"
    delta: Optional[float] = None
    d: Optional[int] = None
    snapshot_times: list = field(default_factory=list)
    sample_every: int = 10
    out_dir: Optional[str] = None
    polyline: Optional[str] = None

    def __post_init__(self):
        self.flow = FlowKind.parse(self.flow)
        if self.polyline is None:
            gen = _generator(self.name)
            if self.delta is not None and "delta" not in gen.params:
                raise InvalidArgumentError(f"{self.name} takes no delta")
            if self.d is None:
                self.d = gen.d
            elif self.d != gen.d:
                raise InvalidArgumentError(f"{self.name} lives in dimension {gen.d}, not {self.d}")
        if int(self.J) != self.J or self.J < 3:
            raise InvalidArgumentError("J must be an integer >= 3")
        self.J = int(self.J)
        for key in ("dt", "T"):
            v = float(getattr(self, key))
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{key} must be positive and finite")
            setattr(self, key, v)
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidArgumentError("lambda must be non-negative")
        if self.init not in INITIAL_MODES:
            raise InvalidArgumentError(f"init must be one of {INITIAL_MODES}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidArgumentError("sample_every must be a positive integer")
        self.sample_every = int(self.sample_every)
        times = [float(t) for t in self.snapshot_times]
        if any(not (math.isfinite(t) and 0 <= t <= self.T) for t in times):
            raise InvalidArgumentError("snapshot times must lie in [0, T]")
        self.snapshot_times = sorted(set(times))

    @property
    def params(self) -> dict:
        return {} if self.delta is None else {"delta": self.delta}

    def initial_curve(self) -> NodalField:
        if self.polyline is not None:
            if self.init != "interpolant":
                raise InvalidArgumentError("polyline input supports interpolant data only")
            x = load_polyline(self.polyline)
            if self.d is not None and x.d != self.d:
                raise InvalidArgumentError(f"{self.polyline} has dimension {x.d}, not {self.d}")
            return x
        return initial_curve(self.name, self.J, self.init, **self.params)

    @classmethod
    def from_dict(cls, data: dict, base: Optional[Path] = None) -> "ScenarioSpec":
        unknown = set(data) - _KEYS
        if unknown:
            raise InvalidArgumentError(f"unknown scenario key(s) {sorted(unknown)}")
        if "name" not in data:
            raise InvalidArgumentError("scenario needs a name")
        kw = {k: v for k, v in data.items() if k != "lambda"}
        if "lambda" in data:
            kw["lam"] = float(data["lambda"])
        if base is not None and kw.get("polyline"):
            kw["polyline"] = str((base / kw["polyline"]).resolve())
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InvalidArgumentError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise InvalidArgumentError(f"{path}: expected a JSON object")
        return cls.from_dict(data, base=path.parent)

    def to_dict(self) -> dict:
        out = {"name": self.name, "d": self.d, "J": self.J, "dt": self.dt, "T": self.T,
               "flow": self.flow.value, "lambda": self.lam, "init": self.init,
               "snapshot_times": list(self.snapshot_times), "sample_every": self.sample_every}
        for key in ("delta", "out_dir", "polyline"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out
