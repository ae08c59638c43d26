"""Periodic partitions of the unit interval and piecewise linear nodal fields.

Element ``e`` (0-based) is the interval ``[q_e, q_{e+1}]`` and joins node
``e`` to node ``(e + 1) % J``.  Node ``J`` is identified with node ``0``;
periodicity is handled by index arithmetic, a field stores exactly ``J``
nodal values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError

#: Scheme integrals are polynomial of degree <= 4 per element.
SCHEME_QUADRATURE_POINTS = 3
#: Error norms integrate non-polynomial exact solutions.
ERROR_QUADRATURE_POINTS = 5

#: Relative element length below which an element counts as degenerate.
DEGENERACY_TOLERANCE = 1e-12


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights mapped to the reference element [0, 1]."""
    pts, wts = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (pts + 1.0)
    w = 0.5 * wts
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Partition:
    """Subdivision ``0 = q_0 < q_1 < ... < q_J = 1`` of the periodic interval."""

    nodes: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.nodes, dtype=float)
        if q.ndim != 1 or q.size < 4:
            raise InvalidArgumentError("a closed polygon needs at least 3 elements")
        if q[0] != 0.0 or q[-1] != 1.0:
            raise InvalidArgumentError("partition must start at 0 and end at 1")
        if np.any(np.diff(q) <= 0.0):
            raise InvalidArgumentError("partition nodes must be strictly increasing")
        object.__setattr__(self, "nodes", _frozen(q))
        object.__setattr__(self, "_sizes", _frozen(np.diff(q)))

    @property
    def J(self) -> int:
        return self.nodes.size - 1

    @property
    def sizes(self) -> np.ndarray:
        """Element sizes ``h_e = q_{e+1} - q_e``."""
        return self._sizes

    @property
    def h(self) -> float:
        return float(self._sizes.max())

    @property
    def quasi_uniformity(self) -> float:
        """Ratio ``max h_e / min h_e``."""
        return float(self._sizes.max() / self._sizes.min())

    @property
    def node_points(self) -> np.ndarray:
        """The ``J`` distinct node positions ``q_0, ..., q_{J-1}``."""
        return self.nodes[:-1]

    def lumped_weights(self) -> np.ndarray:
        """``(h_{i-1} + h_i) / 2`` for every node ``i`` (periodic)."""
        h = self._sizes
        return 0.5 * (h + np.roll(h, 1))

    def quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Element-wise Gauss rule.

        Returns
        -------
        s : (n,) local coordinates in [0, 1]
        rho : (J, n) global quadrature points
        weights : (J, n) weights including the element size
        """
        s, w = gauss_legendre(n)
        h = self._sizes
        rho = self.nodes[:-1, None] + h[:, None] * s[None, :]
        return s, rho, h[:, None] * w[None, :]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.nodes.shape == other.nodes.shape and bool(np.all(self.nodes == other.nodes))

    def __hash__(self):
        return hash(self.nodes.tobytes())


def uniform_partition(J: int) -> Partition:
    """Uniform partition with ``q_j = j / J``."""
    if int(J) != J or J < 3:
        raise InvalidArgumentError(f"J must be an integer >= 3, got {J!r}")
    J = int(J)
    return Partition(np.arange(J + 1) / J)


@dataclass(frozen=True, eq=False)
class NodalField:
    """Continuous, piecewise linear, periodic map ``I -> R^d``."""

    partition: Partition
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.partition.J:
            raise InvalidArgumentError(
                f"expected values of shape ({self.partition.J}, d), got {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def J(self) -> int:
        return self.partition.J

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def edges(self) -> np.ndarray:
        """``v_{e+1} - v_e`` for each element, shape (J, d)."""
        return np.roll(self.values, -1, axis=0) - self.values

    def derivative(self) -> np.ndarray:
        """Element-wise constant derivative, shape (J, d)."""
        return self.edges() / self.partition.sizes[:, None]

    def at_local(self, s: np.ndarray) -> np.ndarray:
        """Values at local coordinates ``s`` of every element, shape (J, len(s), d)."""
        s = np.asarray(s, dtype=float)
        v0 = self.values
        v1 = np.roll(v0, -1, axis=0)
        return (1.0 - s)[None, :, None] * v0[:, None, :] + s[None, :, None] * v1[:, None, :]

    def __call__(self, rho) -> np.ndarray:
        """Evaluate at arbitrary parameter values (taken modulo 1)."""
        rho = np.mod(np.asarray(rho, dtype=float), 1.0)
        q = self.partition.nodes
        e = np.clip(np.searchsorted(q, rho, side="right") - 1, 0, self.J - 1)
        s = (rho - q[e]) / self.partition.sizes[e]
        v0 = self.values[e]
        v1 = self.values[(e + 1) % self.J]
        return (1.0 - s)[..., None] * v0 + s[..., None] * v1

    def with_values(self, values) -> "NodalField":
        return NodalField(self.partition, values)

    def dirichlet_energy(self) -> float:
        """``int |v_rho|^2`` evaluated as ``sum |edge|^2 / h``."""
        edges = self.edges()
        return float(np.sum(np.sum(edges * edges, axis=1) / self.partition.sizes))


def interpolate(f: Callable, p: Partition) -> NodalField:
    """Lagrange interpolant: sample ``f`` at the nodes ``q_0, ..., q_{J-1}``.

    ``f`` is called once with the array of node positions and must return an
    array of shape (J, d) (a scalar-valued ``f`` may return shape (J,)).
    """
    q = p.node_points
    vals = np.asarray(f(q), dtype=float)
    if vals.ndim == 0:
        vals = np.full(q.shape, float(vals))
    if vals.shape[0] != p.J and vals.ndim == 2 and vals.shape[1] == p.J:
        vals = vals.T
    return NodalField(p, vals)


@dataclass(frozen=True)
class ElementGeometry:
    """Per-element chord lengths, derivatives and speeds of a nodal field."""

    lengths: np.ndarray
    derivative: np.ndarray
    speed: np.ndarray
    degenerate: np.ndarray

    @property
    def any_degenerate(self) -> bool:
        return bool(self.degenerate.any())

    @property
    def tangents(self) -> np.ndarray:
        """Unit tangents; rows of degenerate elements are NaN."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.derivative / self.speed[:, None]


def element_geometry(x: NodalField) -> ElementGeometry:
    edges = x.edges()
    lengths = np.sqrt(np.sum(edges * edges, axis=1))
    h = x.partition.sizes
    threshold = DEGENERACY_TOLERANCE * lengths.sum() / x.J
    degenerate = lengths <= threshold
    return ElementGeometry(
        lengths=lengths,
        derivative=edges / h[:, None],
        speed=lengths / h,
        degenerate=degenerate,
    )
