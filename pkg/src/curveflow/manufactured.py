"""Exact solutions and forcings for convergence tests.

Both families are moving circles ``x = c(t) + R(t) e(g(rho))`` with
``e(u) = (cos u, sin u)`` and the reparameterization
``g(rho) = 2 pi rho + delta sin(2 pi rho)``:

* ``cd``: ``c = (t^2, t^2)``, ``R = 1 + t^3`` (translated, dilated circle);
* ``el``: ``c = 0``, ``R = (1 + 2t)^(1/4)``, an exact elastic flow for ``lam = 0``.

With ``e' = e_perp = (-sin, cos)`` and ``p = g'' / g'^2`` all derivatives
follow in closed form:

    x_rho   = R g' e_perp
    x_rhorho = R (g'' e_perp - g'^2 e)
    y       = (p e_perp - e) / R
    y_rho   = ((p' - g') e_perp - p g' e) / R
    y_rhorho = ((p'' - g'' - p g'^2) e_perp - (2 p' g' + p g'' - g'^2) e) / R
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .forms import f2_apply, f1_scalar, f3_scalar

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ExactEval:
    """Exact fields at a set of points; every entry has shape (n, 2)."""

    x: np.ndarray
    x_t: np.ndarray
    x_rho: np.ndarray
    x_rhorho: np.ndarray
    y: np.ndarray
    y_rho: np.ndarray
    y_rhorho: np.ndarray


def reparam(rho, delta):
    """``g`` and its first four derivatives."""
    k = TWO_PI
    s, c = np.sin(k * rho), np.cos(k * rho)
    g = k * rho + delta * s
    g1 = k * (1.0 + delta * c)
    g2 = -k**2 * delta * s
    g3 = -k**3 * delta * c
    g4 = k**4 * delta * s
    return g, g1, g2, g3, g4


@dataclass(frozen=True)
class ManufacturedFamily:
    kind: str = "cd"
    delta: float = 0.1
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cd", "el"):
            raise InvalidArgumentError(f"unknown family {self.kind!r}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidArgumentError("delta must lie in [0, 1)")

    def _motion(self, t):
        if self.kind == "cd":
            return np.array([t * t, t * t]), np.array([2 * t, 2 * t]), 1.0 + t**3, 3.0 * t * t
        R = (1.0 + 2.0 * t) ** 0.25
        return np.zeros(2), np.zeros(2), R, 0.5 * (1.0 + 2.0 * t) ** -0.75

    def state(self, rho, t: float) -> ExactEval:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        centre, centre_t, R, R_t = self._motion(t)
        g, g1, g2, g3, g4 = reparam(rho, self.delta)
        e = np.stack([np.cos(g), np.sin(g)], axis=-1)
        ep = np.stack([-np.sin(g), np.cos(g)], axis=-1)

        p = g2 / g1**2
        p1 = g3 / g1**2 - 2.0 * g2**2 / g1**3
        p2 = g4 / g1**2 - 6.0 * g2 * g3 / g1**3 + 6.0 * g2**3 / g1**4

        def comb(u, v):
            return u[:, None] * ep + v[:, None] * e

        return ExactEval(
            x=centre + R * e,
            x_t=centre_t + R_t * e,
            x_rho=comb(R * g1, 0.0 * g1),
            x_rhorho=comb(R * g2, -R * g1**2),
            y=comb(p, -np.ones_like(p)) / R,
            y_rho=comb(p1 - g1, -p * g1) / R,
            y_rhorho=comb(p2 - g2 - p * g1**2, -(2.0 * p1 * g1 + p * g2 - g1**2)) / R,
        )

    def position(self, rho, t: float = 0.0) -> np.ndarray:
        return self.state(rho, t).x

    def curvature_variable(self, rho, t: float = 0.0) -> np.ndarray:
        """``y = x_rhorho / |x_rho|^2``."""
        return self.state(rho, t).y

    def forcing(self, rho, t: float) -> np.ndarray:
        """Residual ``|x_rho|^2 x_t + y_rhorho - F(x_rho, y, y_rho) y`` of the exact solution."""
        ex = self.state(rho, t)
        a, b, c = ex.x_rho, ex.y, ex.y_rho
        aa = np.einsum("ni,ni->n", a, a)
        Fy = f1_scalar(a, b, c)[:, None] * b + f2_apply(a, b, c, b)
        if self.kind == "el":
            Fy = Fy + f3_scalar(a, b, self.lam)[:, None] * b
        return aa[:, None] * ex.x_t + ex.y_rhorho - Fy

    def radius(self, t: float) -> float:
        return float(self._motion(t)[2])
