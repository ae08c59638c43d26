"""Scalar diagnostics of a discrete curve."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateCurveError
from .mesh import SCHEME_QUADRATURE_POINTS, NodalField, element_geometry, gauss_legendre


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    length: float
    dirichlet: float
    area: Optional[float]
    ratio: float
    k_inf: float
    elastic: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)


def _geometry(x: NodalField):
    geom = element_geometry(x)
    if geom.any_degenerate:
        raise DegenerateCurveError("monitor evaluated on a degenerate polygon",
                                   elements=np.flatnonzero(geom.degenerate))
    return geom


def mesh_ratio(x: NodalField) -> float:
    """Longest over shortest element."""
    L = _geometry(x).lengths
    return float(L.max() / L.min())


def discrete_curvature(x: NodalField) -> tuple[NodalField, float]:
    """Mass-lumped curvature vector and its maximal nodal magnitude.

    At node ``i`` the lumped system reduces to
    ``kappa_i = (tau_i - tau_{i-1}) / ((L_{i-1} + L_i) / 2)`` where ``tau_e`` is
    the unit tangent of element ``e``.
    """
    geom = _geometry(x)
    tau = geom.tangents
    L = geom.lengths
    kappa = (tau - np.roll(tau, 1, axis=0)) / (0.5 * (L + np.roll(L, 1)))[:, None]
    field = NodalField(x.partition, kappa)
    return field, float(np.max(np.linalg.norm(kappa, axis=1)))


def signed_area(x: NodalField) -> float:
    """Shoelace area of a planar polygon (positive for counter-clockwise)."""
    if x.d != 2:
        raise ValueError("signed area is defined for planar curves only")
    p = x.values
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def elastic_energy(x: NodalField, y: NodalField, lam: float = 0.0) -> float:
    """``1/2 int |P y|^2 |x_rho| + lam int |x_rho|`` with element-wise tangents."""
    geom = _geometry(x)
    tau = geom.tangents
    s, w = gauss_legendre(SCHEME_QUADRATURE_POINTS)
    yg = y.at_local(s)                                       # (J, g, d)
    normal = yg - np.einsum("egi,ei->eg", yg, tau)[..., None] * tau[:, None, :]
    # |x_rho| drho = L_e ds on element e
    bending = 0.5 * np.sum(geom.lengths[:, None] * w[None, :] * np.sum(normal**2, axis=2))
    return float(bending + lam * geom.lengths.sum())


def scalar_monitors(state, lam: Optional[float] = None) -> MonitorRecord:
    """All monitors of a :class:`~curveflow.stepper.CurveState`.

    ``lam`` enables the elastic energy; ``None`` leaves it undefined.
    """
    x = state.x
    geom = _geometry(x)
    L = geom.lengths
    _, k_inf = discrete_curvature(x)
    return MonitorRecord(
        t=float(state.t),
        length=float(L.sum()),
        dirichlet=float(np.sum(L**2 / x.partition.sizes)),
        area=signed_area(x) if x.d == 2 else None,
        ratio=float(L.max() / L.min()),
        k_inf=k_inf,
        elastic=None if lam is None else elastic_energy(x, state.y, lam),
    )
