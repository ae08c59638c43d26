"""Initial data and the linear semi-implicit time step.

One step solves, for ``(X, Y) = (x^{m+1}, y^{m+1})``,

    Mw X - dt (A + B) Y = Mw x^m + dt (b_el + b_f)
    A X + Mw Y          = 0

where ``Mw`` is the mass matrix weighted by ``|x^m_rho|^2``, ``A`` the
stiffness matrix, ``B`` the implicit curve-diffusion coupling frozen at
``(x^m, y^m)``, ``b_el`` the explicit elastic load (elastic flow only) and
``b_f`` a lumped manufactured forcing.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .errors import DegenerateCurveError, InvalidArgumentError, SingularSystemError
from .linalg import blocks_to_sparse, cyclic_block_matvec, cyclic_block_solve
from .mesh import ERROR_QUADRATURE_POINTS, NodalField, Partition, element_geometry, interpolate

logger = logging.getLogger(__name__)

#: Target for the relative residual ``|rhs - K z| / |rhs|`` of each solve.
RESIDUAL_TOLERANCE = 1e-12
#: Residuals above this bound abort the step.
RESIDUAL_FAILURE = 1e-8
MAX_REFINEMENTS = 3
#: Largest ``d * J`` for which the dense solver may be selected.
DENSE_LIMIT = 256


class FlowKind(str, enum.Enum):
    CURVE_DIFFUSION = "curve_diffusion"
    ELASTIC = "elastic"

    @classmethod
    def parse(cls, value) -> "FlowKind":
        if isinstance(value, cls):
            return value
        aliases = {"cd": cls.CURVE_DIFFUSION, "curve-diffusion": cls.CURVE_DIFFUSION,
                   "curve_diffusion": cls.CURVE_DIFFUSION, "el": cls.ELASTIC,
                   "elastic": cls.ELASTIC}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise InvalidArgumentError(f"unknown flow kind {value!r}") from None


@dataclass(frozen=True)
class FlowSpec:
    """Flow kind, time step and optional manufactured forcing.

    ``forcing(rho, t)`` maps an array of parameter values to an (n, d) array.
    ``forcing_time`` selects whether it is evaluated at the old time ``t_m``
    (default) or the new time ``t_{m+1}``.
    """

    kind: FlowKind
    dt: float
    lam: float = 0.0
    forcing: Optional[Callable] = None
    forcing_time: str = "old"
    solver: str = "block"

    def __post_init__(self):
        object.__setattr__(self, "kind", FlowKind.parse(self.kind))
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise InvalidArgumentError(f"time step must be positive, got {self.dt!r}")
        if self.forcing_time not in ("old", "new"):
            raise InvalidArgumentError("forcing_time must be 'old' or 'new'")
        if self.solver not in ("block", "superlu", "dense"):
            raise InvalidArgumentError(f"unknown solver {self.solver!r}")

    @property
    def elastic(self) -> bool:
        return self.kind is FlowKind.ELASTIC


@dataclass(frozen=True)
class CurveState:
    m: int
    t: float
    x: NodalField
    y: NodalField

    @property
    def partition(self) -> Partition:
        return self.x.partition


@dataclass(frozen=True)
class StepInfo:
    """Diagnostics of a single solve."""

    residual: float
    refinements: int
    dirichlet_old: float = field(default=np.nan)
    dirichlet_new: float = field(default=np.nan)
    dissipation: float = field(default=np.nan)

    def stability_excess(self, dt: float) -> float:
        """Relative amount by which the discrete energy bound is exceeded (<= 0 if it holds)."""
        lhs = 0.5 * self.dirichlet_new + dt * self.dissipation
        rhs = 0.5 * self.dirichlet_old
        return (lhs - rhs) / rhs


def check_nondegenerate(x: NodalField, step: Optional[int] = None):
    geom = element_geometry(x)
    if geom.any_degenerate:
        bad = np.flatnonzero(geom.degenerate)
        where = "" if step is None else f" at step {step}"
        raise DegenerateCurveError(
            f"{bad.size} degenerate element(s){where}, first index {bad[0]}", elements=bad)
    return geom


# ---------------------------------------------------------------------------
# initial data

INITIAL_MODES = ("interpolant", "projected", "projected-lumped")
#: Step of the five-point difference for ``x0'``, relative to the mesh size.
_FD_STEP = 1e-2


def _central_derivative(f: Callable, h: float) -> Callable:
    eps = _FD_STEP * h

    def df(rho):
        v = [np.asarray(f(rho + k * eps), dtype=float) for k in (-2, -1, 1, 2)]
        return (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * eps)
    return df


def initial_position(x0: Callable, p: Partition, mode: str = "interpolant",
                     y0: Optional[Callable] = None,
                     x0_rho: Optional[Callable] = None) -> NodalField:
    """Discrete initial curve.

    ``interpolant``
        Nodal interpolant of ``x0``.
    ``projected``
        Solution of ``int X_rho . eta_rho + int X . eta = int x0 . eta
        - int y0 . eta |x0_rho|^2`` with both data integrals evaluated by
        5-point Gauss quadrature of the exact data.  Since
        ``y0 |x0_rho|^2 = x0_rhorho`` this is the H1 projection of ``x0``.
    ``projected-lumped``
        Same system with the data replaced by ``pi x0`` and the lumped
        product ``pi[y0] |(pi x0)_rho|^2``.  The constant mode of this right
        hand side is only O(h^2) small, so the result carries an O(h^2)
        translation with a large constant.

    Callables map a flat array of parameter values to (n, d) arrays.
    ``y0 = x0'' / |x0'|^2`` is required by both projected modes; ``x0_rho``
    defaults to a central difference of ``x0``.
    """
    xi = interpolate(x0, p)
    if mode == "interpolant":
        return xi
    if mode not in INITIAL_MODES:
        raise InvalidArgumentError(f"unknown initial-data mode {mode!r}")
    if y0 is None:
        raise InvalidArgumentError("projected initial data needs y0 = x0'' / |x0'|^2")
    A = assembly.stiffness(p)
    M = assembly.mass_scalar(p)
    if mode == "projected":
        dx = x0_rho if x0_rho is not None else _central_derivative(x0, p.h)

        def curvature_density(rho):
            a = np.asarray(dx(rho), dtype=float)
            return np.asarray(y0(rho), dtype=float) * np.sum(a * a, axis=1)[:, None]

        rhs = (assembly.consistent_load(x0, p, ERROR_QUADRATURE_POINTS)
               - assembly.consistent_load(curvature_density, p, ERROR_QUADRATURE_POINTS))
    else:
        check_nondegenerate(xi)
        w = np.sum(xi.derivative() ** 2, axis=1) * p.sizes
        weights = 0.5 * (w + np.roll(w, 1))
        rhs = M @ xi.values - interpolate(y0, p).values * weights[:, None]
    try:
        values = spla.splu(sp.csc_matrix(A + M)).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"initial projection failed: {exc}") from exc
    return NodalField(p, values)


def initial_y(x0h: NodalField) -> NodalField:
    """``y`` with ``int y . eta |x_rho|^2 + int x_rho . eta_rho = 0`` for all ``eta``."""
    check_nondegenerate(x0h)
    p = x0h.partition
    Mw = assembly.weighted_mass_scalar(x0h)
    A = assembly.stiffness(p)
    try:
        lu = spla.splu(sp.csc_matrix(Mw))
        values = lu.solve(-(A @ x0h.values))
    except RuntimeError as exc:
        raise SingularSystemError(f"initial curvature solve failed: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise SingularSystemError("initial curvature solve produced non-finite values")
    return NodalField(p, values)


def initial_state(x0h: NodalField) -> CurveState:
    return CurveState(0, 0.0, x0h, initial_y(x0h))


# ---------------------------------------------------------------------------
# system assembly

@dataclass
class StepSystem:
    """The step's linear system in node-interleaved cyclic block form.

    Block row ``i`` holds the unknowns ``(x_i, y_i)`` (block size ``2d``).
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray
    d: int

    def matvec(self, z: np.ndarray) -> np.ndarray:
        return cyclic_block_matvec(self.lower, self.diag, self.upper, z)

    def to_sparse(self) -> sp.csr_matrix:
        """The matrix with the x-block first, then the y-block (components interleaved)."""
        K = blocks_to_sparse(self.lower, self.diag, self.upper)
        perm = block_to_stacked_permutation(self.diag.shape[0], self.d)
        return K[perm][:, perm].tocsr()

    def stacked_rhs(self) -> np.ndarray:
        J, d = self.rhs.shape[0], self.d
        return np.concatenate([self.rhs[:, :d].ravel(), self.rhs[:, d:].ravel()])


def block_to_stacked_permutation(J: int, d: int) -> np.ndarray:
    """``perm[k]`` is the block-ordering index of stacked index ``k``."""
    i = np.arange(J)[:, None]
    k = np.arange(d)[None, :]
    xs = (i * 2 * d + k).ravel()
    ys = (i * 2 * d + d + k).ravel()
    return np.concatenate([xs, ys])


def _forcing_load(state: CurveState, spec: FlowSpec) -> Optional[np.ndarray]:
    if spec.forcing is None:
        return None
    t = state.t if spec.forcing_time == "old" else (state.m + 1) * spec.dt
    return assembly.lumped_load(spec.forcing, state.partition, t)


def assemble_step(state: CurveState, spec: FlowSpec, fused: bool = True) -> StepSystem:
    """Build the step's system.

    ``fused=True`` uses the compiled element loop; ``fused=False`` composes
    the vectorized element kernels of :mod:`curveflow.assembly`.  Both give
    the same matrix up to rounding.
    """
    x, y = state.x, state.y
    d = x.d
    if fused:
        lower, diag, upper, rhs = assembly.step_blocks(x, y, spec.dt, spec.lam, spec.elastic)
    else:
        lower, diag, upper, rhs = _assemble_reference(x, y, spec)
    f = _forcing_load(state, spec)
    if f is not None:
        rhs[:, :d] += spec.dt * f
    return StepSystem(lower, diag, upper, rhs, d)


def _assemble_reference(x: NodalField, y: NodalField, spec: FlowSpec):
    p = x.partition
    J, d = x.J, x.d
    dt = spec.dt
    a = x.derivative()
    mw = assembly.mass_local(p, np.einsum("ei,ei->e", a, a))     # (J, 2, 2)
    st = assembly.stiffness_local(p)
    B = assembly.coupling_local(x, y)                             # (J, 2, d, 2, d)

    K = np.zeros((J, 2, 2 * d, 2, 2 * d))
    K[:, :, :d, :, d:] = -dt * B
    for i in range(d):
        K[:, :, i, :, i] = mw
        K[:, :, i, :, d + i] -= dt * st
        K[:, :, d + i, :, i] = st
        K[:, :, d + i, :, d + i] = mw

    diag = K[:, 0, :, 0, :] + np.roll(K[:, 1, :, 1, :], 1, axis=0)
    upper = np.ascontiguousarray(K[:, 0, :, 1, :])
    lower = np.roll(K[:, 1, :, 0, :], 1, axis=0)

    rhs = np.zeros((J, 2 * d))
    rhs[:, :d] = assembly.scatter_vector(np.einsum("eab,ebi->eai", mw, _pair(x.values)))
    if spec.elastic:
        rhs[:, :d] += dt * assembly.f3_load(x, y, spec.lam)
    return lower, diag, upper, rhs


def _pair(values: np.ndarray) -> np.ndarray:
    """Nodal values of the two local nodes of every element, shape (J, 2, d)."""
    return np.stack([values, np.roll(values, -1, axis=0)], axis=1)


# ---------------------------------------------------------------------------
# solve

def _solve(system: StepSystem, solver: str, m: int) -> tuple[np.ndarray, float, int]:
    J = system.diag.shape[0]
    d = system.d
    rhs = system.rhs

    if solver == "block":
        def solve(b):
            return cyclic_block_solve(system.lower, system.diag, system.upper, b)
    else:
        if solver == "dense" and d * J > DENSE_LIMIT:
            raise InvalidArgumentError(f"dense solver limited to d*J <= {DENSE_LIMIT}")
        perm = block_to_stacked_permutation(J, d)
        K = system.to_sparse()
        if solver == "dense":
            Kd = K.toarray()

            def stacked(b):
                return np.linalg.solve(Kd, b)
        else:
            lu = spla.splu(sp.csc_matrix(K))
            stacked = lu.solve

        def solve(b):
            out = np.empty(2 * d * J)
            out[perm] = stacked(b.ravel()[perm])
            return out.reshape(J, 2 * d)

    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        scale = 1.0
    try:
        z = solve(rhs)
        r = rhs - system.matvec(z)
        res = np.linalg.norm(r) / scale
        refinements = 0
        while res > RESIDUAL_TOLERANCE and refinements < MAX_REFINEMENTS:
            z_new = z + solve(r)
            r_new = rhs - system.matvec(z_new)
            res_new = np.linalg.norm(r_new) / scale
            refinements += 1
            if not res_new < res:
                break
            z, r, res = z_new, r_new, res_new
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise SingularSystemError(f"linear solve failed at step {m}: {exc}", step=m) from exc
    if not np.isfinite(res) or res > RESIDUAL_FAILURE:
        raise SingularSystemError(
            f"residual {res:.3e} too large at step {m}", step=m, residual=res)
    if res > RESIDUAL_TOLERANCE:
        logger.debug("step %d: residual %.3e after %d refinements", m, res, refinements)
    return z, res, refinements


def step_with_info(state: CurveState, spec: FlowSpec,
                   stability: bool = False) -> tuple[CurveState, StepInfo]:
    """Advance one step; optionally evaluate the terms of the energy bound."""
    check_nondegenerate(state.x, state.m)
    system = assemble_step(state, spec)
    z, res, refinements = _solve(system, spec.solver, state.m)
    d = state.x.d
    p = state.partition
    new = CurveState(state.m + 1, (state.m + 1) * spec.dt,
                     NodalField(p, z[:, :d]), NodalField(p, z[:, d:]))
    info = StepInfo(res, refinements)
    if stability:
        info = replace(info,
                       dirichlet_old=state.x.dirichlet_energy(),
                       dirichlet_new=new.x.dirichlet_energy(),
                       dissipation=assembly.dissipation(state.x, state.y, new.y))
    return new, info


def step(state: CurveState, spec: FlowSpec) -> CurveState:
    return step_with_info(state, spec)[0]
