"""Element-wise assembly of the mass, stiffness, coupling and load terms.

Every integrand in the schemes is a polynomial of degree <= 4 on each
element, so the 3-point Gauss rule used throughout is exact.

Global operators act on stacked nodal unknowns with the components of a node
interleaved: entry ``i * d + k`` is component ``k`` of node ``i``.  Element
kernels return arrays indexed ``[element, local node, ...]`` where local
node 0 is node ``e`` and local node 1 is node ``(e + 1) % J``.
"""

from __future__ import annotations

from typing import Callable

import numba
import numpy as np
import scipy.sparse as sp

from .forms import f2_matrix, f3_scalar
from .mesh import SCHEME_QUADRATURE_POINTS, NodalField, Partition, gauss_legendre

_LOCAL_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
_LOCAL_STIFF = np.array([[1.0, -1.0], [-1.0, 1.0]])


def _basis(s):
    """Hat functions on the reference element at points ``s``, shape (2, n)."""
    s = np.asarray(s, dtype=float)
    return np.stack([1.0 - s, s])


def _basis_derivative(p: Partition) -> np.ndarray:
    """Derivatives of the two local hat functions on each element, shape (J, 2)."""
    inv = 1.0 / p.sizes
    return np.stack([-inv, inv], axis=1)


# ---------------------------------------------------------------------------
# element kernels

def mass_local(p: Partition, weight=None) -> np.ndarray:
    """``int chi_a chi_b w`` for an element-wise constant weight, shape (J, 2, 2)."""
    scale = p.sizes if weight is None else p.sizes * np.asarray(weight, dtype=float)
    return scale[:, None, None] * _LOCAL_MASS


def stiffness_local(p: Partition) -> np.ndarray:
    return (1.0 / p.sizes)[:, None, None] * _LOCAL_STIFF


def coupling_local(x: NodalField, y: NodalField) -> np.ndarray:
    """Element matrices of the implicit curve-diffusion coupling.

    Realizes, for trial ``Y`` and test ``chi``,
    ``2 int (Y_rho . x_rho)(y . chi) + int |x_rho|^2 (y . Y)(y . chi)
    + int F2(x_rho, y, y_rho) Y . chi``.

    Returns an array of shape (J, 2, d, 2, d) indexed
    ``[element, test node, test comp, trial node, trial comp]``.
    """
    p = x.partition
    h = p.sizes
    s, w = gauss_legendre(SCHEME_QUADRATURE_POINTS)
    phi = _basis(s)                                   # (2, g)
    dphi = _basis_derivative(p)                       # (J, 2)
    a = x.derivative()                                # (J, d)
    c = y.derivative()                                # (J, d)
    yg = y.at_local(s)                                # (J, g, d)

    # 2 (Y_rho . a)(y . chi)
    y_phi = h[:, None, None] * np.tensordot(yg, (w * phi).T, axes=([1], [0]))   # (J, d, 2)
    first = (2.0 * y_phi.transpose(0, 2, 1)[:, :, :, None, None]
             * dphi[:, None, None, :, None] * a[:, None, None, None, :])

    # |a|^2 (y . Y)(y . chi) + F2(a, y, c) Y . chi, both degree 4
    aa = np.einsum("ei,ei->e", a, a)
    kernel = aa[:, None, None, None] * yg[..., :, None] * yg[..., None, :]
    kernel += f2_matrix(a[:, None, :], yg, c[:, None, :])
    weights = w[:, None, None] * phi.T[:, :, None] * phi.T[:, None, :]         # (g, 2, 2)
    rest = np.tensordot(kernel, weights, axes=([1], [0]))                       # (J, d, d, 2, 2)
    rest = h[:, None, None, None, None] * rest.transpose(0, 3, 1, 4, 2)
    return first + rest


def f3_load_local(x: NodalField, y: NodalField, lam: float) -> np.ndarray:
    """``int F3(x_rho, y) y . chi`` per element and local node, shape (J, 2, d)."""
    p = x.partition
    s, w = gauss_legendre(SCHEME_QUADRATURE_POINTS)
    phi = _basis(s)
    hw = p.sizes[:, None] * w[None, :]
    a = x.derivative()
    yg = y.at_local(s)
    factor = f3_scalar(a[:, None, :], yg, lam)        # (J, g)
    return np.einsum("eg,ag,eg,egi->eai", hw, phi, factor, yg)


def dissipation(x: NodalField, y_old: NodalField, y_new: NodalField) -> float:
    """``int |Y_rho + (y . Y) x_rho|^2`` with ``y = y_old``, ``Y = y_new``."""
    p = x.partition
    s, w = gauss_legendre(SCHEME_QUADRATURE_POINTS)
    hw = p.sizes[:, None] * w[None, :]
    a = x.derivative()
    yy = np.einsum("egi,egi->eg", y_old.at_local(s), y_new.at_local(s))
    v = y_new.derivative()[:, None, :] + yy[..., None] * a[:, None, :]
    return float(np.sum(hw * np.einsum("egi,egi->eg", v, v)))


# ---------------------------------------------------------------------------
# global realizations

def _element_nodes(J: int) -> np.ndarray:
    e = np.arange(J)
    return np.stack([e, (e + 1) % J], axis=1)


def scatter_scalar(local: np.ndarray) -> sp.csr_matrix:
    """Sum (J, 2, 2) element matrices into a J x J cyclic tridiagonal matrix."""
    J = local.shape[0]
    nodes = _element_nodes(J)
    rows = np.repeat(nodes, 2, axis=1).ravel()
    cols = np.tile(nodes, (1, 2)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(J, J))


def scatter_block(local: np.ndarray) -> sp.csr_matrix:
    """Sum (J, 2, d, 2, d) element matrices into a dJ x dJ operator."""
    J, _, d = local.shape[:3]
    nodes = _element_nodes(J)
    comp = np.arange(d)
    row = (nodes[:, :, None] * d + comp)[:, :, :, None, None]
    col = (nodes[:, :, None] * d + comp)[:, None, None, :, :]
    rows = np.broadcast_to(row, local.shape).ravel()
    cols = np.broadcast_to(col, local.shape).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(d * J, d * J))


def scatter_vector(local: np.ndarray) -> np.ndarray:
    """Sum (J, 2, d) element vectors into nodal values, shape (J, d)."""
    out = local[:, 0, :].copy()
    out += np.roll(local[:, 1, :], 1, axis=0)
    return out


def expand_components(scalar: sp.spmatrix, d: int) -> sp.csr_matrix:
    """Scalar operator acting identically on each of ``d`` interleaved components."""
    return sp.kron(scalar, sp.identity(d), format="csr")


# ---------------------------------------------------------------------------
# public operators

def weighted_mass(x: NodalField) -> sp.csr_matrix:
    """``int chi_j chi_k |x_rho|^2`` on every component, dJ x dJ."""
    a = x.derivative()
    return expand_components(scatter_scalar(mass_local(x.partition, np.sum(a * a, axis=1))), x.d)


def weighted_mass_scalar(x: NodalField) -> sp.csr_matrix:
    a = x.derivative()
    return scatter_scalar(mass_local(x.partition, np.sum(a * a, axis=1)))


def mass_scalar(p: Partition) -> sp.csr_matrix:
    return scatter_scalar(mass_local(p))


def stiffness(p: Partition, d: int = 1) -> sp.csr_matrix:
    """``int chi_j' chi_k'``; with ``d > 1`` expanded to interleaved components."""
    A = scatter_scalar(stiffness_local(p))
    return A if d == 1 else expand_components(A, d)


def cd_implicit_coupling(x: NodalField, y: NodalField) -> sp.csr_matrix:
    return scatter_block(coupling_local(x, y))


def f3_load(x: NodalField, y: NodalField, lam: float) -> np.ndarray:
    """Nodal load ``int F3(x_rho, y) y . chi_j``, shape (J, d)."""
    return scatter_vector(f3_load_local(x, y, lam))


def lumped_load(f: Callable, p: Partition, *args) -> np.ndarray:
    """``int pi^h[f . chi_j] = f(q_j) (h_{j-1} + h_j) / 2``, shape (J, d).

    ``f`` is called once with the node array (and ``*args``, e.g. the time).
    """
    vals = np.asarray(f(p.node_points, *args), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals * p.lumped_weights()[:, None]


def consistent_load(f: Callable, p: Partition, n: int = 5, *args) -> np.ndarray:
    """``int f . chi_j`` by an ``n``-point Gauss rule per element."""
    s, rho, wts = p.quadrature(n)
    vals = np.asarray(f(rho.ravel(), *args), dtype=float).reshape(p.J, n, -1)
    phi = _basis(s)
    local = np.einsum("eg,ag,egi->eai", wts, phi, vals)
    return scatter_vector(local)


# ---------------------------------------------------------------------------
# fused kernel for the time step

_GAUSS_S, _GAUSS_W = (np.array(v) for v in gauss_legendre(SCHEME_QUADRATURE_POINTS))


@numba.njit(cache=True)
def _step_blocks(X, Y, h, dt, lam, elastic, gs, gw):
    J, d = X.shape
    s = 2 * d
    lower = np.zeros((J, s, s))
    diag = np.zeros((J, s, s))
    upper = np.zeros((J, s, s))
    rhs = np.zeros((J, s))
    a = np.empty(d)
    c = np.empty(d)
    yg = np.empty(d)
    loc = np.zeros((2, s, 2, s))
    load = np.zeros((2, d))
    for e in range(J):
        n0 = e
        n1 = (e + 1) % J
        he = h[e]
        aa = 0.0
        for i in range(d):
            a[i] = (X[n1, i] - X[n0, i]) / he
            c[i] = (Y[n1, i] - Y[n0, i]) / he
            aa += a[i] * a[i]
        dphi0 = -1.0 / he
        dphi1 = 1.0 / he
        loc[:] = 0.0
        load[:] = 0.0
        m_diag = he * aa / 3.0
        m_off = he * aa / 6.0
        k_diag = 1.0 / he
        for al in range(2):
            for be in range(2):
                mv = m_diag if al == be else m_off
                kv = k_diag if al == be else -k_diag
                for i in range(d):
                    loc[al, i, be, i] = mv
                    loc[al, i, be, d + i] = -dt * kv
                    loc[al, d + i, be, i] = kv
                    loc[al, d + i, be, d + i] = mv
        for g in range(gs.shape[0]):
            sg = gs[g]
            wg = he * gw[g]
            phi0 = 1.0 - sg
            phi1 = sg
            ay = 0.0
            yy = 0.0
            for i in range(d):
                yg[i] = phi0 * Y[n0, i] + phi1 * Y[n1, i]
                ay += a[i] * yg[i]
                yy += yg[i] * yg[i]
            for al in range(2):
                pa = phi0 if al == 0 else phi1
                for be in range(2):
                    pb = phi0 if be == 0 else phi1
                    db = dphi0 if be == 0 else dphi1
                    for i in range(d):
                        for j in range(d):
                            f2 = 2.0 * (c[i] * a[j] - a[i] * c[j]) + 2.0 * ay * (a[i] * yg[j] - yg[i] * a[j])
                            v = 2.0 * pa * yg[i] * db * a[j] + pa * pb * (aa * yg[i] * yg[j] + f2)
                            loc[al, i, be, d + j] -= dt * wg * v
            if elastic:
                f3 = -0.5 * (aa * yy - ay * ay) + lam * aa
                for i in range(d):
                    load[0, i] += wg * phi0 * f3 * yg[i]
                    load[1, i] += wg * phi1 * f3 * yg[i]
        for i in range(d):
            rhs[n0, i] += m_diag * X[n0, i] + m_off * X[n1, i] + dt * load[0, i]
            rhs[n1, i] += m_off * X[n0, i] + m_diag * X[n1, i] + dt * load[1, i]
        for i in range(s):
            for j in range(s):
                diag[n0, i, j] += loc[0, i, 0, j]
                diag[n1, i, j] += loc[1, i, 1, j]
                upper[n0, i, j] += loc[0, i, 1, j]
                lower[n1, i, j] += loc[1, i, 0, j]
    return lower, diag, upper, rhs


def step_blocks(x: NodalField, y: NodalField, dt: float, lam: float = 0.0,
                elastic: bool = False):
    """Cyclic block form ``(lower, diag, upper, rhs)`` of one time step.

    Block row ``i`` holds ``(x_i, y_i)``; the right-hand side includes the
    old-position mass term and, for elastic flow, the explicit load.
    """
    return _step_blocks(np.ascontiguousarray(x.values), np.ascontiguousarray(y.values),
                        np.ascontiguousarray(x.partition.sizes), float(dt), float(lam),
                        bool(elastic), _GAUSS_S, _GAUSS_W)
