"""Coefficient matrices of the curve-diffusion and elastic systems.

The arguments ``a, b, c`` stand for ``x_rho, y, y_rho``.  All functions
broadcast over leading axes: inputs of shape (..., d) give matrices of shape
(..., d, d) and scalars of shape (...).
"""

from __future__ import annotations

import numpy as np


def _dot(u, v):
    return np.einsum("...i,...i->...", u, v)


def _outer(u, v):
    return u[..., :, None] * v[..., None, :]


def _scaled_identity(s, d):
    s = np.asarray(s, dtype=float)
    return s[..., None, None] * np.eye(d)


def f1_scalar(a, b, c):
    """Factor ``2 a.c + |a|^2 |b|^2`` of the symmetric part."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    return 2.0 * _dot(a, c) + _dot(a, a) * _dot(b, b)


def f1_matrix(a, b, c):
    a = np.asarray(a, dtype=float)
    return _scaled_identity(f1_scalar(a, b, c), a.shape[-1])


def f2_matrix(a, b, c):
    """Antisymmetric part ``2(c (x) a - a (x) c) + 2(a.b)(a (x) b - b (x) a)``."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    ab = _dot(a, b)[..., None, None]
    return 2.0 * (_outer(c, a) - _outer(a, c)) + 2.0 * ab * (_outer(a, b) - _outer(b, a))


def f2_apply(a, b, c, z):
    """``f2_matrix(a, b, c) @ z`` without forming the matrix."""
    a, b, c, z = (np.asarray(v, dtype=float) for v in (a, b, c, z))
    az, cz, bz = _dot(a, z), _dot(c, z), _dot(b, z)
    ab = _dot(a, b)
    return (2.0 * (c * az[..., None] - a * cz[..., None])
            + 2.0 * ab[..., None] * (a * bz[..., None] - b * az[..., None]))


def f3_scalar(a, b, lam):
    """Factor ``-1/2 (|a|^2 |b|^2 - (a.b)^2) + lam |a|^2`` of the elastic term."""
    a, b = (np.asarray(v, dtype=float) for v in (a, b))
    aa = _dot(a, a)
    ab = _dot(a, b)
    return -0.5 * (aa * _dot(b, b) - ab * ab) + lam * aa


def f3_matrix(a, b, lam):
    a = np.asarray(a, dtype=float)
    return _scaled_identity(f3_scalar(a, b, lam), a.shape[-1])


def fcd_matrix(a, b, c):
    return f1_matrix(a, b, c) + f2_matrix(a, b, c)


def fel_matrix(a, b, c, lam):
    return fcd_matrix(a, b, c) + f3_matrix(a, b, lam)
