"""Assembled forms against an adaptive-quadrature oracle written from the integrals."""

import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.spatial.transform import Rotation

from curveflow import assembly
from curveflow.mesh import NodalField, Partition, uniform_partition

from conftest import diamond, random_curve

TOL = 1e-10


def random_partition(rng, J):
    while True:
        nodes = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, J - 1)), [1.0]])
        if np.min(np.diff(nodes)) > 0.05 / J:
            return Partition(nodes)


class Oracle:
    """Pointwise evaluation of P1 fields and hat functions on one element."""

    def __init__(self, p: Partition):
        self.p = p
        self.J = p.J

    def local(self, e, rho):
        return (rho - self.p.nodes[e]) / self.p.sizes[e]

    def field(self, X, e, rho):
        s = self.local(e, rho)
        return (1 - s) * X[e] + s * X[(e + 1) % self.J]

    def slope(self, X, e):
        return (X[(e + 1) % self.J] - X[e]) / self.p.sizes[e]

    def hat(self, j, e, rho):
        s = self.local(e, rho)
        if j == e:
            return 1 - s
        if j == (e + 1) % self.J:
            return s
        return 0.0

    def hat_slope(self, j, e):
        if j == e:
            return -1 / self.p.sizes[e]
        if j == (e + 1) % self.J:
            return 1 / self.p.sizes[e]
        return 0.0

    def integrate(self, integrand):
        """``sum_e int_{I_e} integrand(e, rho)`` by adaptive quadrature."""
        total = 0.0
        for e in range(self.J):
            a, b = self.p.nodes[e], self.p.nodes[e + 1]
            total += quad(lambda r: integrand(e, r), a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        return total


def f2_reference(a, b, c):
    return 2 * (np.outer(c, a) - np.outer(a, c)) + 2 * (a @ b) * (np.outer(a, b) - np.outer(b, a))


def instances():
    out = []
    for seed, J, d in [(1, 3, 2), (2, 4, 3), (3, 5, 2), (4, 3, 3)]:
        rng = np.random.default_rng(seed)
        p = random_partition(rng, J)
        X = rng.normal(size=(J, d))
        Y = rng.normal(size=(J, d))
        out.append((NodalField(p, X), NodalField(p, Y)))
    return out


@pytest.mark.parametrize("x,y", instances())
class TestAgainstQuadrature:
    def test_weighted_mass(self, x, y):
        o = Oracle(x.partition)
        M = assembly.weighted_mass_scalar(x).toarray()
        ref = np.array([[o.integrate(lambda e, r: o.hat(j, e, r) * o.hat(k, e, r)
                                     * (o.slope(x.values, e) @ o.slope(x.values, e)))
                         for k in range(o.J)] for j in range(o.J)])
        np.testing.assert_allclose(M, ref, atol=TOL * np.abs(ref).max())
        full = assembly.weighted_mass(x).toarray()
        np.testing.assert_allclose(full, np.kron(ref, np.eye(x.d)), atol=TOL * np.abs(ref).max())

    def test_stiffness_and_mass(self, x, y):
        o = Oracle(x.partition)
        A = assembly.stiffness(x.partition).toarray()
        M = assembly.mass_scalar(x.partition).toarray()
        refA = np.array([[o.integrate(lambda e, r: o.hat_slope(j, e) * o.hat_slope(k, e))
                          for k in range(o.J)] for j in range(o.J)])
        refM = np.array([[o.integrate(lambda e, r: o.hat(j, e, r) * o.hat(k, e, r))
                          for k in range(o.J)] for j in range(o.J)])
        np.testing.assert_allclose(A, refA, atol=TOL * np.abs(refA).max())
        np.testing.assert_allclose(M, refM, atol=TOL)

    def test_coupling(self, x, y):
        o = Oracle(x.partition)
        J, d = x.J, x.d
        B = assembly.cd_implicit_coupling(x, y).toarray()
        ref = np.zeros((d * J, d * J))
        for j in range(J):
            for k in range(J):
                for a in range(d):
                    for b in range(d):
                        def integrand(e, r):
                            xr = o.slope(x.values, e)
                            yv = o.field(y.values, e, r)
                            yr = o.slope(y.values, e)
                            chi, phi = o.hat(j, e, r), o.hat(k, e, r)
                            first = 2 * o.hat_slope(k, e) * xr[b] * yv[a] * chi
                            second = (xr @ xr) * yv[b] * phi * yv[a] * chi
                            third = f2_reference(xr, yv, yr)[a, b] * phi * chi
                            return first + second + third
                        ref[j * d + a, k * d + b] = o.integrate(integrand)
        np.testing.assert_allclose(B, ref, atol=TOL * np.abs(ref).max())

    def test_f3_load(self, x, y):
        o = Oracle(x.partition)
        lam = 0.37
        load = assembly.f3_load(x, y, lam)

        def f3(a, b):
            return -0.5 * ((a @ a) * (b @ b) - (a @ b) ** 2) + lam * (a @ a)

        ref = np.array([[o.integrate(lambda e, r: f3(o.slope(x.values, e), o.field(y.values, e, r))
                                     * o.field(y.values, e, r)[a] * o.hat(j, e, r))
                         for a in range(x.d)] for j in range(x.J)])
        np.testing.assert_allclose(load, ref, atol=TOL * np.abs(ref).max())

    def test_consistent_load(self, x, y):
        o = Oracle(x.partition)

        def f(rho):
            rho = np.asarray(rho)
            return np.stack([np.sin(3 * rho), np.cos(rho) ** 2], axis=-1)

        load = assembly.consistent_load(f, x.partition, 5)
        ref = np.array([[o.integrate(lambda e, r: f(np.array([r]))[0, a] * o.hat(j, e, r))
                         for a in range(2)] for j in range(x.J)])
        np.testing.assert_allclose(load, ref, atol=1e-9)

    def test_dissipation_identity(self, x, y):
        rng = np.random.default_rng(7)
        Ynew = x.with_values(rng.normal(size=x.values.shape))
        o = Oracle(x.partition)

        def integrand(e, r):
            v = o.slope(Ynew.values, e) + (o.field(y.values, e, r) @ o.field(Ynew.values, e, r)) \
                * o.slope(x.values, e)
            return v @ v

        ref = o.integrate(integrand)
        assert math.isclose(assembly.dissipation(x, y, Ynew), ref, rel_tol=TOL)
        z = Ynew.values.ravel()
        K = assembly.stiffness(x.partition, x.d) + assembly.cd_implicit_coupling(x, y)
        assert math.isclose(z @ (K @ z), ref, rel_tol=1e-10)


class TestExamples:
    def test_diamond_weighted_mass(self):
        M = assembly.weighted_mass_scalar(diamond()).toarray()
        np.testing.assert_allclose(np.diag(M), 16 / 3)
        assert math.isclose(M[0, 1], 4 / 3) and math.isclose(M[0, 3], 4 / 3)
        assert M[0, 2] == 0

    def test_constant_curve_zero_mass(self):
        x = NodalField(uniform_partition(6), np.ones((6, 2)))
        assert assembly.weighted_mass(x).count_nonzero() == 0

    def test_weighted_mass_row_sums(self):
        rng = np.random.default_rng(3)
        x = random_curve(rng, 9)
        M = assembly.weighted_mass_scalar(x)
        w = np.sum(x.derivative() ** 2, axis=1) * x.partition.sizes
        np.testing.assert_allclose(M.sum(axis=1).A1, 0.5 * (w + np.roll(w, 1)), rtol=1e-13)

    @pytest.mark.parametrize("J", [3, 8, 33])
    def test_uniform_stiffness(self, J):
        A = assembly.stiffness(uniform_partition(J)).toarray()
        np.testing.assert_allclose(np.diag(A), 2 * J)
        np.testing.assert_allclose(A[0, 1], -J)
        np.testing.assert_allclose(A[0, J - 1], -J)
        np.testing.assert_allclose(A.sum(axis=1), 0, atol=1e-12 * J)
        np.testing.assert_allclose(A @ np.full(J, 3.7), 0, atol=1e-11 * J)

    def test_sparsity_pattern(self):
        rng = np.random.default_rng(4)
        x = random_curve(rng, 7, d=3)
        y = x.with_values(rng.normal(size=(7, 3)))
        B = assembly.cd_implicit_coupling(x, y).toarray()
        node_dist = np.abs(np.subtract.outer(np.arange(21) // 3, np.arange(21) // 3))
        far = np.minimum(node_dist, 7 - node_dist) > 1
        assert np.all(B[far] == 0)

    def test_zero_y(self):
        rng = np.random.default_rng(5)
        x = random_curve(rng, 6)
        y0 = x.with_values(np.zeros((6, 2)))
        assert np.abs(assembly.cd_implicit_coupling(x, y0).toarray()).max() == 0
        assert np.abs(assembly.f3_load(x, y0, 1.0)).max() == 0

    def test_f3_load_straight_segment(self):
        # y parallel to the chord on a straight polygon and lam = 0: integrand vanishes
        p = uniform_partition(4)
        x = NodalField(p, np.array([[0.0, 0], [1, 0], [2, 0], [1, 0]]))
        y = NodalField(p, np.array([[1.0, 0], [-2, 0], [3, 0], [0.5, 0]]))
        np.testing.assert_allclose(assembly.f3_load(x, y, 0.0), 0, atol=1e-15)

    def test_lumped_load(self):
        p = uniform_partition(8)
        load = assembly.lumped_load(lambda q: np.tile([2.0, -3.0], (len(q), 1)), p)
        np.testing.assert_allclose(load, np.tile([2.0 / 8, -3.0 / 8], (8, 1)))
        vanishing = assembly.lumped_load(lambda q: np.stack([np.sin(8 * np.pi * q)] * 2, -1), p)
        np.testing.assert_allclose(vanishing, 0, atol=1e-14)

    def test_lumped_versus_consistent_second_order(self):
        def f(q):
            return np.stack([np.exp(np.sin(2 * np.pi * q)), np.cos(4 * np.pi * q)], -1)

        diffs = []
        for J in (16, 32, 64):
            p = uniform_partition(J)
            # compare per-node averages so the node weight h does not mask the rate
            diff = (assembly.lumped_load(f, p) - assembly.consistent_load(f, p, 5)) * J
            diffs.append(np.abs(diff).max())
        rates = [math.log2(diffs[k] / diffs[k + 1]) for k in range(2)]
        assert all(abs(r - 2) < 0.1 for r in rates), rates


@given(st.integers(3, 12), st.sampled_from([2, 3]), st.integers(0, 2**31))
def test_quadratic_form_nonnegative(J, d, seed):
    rng = np.random.default_rng(seed)
    x = random_curve(rng, J, d)
    y = x.with_values(rng.normal(size=(J, d)) * rng.uniform(0.1, 10))
    z = rng.normal(size=J * d)
    K = assembly.stiffness(x.partition, d) + assembly.cd_implicit_coupling(x, y)
    q = z @ (K @ z)
    ref = assembly.dissipation(x, y, x.with_values(z.reshape(J, d)))
    assert q >= -1e-12 * (1 + abs(ref))
    assert math.isclose(q, ref, rel_tol=1e-9, abs_tol=1e-10)


@given(st.integers(3, 10), st.integers(0, 2**31))
def test_rotation_equivariance(J, seed):
    rng = np.random.default_rng(seed)
    Q = Rotation.random(random_state=rng).as_matrix()
    x = random_curve(rng, J, 3)
    y = x.with_values(rng.normal(size=(J, 3)))
    Qx = x.with_values(x.values @ Q.T)
    Qy = y.with_values(y.values @ Q.T)
    R = sp.kron(sp.identity(J), Q)
    B = assembly.cd_implicit_coupling(x, y)
    BQ = assembly.cd_implicit_coupling(Qx, Qy)
    expected = (R @ B @ R.T).toarray()
    np.testing.assert_allclose(BQ.toarray(), expected, atol=1e-12 * np.abs(expected).max())
    np.testing.assert_allclose(assembly.f3_load(Qx, Qy, 0.4), assembly.f3_load(x, y, 0.4) @ Q.T,
                               atol=1e-12 * (1 + np.abs(assembly.f3_load(x, y, 0.4)).max()))
    np.testing.assert_allclose(assembly.weighted_mass(Qx).toarray(),
                               assembly.weighted_mass(x).toarray(), rtol=1e-12, atol=1e-12)
