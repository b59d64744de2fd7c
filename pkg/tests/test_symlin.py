import math

import numpy as np
import pytest

from specbundle.symlin import (
    ConditioningError,
    EmptyBasisError,
    mat_dim,
    orthonormalize,
    small_eigh,
    solve_spd,
    svec,
    svec_dim,
    svec_inv,
    svec_identity,
    symm_kron,
    u_matrix,
)

SQRT2 = math.sqrt(2.0)


def random_sym(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


class TestSvec:
    def test_ordering(self):
        a = np.array([[1.0, 2.0], [2.0, 3.0]])
        np.testing.assert_allclose(svec(a), [1.0, 2.0 * SQRT2, 3.0])

    def test_identity(self):
        np.testing.assert_array_equal(svec(np.eye(2)), [1.0, 0.0, 1.0])

    def test_inner_product_example(self):
        b = np.array([[1.0, 2.0], [2.0, 3.0]])
        assert svec(np.eye(2)) @ svec(b) == pytest.approx(4.0)

    def test_isometry_random(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(1, 9))
            a, b = random_sym(rng, n), random_sym(rng, n)
            ip = np.trace(a @ b)
            scale = np.linalg.norm(a) * np.linalg.norm(b)
            assert abs(svec(a) @ svec(b) - ip) <= 1e-12 * max(scale, 1.0)

    def test_round_trip_exact(self):
        # one ulp is the attainable limit: the off-diagonal scaling is
        # irrational, so divide-then-multiply can flip the last bit
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(1, 10))
            v = rng.standard_normal(svec_dim(n))
            np.testing.assert_allclose(svec(svec_inv(v)), v, rtol=4e-16, atol=0.0)
            a = svec_inv(v)
            np.testing.assert_allclose(svec_inv(svec(a)), a, rtol=4e-16, atol=0.0)

    def test_inv_zero(self):
        np.testing.assert_array_equal(svec_inv(np.zeros(6)), np.zeros((3, 3)))

    def test_inv_rejects_non_triangular_length(self):
        with pytest.raises(ValueError):
            svec_inv(np.zeros(5))
        assert mat_dim(6) == 3


class TestUMatrix:
    def test_printed_2x2(self):
        expected = np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1 / SQRT2, 1 / SQRT2, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
        np.testing.assert_allclose(u_matrix(2), expected)

    def test_vec_recovery(self):
        rng = np.random.default_rng(2)
        for n in (1, 2, 3, 5):
            a = random_sym(rng, n)
            u = u_matrix(n)
            np.testing.assert_allclose(u.T @ svec(a), a.flatten(order="F"), atol=1e-14)

    def test_orthonormal_rows(self):
        u = u_matrix(4)
        np.testing.assert_allclose(u @ u.T, np.eye(svec_dim(4)), atol=1e-14)


class TestSymmKron:
    def test_identity_action(self):
        rng = np.random.default_rng(3)
        a = random_sym(rng, 3)
        op = symm_kron(np.eye(3), np.eye(3))
        np.testing.assert_allclose(op @ svec(a), svec(a), atol=1e-13)

    def test_action_matches_direct(self):
        rng = np.random.default_rng(4)
        k = 4
        g = rng.standard_normal((k, k))
        h = rng.standard_normal((k, k))
        a = random_sym(rng, k)
        lhs = symm_kron(g, h) @ svec(a)
        rhs = 0.5 * svec(h @ a @ g.T + g @ a @ h.T)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_same_argument_symmetric(self):
        # symmetric operands, as in the Newton systems this feeds
        rng = np.random.default_rng(5)
        g = random_sym(rng, 3)
        op = symm_kron(g, g)
        np.testing.assert_allclose(op, op.T, atol=1e-14)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            symm_kron(np.eye(2), np.eye(3))


class TestOrthonormalize:
    def test_already_orthonormal(self):
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        q = orthonormalize([e1, e2])
        assert q.shape == (3, 2)
        np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-14)

    def test_duplicate_dropped(self):
        v = np.array([1.0, 1.0]) / SQRT2
        q = orthonormalize([v, v])
        assert q.shape == (2, 1)

    def test_random_block(self):
        rng = np.random.default_rng(6)
        q = orthonormalize(rng.standard_normal((100, 8)))
        assert np.abs(q.T @ q - np.eye(8)).max() <= 1e-12

    def test_all_zero_raises(self):
        with pytest.raises(EmptyBasisError):
            orthonormalize(np.zeros((4, 2)))

    def test_span_preserved(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((20, 3))
        cols = np.column_stack([a[:, 0], a[:, 1], a[:, 0] + a[:, 1], a[:, 2]])
        q = orthonormalize(cols)
        assert q.shape[1] == 3
        # every input column reproduces from the basis
        np.testing.assert_allclose(q @ (q.T @ cols), cols, atol=1e-10)


class TestSmallEigh:
    def test_diag(self):
        vals, vecs = small_eigh(np.diag([3.0, 1.0]))
        np.testing.assert_allclose(vals, [3.0, 1.0])
        np.testing.assert_allclose(np.abs(vecs), np.eye(2), atol=1e-14)

    def test_zero(self):
        vals, vecs = small_eigh(np.zeros((2, 2)))
        np.testing.assert_array_equal(vals, np.zeros(2))
        np.testing.assert_allclose(vecs @ vecs.T, np.eye(2), atol=1e-14)

    def test_reconstruction(self):
        rng = np.random.default_rng(8)
        s = random_sym(rng, 10)
        vals, vecs = small_eigh(s)
        recon = (vecs * vals[None, :]) @ vecs.T
        assert np.linalg.norm(recon - s) <= 1e-12 * np.linalg.norm(s)
        assert np.all(np.diff(vals) <= 0)

    def test_2x2_analytic(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a, b, c = rng.standard_normal(3)
            m = np.array([[a, b], [b, c]])
            disc = math.sqrt((a - c) ** 2 + 4 * b * b)
            expected = np.array([(a + c + disc) / 2, (a + c - disc) / 2])
            vals, _ = small_eigh(m)
            np.testing.assert_allclose(vals, expected, atol=1e-14)


class TestSolveSpd:
    def test_identity(self):
        b = np.arange(4.0)
        np.testing.assert_allclose(solve_spd(np.eye(4), b), b)

    def test_scaled_identity(self):
        b = np.arange(4.0) + 1
        np.testing.assert_allclose(solve_spd(2 * np.eye(4), b), b / 2)

    def test_random_spd_residual(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((50, 50))
        m = a @ a.T + 50 * np.eye(50)
        rhs = rng.standard_normal(50)
        x = solve_spd(m, rhs)
        bound = 1e-10 * (np.linalg.norm(m) * np.linalg.norm(x) + np.linalg.norm(rhs))
        assert np.linalg.norm(m @ x - rhs) <= bound

    def test_indefinite_raises(self):
        with pytest.raises(ConditioningError):
            solve_spd(np.diag([1.0, -1.0]), np.ones(2))


def test_svec_identity_cached_matches():
    np.testing.assert_array_equal(svec_identity(4), svec(np.eye(4)))
