import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsebss import linalg
from sparsebss.errors import SingularMatrixError


def random_hermitian(rng, m):
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return 0.5 * (g + g.conj().T)


def random_psd(rng, m, ridge=0.0):
    g = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return g @ g.conj().T + ridge * np.eye(m)


class TestTraceProd:
    def test_identity(self):
        assert linalg.trace_prod(np.eye(2), np.eye(2)) == pytest.approx(2.0)

    def test_diagonal(self):
        assert linalg.trace_prod(np.diag([1.0, 3.0]), np.diag([2.0, 4.0])) == pytest.approx(14.0)

    def test_matches_elementwise_sum(self):
        # oracle: Tr(ab) = sum_ij a_ij * b_ji written out explicitly
        rng = np.random.default_rng(7)
        for m in (2, 3, 4):
            a = random_hermitian(rng, m)
            b = random_hermitian(rng, m)
            expected = sum(
                (a[i, j] * b[j, i]).real for i in range(m) for j in range(m)
            )
            assert linalg.trace_prod(a, b) == pytest.approx(expected, abs=1e-12)

    def test_imaginary_residual_small_for_hermitian_pair(self):
        rng = np.random.default_rng(8)
        a = random_hermitian(rng, 3)
        b = random_hermitian(rng, 3)
        tr = np.einsum("ij,ji->", a, b)
        assert abs(tr.imag) < 1e-8 * max(abs(tr.real), 1e-30)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linalg.trace_prod(np.eye(2), np.eye(3))

    def test_batched(self):
        rng = np.random.default_rng(9)
        a = np.stack([random_hermitian(rng, 2) for _ in range(5)])
        b = np.stack([random_hermitian(rng, 2) for _ in range(5)])
        out = linalg.trace_prod(a, b)
        assert out.shape == (5,)
        for i in range(5):
            assert out[i] == pytest.approx(linalg.trace_prod(a[i], b[i]))


class TestInvPsd:
    def test_identity(self):
        np.testing.assert_allclose(linalg.inv_psd(np.eye(2)), np.eye(2), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(
            linalg.inv_psd(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), atol=1e-14
        )

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_residual(self, m):
        rng = np.random.default_rng(m)
        for _ in range(50):
            a = random_psd(rng, m)
            r = linalg.inv_psd(a)
            residual = np.linalg.norm(a @ r - np.eye(m))
            assert residual < 1e-8 * np.linalg.norm(a)

    def test_double_inverse_recovers(self):
        rng = np.random.default_rng(11)
        for m in (2, 3, 4):
            a = random_psd(rng, m)
            back = linalg.inv_psd(linalg.inv_psd(a))
            assert np.linalg.norm(back - a) < 1e-7 * np.linalg.norm(a)

    def test_non_hermitian_rejected(self):
        a = np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError):
            linalg.inv_psd(a)

    def test_zero_matrix_rejected(self):
        with pytest.raises(SingularMatrixError):
            linalg.inv_psd(np.zeros((2, 2)))

    def test_near_singular_gets_loaded(self):
        # rank-1 PSD matrix: inversion must still return finite values
        v = np.array([1.0, 2.0 + 1.0j])
        a = np.outer(v, v.conj())
        r = linalg.inv_psd(a)
        assert np.all(np.isfinite(r))

    def test_hermitian_closure(self):
        rng = np.random.default_rng(12)
        a = random_psd(rng, 4)
        r = linalg.inv_psd(a)
        assert linalg.is_hermitian(r, tol=1e-12)


class TestLogdetPsd:
    def test_identity(self):
        assert linalg.logdet_psd(np.eye(3)) == pytest.approx(0.0, abs=1e-12)

    def test_diagonal(self):
        a = np.diag([np.e, np.e**2])
        assert linalg.logdet_psd(a) == pytest.approx(3.0, rel=1e-12)

    def test_matches_cofactor_formula_2x2(self):
        # oracle: det of [[a, b], [conj(b), d]] = a d - |b|^2
        rng = np.random.default_rng(13)
        for _ in range(50):
            a = random_psd(rng, 2)
            det = a[0, 0].real * a[1, 1].real - abs(a[0, 1]) ** 2
            assert linalg.logdet_psd(a) == pytest.approx(np.log(det), abs=1e-10)

    def test_indefinite_rejected(self):
        with pytest.raises(ValueError):
            linalg.logdet_psd(np.diag([1.0, -1.0]))


class TestSqrtPsd:
    def test_identity(self):
        np.testing.assert_allclose(linalg.sqrt_psd(np.eye(2)), np.eye(2), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(
            linalg.sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12
        )

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_square_residual(self, m):
        rng = np.random.default_rng(20 + m)
        for _ in range(50):
            a = random_psd(rng, m)
            s = linalg.sqrt_psd(a)
            assert np.linalg.norm(s @ s - a) < 1e-8 * np.linalg.norm(a)
            lmin = np.linalg.eigvalsh(s)[0]
            assert lmin >= -1e-10 * max(np.linalg.eigvalsh(s)[-1], 0.0)

    def test_zero_matrix(self):
        np.testing.assert_allclose(linalg.sqrt_psd(np.zeros((2, 2))), np.zeros((2, 2)))


class TestRiccatiSolve:
    def test_identity_fixed_point(self):
        np.testing.assert_allclose(
            linalg.riccati_solve(np.eye(2), np.eye(2)), np.eye(2), atol=1e-12
        )

    def test_reduces_to_sqrt_for_identity_a(self):
        np.testing.assert_allclose(
            linalg.riccati_solve(np.eye(2), np.diag([4.0, 9.0])),
            np.diag([2.0, 3.0]),
            atol=1e-10,
        )

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_residual(self, m):
        rng = np.random.default_rng(30 + m)
        for _ in range(100):
            a = random_psd(rng, m, ridge=0.1)
            b = random_psd(rng, m)
            r = linalg.riccati_solve(a, b)
            assert np.linalg.norm(r @ a @ r - b) < 1e-8 * np.linalg.norm(b)
            assert linalg.is_hermitian(r, tol=1e-12)

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(35)
        a = np.stack([random_psd(rng, 2, ridge=0.1) for _ in range(4)])
        b = np.stack([random_psd(rng, 2) for _ in range(4)])
        out = linalg.riccati_solve(a, b)
        for i in range(4):
            np.testing.assert_allclose(out[i], linalg.riccati_solve(a[i], b[i]), atol=1e-10)

    def test_non_psd_rejected(self):
        with pytest.raises(ValueError):
            linalg.riccati_solve(np.diag([1.0, -1.0]), np.eye(2))


class TestCubicPositiveRoot:
    def test_pure_cube(self):
        assert linalg.cubic_positive_root(2.0, 0.0, -16.0) == pytest.approx(2.0, abs=1e-12)

    def test_zero_constant(self):
        assert linalg.cubic_positive_root(1.0, 1.0, 0.0) == 0.0

    def test_substitution_residual(self):
        w = linalg.cubic_positive_root(2.0, 3.0, -5.0)
        assert abs(2.0 * w**3 + 3.0 * w**2 - 5.0) < 1e-9 * 5.0
        assert w > 0.0

    def test_invalid_leading_coefficient(self):
        with pytest.raises(ValueError):
            linalg.cubic_positive_root(-1.0, 0.0, -1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        c3=st.floats(min_value=1e-6, max_value=1e6),
        c2=st.floats(min_value=0.0, max_value=1e6),
        c0=st.floats(min_value=-1e9, max_value=-1e-9),
    )
    def test_residual_property(self, c3, c2, c0):
        w = linalg.cubic_positive_root(c3, c2, c0)
        assert w >= 0.0
        assert abs(c3 * w**3 + c2 * w**2 + c0) < 1e-9 * max(abs(c0), c3)

    def test_monotone_in_constant_term(self):
        # larger |c0| pushes the root strictly up
        roots = [
            linalg.cubic_positive_root(2.0, 3.0, -c0) for c0 in np.linspace(0.5, 50.0, 25)
        ]
        assert all(b > a for a, b in zip(roots, roots[1:]))

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(40)
        c2 = rng.uniform(0.0, 10.0, size=200)
        c0 = -rng.uniform(1e-6, 100.0, size=200)
        roots = linalg.cubic_positive_roots(2.0, c2, c0)
        for i in np.random.default_rng(41).integers(0, 200, size=20):
            assert roots[i] == pytest.approx(
                linalg.cubic_positive_root(2.0, c2[i], c0[i]), rel=1e-9, abs=1e-12
            )
