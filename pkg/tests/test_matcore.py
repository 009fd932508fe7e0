import numpy as np
import pytest

from spop import matcore
from spop.matcore import (
    ConvergenceError,
    eig_sym,
    load_matrix,
    save_matrix,
    schatten_norm,
    singular_values,
    svd,
)


def assert_orthonormal(cols, tol=1e-8):
    gram = cols.T @ cols
    assert np.max(np.abs(gram - np.eye(cols.shape[1]))) < tol


class TestSvd:
    def test_identity(self):
        r = svd(np.eye(3))
        np.testing.assert_allclose(r.sigma, [1.0, 1.0, 1.0], atol=1e-14)

    def test_diagonal_rank_deficient(self):
        r = svd(np.diag([3.0, 0.0]))
        np.testing.assert_array_equal(r.sigma, [3.0, 0.0])
        np.testing.assert_allclose(r.u, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(r.v, np.eye(2), atol=1e-14)

    def test_reconstruction_random(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((5, 3))
        r = svd(m)
        err = np.linalg.norm(r.reconstruct() - m) / np.linalg.norm(m)
        assert err < 1e-10

    @pytest.mark.parametrize("shape", [(5, 3), (3, 5), (8, 8), (1, 6), (6, 1), (40, 17)])
    def test_contracts_many_shapes(self, shape):
        rng = np.random.default_rng(hash(shape) % (2**32))
        m = rng.standard_normal(shape)
        r = svd(m)
        rr = min(shape)
        assert r.u.shape == (shape[0], rr)
        assert r.v.shape == (shape[1], rr)
        assert np.all(np.diff(r.sigma) <= 0)
        assert np.all(r.sigma >= 0)
        assert_orthonormal(r.u)
        assert_orthonormal(r.v)
        err = np.linalg.norm(r.reconstruct() - m) / np.linalg.norm(m)
        assert err < 1e-10

    def test_against_lapack(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = rng.standard_normal((12, 9))
            ref = np.linalg.svd(m, compute_uv=False)
            got = svd(m).sigma
            np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12 * ref[0])

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((20, 14))
        r1 = svd(m)
        r2 = svd(m)
        assert (r1.u == r2.u).all()
        assert (r1.sigma == r2.sigma).all()
        assert (r1.v == r2.v).all()

    def test_sign_convention(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((9, 6))
        r = svd(m)
        for k in range(r.u.shape[1]):
            col = r.u[:, k]
            nz = np.nonzero(col)[0]
            assert col[nz[0]] >= 0.0

    def test_rank_deficient_random(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((8, 3)) @ rng.standard_normal((3, 6))
        r = svd(a)
        assert np.sum(r.sigma == 0.0) == 3  # exact zeros after clamping
        assert_orthonormal(r.u)
        assert_orthonormal(r.v)
        err = np.linalg.norm(r.reconstruct() - a) / np.linalg.norm(a)
        assert err < 1e-10

    def test_zero_matrix(self):
        r = svd(np.zeros((4, 3)))
        np.testing.assert_array_equal(r.sigma, np.zeros(3))
        assert_orthonormal(r.u)
        assert_orthonormal(r.v)

    def test_rejects_nonfinite(self):
        bad = np.full((2, 2), np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            svd(bad)

    def test_convergence_cap_error(self, monkeypatch):
        monkeypatch.setattr(matcore, "MAX_SWEEPS", 0)
        rng = np.random.default_rng(2)
        with pytest.raises(ConvergenceError, match="did not converge"):
            svd(rng.standard_normal((6, 6)))


class TestEigSym:
    def test_identity(self):
        np.testing.assert_allclose(eig_sym(np.eye(4)), np.ones(4), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(eig_sym(np.diag([9.0, 4.0, 1.0])), [9.0, 4.0, 1.0])

    def test_gram_equals_squared_singular_values(self):
        rng = np.random.default_rng(13)
        w = rng.standard_normal((6, 4))
        eigs = eig_sym(w.T @ w)
        sig = svd(w).sigma
        np.testing.assert_allclose(eigs, sig**2, rtol=1e-9)

    def test_indefinite_against_lapack(self):
        rng = np.random.default_rng(17)
        x = rng.standard_normal((12, 12))
        x = (x + x.T) / 2
        got = eig_sym(x)
        ref = np.sort(np.linalg.eigvalsh(x))[::-1]
        np.testing.assert_allclose(got, ref, atol=1e-12 * np.abs(ref).max())

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_rectangular(self):
        with pytest.raises(ValueError, match="square"):
            eig_sym(np.ones((2, 3)))


class TestSchattenNorm:
    def test_frobenius(self):
        assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0, rel=1e-12)

    def test_spectral(self):
        assert schatten_norm(np.diag([3.0, 4.0]), np.inf) == pytest.approx(4.0)

    def test_nuclear(self):
        assert schatten_norm(np.diag([3.0, 4.0]), 1) == pytest.approx(7.0)

    def test_rejects_q_below_one(self):
        with pytest.raises(ValueError, match="q >= 1"):
            schatten_norm(np.eye(2), 0.5)

    def test_frobenius_matches_entrywise(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            m = rng.standard_normal((rng.integers(1, 12), rng.integers(1, 12)))
            direct = float(np.sqrt(np.sum(m * m)))
            assert schatten_norm(m, 2) == pytest.approx(direct, rel=1e-12)

    def test_norm_ordering(self):
        rng = np.random.default_rng(29)
        m = rng.standard_normal((7, 5))
        sp = schatten_norm(m, np.inf)
        fr = schatten_norm(m, 2)
        nuc = schatten_norm(m, 1)
        assert sp <= fr <= nuc

    def test_large_q_no_overflow(self):
        m = np.diag([1e200, 1e190])
        assert schatten_norm(m, 50) == pytest.approx(1e200, rel=1e-6)


class TestTraceInequalities:
    def test_von_neumann_thousand_pairs(self):
        # trace(A^T B) <= sum_i sigma_i(A) sigma_i(B), checked en masse
        rng = np.random.default_rng(31)
        for _ in range(1000):
            a = rng.standard_normal((6, 4))
            b = rng.standard_normal((6, 4))
            lhs = float(np.trace(a.T @ b))
            rhs = float(np.sum(singular_values(a) * singular_values(b)))
            assert lhs <= rhs + 1e-9

    @pytest.mark.parametrize("p,q", [(2.0, 2.0), (1.5, 3.0), (4.0, 4.0 / 3.0), (1.0, np.inf)])
    def test_hoelder_on_singular_values(self, p, q):
        rng = np.random.default_rng(37)
        for _ in range(100):
            a = rng.standard_normal((5, 5))
            b = rng.standard_normal((5, 5))
            lhs = float(np.sum(singular_values(a) * singular_values(b)))
            rhs = schatten_norm(a, p) * schatten_norm(b, q)
            assert lhs <= rhs * (1 + 1e-12) + 1e-12


class TestSingularValues:
    def test_matches_full_svd(self):
        rng = np.random.default_rng(41)
        m = rng.standard_normal((10, 6))
        np.testing.assert_allclose(singular_values(m), svd(m).sigma, rtol=1e-12)


class TestMat1Format:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(43)
        m = rng.standard_normal((5, 7))
        p = tmp_path / "w.mat"
        save_matrix(p, m)
        np.testing.assert_array_equal(load_matrix(p), m)

    def test_layout(self, tmp_path):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        p = tmp_path / "w.mat"
        save_matrix(p, m)
        blob = p.read_bytes()
        assert blob[:8] == b"SPOPMAT1"
        assert int.from_bytes(blob[8:16], "little") == 2
        assert int.from_bytes(blob[16:24], "little") == 2
        vals = np.frombuffer(blob, dtype="<f8", offset=24)
        np.testing.assert_array_equal(vals, [1.0, 2.0, 3.0, 4.0])

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "bad.mat"
        p.write_bytes(b"NOTMAT!!" + b"\0" * 32)
        with pytest.raises(ValueError, match="not a MAT1"):
            load_matrix(p)

    def test_rejects_truncated(self, tmp_path):
        m = np.ones((3, 3))
        p = tmp_path / "w.mat"
        save_matrix(p, m)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(ValueError, match="corrupt"):
            load_matrix(p)
