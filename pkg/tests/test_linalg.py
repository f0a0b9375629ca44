import numpy as np
import pytest

from bellstab.linalg import (EigDecomp, NonHermitianError,
                             NotPositiveSemidefiniteError, commutator, dagger,
                             herm_eig, kron, psd_sqrt)
from bellstab.model import bell, pauli

from conftest import random_hermitian


class TestKron:
    def test_sigma_z_squared_parity(self):
        sz = pauli("z")
        assert np.array_equal(kron(sz, sz), np.diag([1, -1, -1, 1]).astype(complex))

    def test_identity(self):
        eye2 = np.eye(2)
        assert np.array_equal(kron(eye2, eye2), np.eye(4, dtype=complex))

    def test_sigma_x_squared_antidiagonal(self):
        sx = pauli("x")
        assert np.array_equal(kron(sx, sx), np.fliplr(np.eye(4)).astype(complex))

    def test_index_convention(self, rng):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        k = kron(a, b)
        for i in range(2):
            for j in range(2):
                for l in range(2):  # noqa: E741
                    for m in range(2):
                        assert abs(k[2 * i + l, 2 * j + m] - a[i, j] * b[l, m]) <= 1e-15

    def test_bilinearity(self, rng):
        for _ in range(50):
            a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
                       for _ in range(3))
            lhs = kron(a + b, c)
            rhs = kron(a, c) + kron(b, c)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12


class TestCommutator:
    def test_identity_commutes(self, rng):
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert np.max(np.abs(commutator(np.eye(4), b))) == 0.0

    def test_antisymmetry(self):
        lz = kron(pauli("z"), pauli("z"))
        lx = kron(pauli("x"), pauli("x"))
        assert np.array_equal(commutator(lz, lx), -commutator(lx, lz))

    def test_disjoint_factors_commute(self):
        a = kron(pauli("z"), np.eye(2))
        b = kron(np.eye(2), pauli("z"))
        assert np.max(np.abs(commutator(a, b))) == 0.0

    def test_trace_cyclicity(self, rng):
        for _ in range(50):
            a, b, c = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
                       for _ in range(3))
            t1 = np.trace(a @ b @ c)
            t2 = np.trace(b @ c @ a)
            assert abs(t1 - t2) <= 1e-10 * max(1.0, abs(t1))


class TestHermEig:
    def test_diagonal(self):
        dec = herm_eig(np.diag([0.2, 0.3, 0.1, 0.4]).astype(complex))
        assert np.allclose(dec.values, [0.1, 0.2, 0.3, 0.4], atol=1e-14)

    def test_parity_operator(self):
        lz = kron(pauli("z"), pauli("z"))
        dec = herm_eig(lz)
        assert np.allclose(dec.values, [-1, -1, 1, 1], atol=1e-14)

    def test_rank_one_projector(self):
        proj = bell("psi_plus").projector
        dec = herm_eig(proj)
        assert np.allclose(dec.values, [0, 0, 0, 1], atol=1e-14)

    def test_returns_namedtuple(self):
        assert isinstance(herm_eig(np.eye(4, dtype=complex)), EigDecomp)

    def test_reconstruction_and_orthonormality(self, rng):
        for _ in range(200):
            a = random_hermitian(rng, scale=rng.uniform(0.1, 10.0))
            w, v = herm_eig(a)
            scale = 1.0 + np.max(np.abs(a))
            assert np.max(np.abs(a - (v * w) @ v.conj().T)) <= 1e-10 * scale
            assert np.max(np.abs(v.conj().T @ v - np.eye(4))) <= 1e-10
            assert np.all(np.diff(w) >= 0)

    def test_matches_lapack(self, rng):
        for _ in range(200):
            a = random_hermitian(rng)
            w, _ = herm_eig(a)
            ref = np.linalg.eigvalsh(a)
            assert np.max(np.abs(w - ref)) <= 1e-11 * (1.0 + np.max(np.abs(ref)))

    def test_degenerate_spectrum(self, rng):
        # repeated eigenvalues under a random unitary conjugation
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, _ = np.linalg.qr(g)
        a = (q * np.array([2.0, 2.0, 2.0, -1.0])) @ q.conj().T
        w, v = herm_eig(a)
        assert np.allclose(sorted(w), [-1, 2, 2, 2], atol=1e-12)
        assert np.max(np.abs(a - (v * w) @ v.conj().T)) <= 1e-11

    def test_rejects_non_hermitian(self):
        a = np.eye(4, dtype=complex)
        a[0, 1] = 1e-6
        with pytest.raises(NonHermitianError):
            herm_eig(a)

    def test_eigenvector_residual(self, rng):
        a = random_hermitian(rng)
        w, v = herm_eig(a)
        norm = np.linalg.norm(a)
        for i in range(4):
            assert np.linalg.norm(a @ v[:, i] - w[i] * v[:, i]) <= 1e-10 * max(1.0, norm)


class TestPsdSqrt:
    def test_identity(self):
        assert np.allclose(psd_sqrt(np.eye(4, dtype=complex)), np.eye(4), atol=1e-14)

    def test_diagonal(self):
        root = psd_sqrt(np.diag([4.0, 1.0, 0.0, 9.0]).astype(complex))
        assert np.allclose(root, np.diag([2.0, 1.0, 0.0, 3.0]), atol=1e-12)

    def test_projector_is_own_root(self):
        proj = bell("psi_plus").projector
        assert np.allclose(psd_sqrt(proj), proj, atol=1e-12)

    def test_square_recovers_input(self, rng):
        for _ in range(100):
            g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            a = g @ g.conj().T
            root = psd_sqrt(a)
            assert np.max(np.abs(root - dagger(root))) <= 1e-10 * np.max(np.abs(root))
            assert np.max(np.abs(root @ root - a)) <= 1e-9 * max(1.0, np.max(np.abs(a)))

    def test_clips_tiny_negatives(self):
        a = np.diag([1.0, 0.5, -5e-11, 0.0]).astype(complex)
        root = psd_sqrt(a)
        assert np.allclose(root @ root, np.diag([1.0, 0.5, 0.0, 0.0]), atol=1e-9)

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(NotPositiveSemidefiniteError):
            psd_sqrt(np.diag([1.0, 1.0, -1e-6, 0.5]).astype(complex))
