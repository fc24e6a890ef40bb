import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiet import linalg
from wiet.errors import DegenerateParallel, DimensionMismatch, NonHermitianError


def rand_hermitian(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (G + G.conj().T)


def test_herm_eig_identity():
    w, U = linalg.herm_eig(np.eye(2))
    assert np.allclose(w, [1.0, 1.0])
    assert np.allclose(U @ U.conj().T, np.eye(2), atol=1e-12)


def test_herm_eig_diagonal():
    w, U = linalg.herm_eig(np.diag([2.0, 1.0]))
    assert np.allclose(w, [2.0, 1.0])
    assert abs(abs(U[0, 0]) - 1.0) < 1e-12
    assert abs(abs(U[1, 1]) - 1.0) < 1e-12


def test_herm_eig_rank_one():
    h = np.array([1.0, 1.0j]) / np.sqrt(2.0)
    w, U = linalg.herm_eig(np.outer(h, h.conj()))
    assert np.allclose(w, [1.0, 0.0], atol=1e-12)
    v = U[:, 0]
    # principal eigenvector proportional to h
    assert abs(abs(h.conj() @ v) - 1.0) < 1e-10


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        linalg.herm_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        linalg.herm_eig(np.zeros((2, 3)))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
def test_herm_eig_reconstruction(n, seed):
    rng = np.random.default_rng(seed)
    M = rand_hermitian(rng, n)
    w, U = linalg.herm_eig(M)
    R = (U * w) @ U.conj().T
    denom = max(np.linalg.norm(M), 1e-30)
    assert np.linalg.norm(R - M) / denom <= 1e-10
    assert np.linalg.norm(U.conj().T @ U - np.eye(n)) <= 1e-10
    assert np.all(np.diff(w) <= 1e-12)


def test_reconstruction_bulk():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        M = rand_hermitian(rng, n)
        w, U = linalg.herm_eig(M)
        worst = max(worst, np.linalg.norm((U * w) @ U.conj().T - M)
                    / max(np.linalg.norm(M), 1e-30))
    assert worst <= 1e-10


def test_proj_orth_unit_cases():
    u = linalg.proj_orth_unit(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert np.allclose(u, [1.0, 0.0], atol=1e-12)

    u = linalg.proj_orth_unit(np.array([1.0, 1.0]) / np.sqrt(2), np.array([1.0, 0.0]))
    assert np.allclose(u, [0.0, 1.0], atol=1e-12)

    with pytest.raises(DegenerateParallel):
        linalg.proj_orth_unit(np.array([2.0, 0.0]), np.array([1.0, 0.0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
def test_proj_orth_unit_properties(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u = linalg.proj_orth_unit(a, b)
    assert abs(np.linalg.norm(u) - 1.0) <= 1e-12
    assert abs(u.conj() @ b) <= 1e-10 * np.linalg.norm(b)
    # u must lie in span{a, b}
    basis = np.linalg.qr(np.column_stack([a, b]))[0]
    resid = u - basis @ (basis.conj().T @ u)
    assert np.linalg.norm(resid) <= 1e-10


def test_quad_form_cases():
    assert linalg.quad_form(np.diag([2.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(2.0)
    assert linalg.quad_form(np.eye(2), np.array([1.0, 1.0j])) == pytest.approx(2.0)
    v = np.array([1.0, 1.0j]) / np.sqrt(2)
    h = np.array([1.0j, 1.0]) / np.sqrt(2)  # orthogonal to v
    assert abs(v.conj() @ h) < 1e-15
    assert linalg.quad_form(np.outer(v, v.conj()), h) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionMismatch):
        linalg.quad_form(np.eye(3), np.array([1.0, 0.0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
def test_quad_form_equals_trace(n, seed):
    rng = np.random.default_rng(seed)
    S = rand_hermitian(rng, n)
    h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    q = linalg.quad_form(S, h)
    tr = np.trace(S @ np.outer(h, h.conj())).real
    assert q == pytest.approx(tr, rel=1e-12, abs=1e-12)


def test_quad_form_psd_nonnegative():
    rng = np.random.default_rng(3)
    for _ in range(50):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        S = A @ A.conj().T
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert linalg.quad_form(S, h) >= -1e-10


def test_fix_phase():
    v = np.array([0.0, -1.0 + 1.0j, 0.5])
    u = linalg.fix_phase(v)
    assert u[1].imag == pytest.approx(0.0, abs=1e-15)
    assert u[1].real > 0
    assert np.allclose(np.outer(v, v.conj()), np.outer(u, u.conj()))
