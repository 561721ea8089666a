import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh_tridiagonal

from revspec.tridiag import eigh_tridiag, eigvals_below, eigvals_index, inverse_iteration, sturm_count


def _random(n, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=n) * 3, rng.normal(size=n - 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 120), st.integers(0, 10_000))
def test_eigenvalues_match_lapack(n, seed):
    d, e = _random(n, seed)
    ref = eigh_tridiagonal(d, e, eigvals_only=True)
    got = eigvals_index(d, e, 0, n)
    assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 80), st.integers(0, 10_000), st.floats(-5, 5))
def test_sturm_count(n, seed, x):
    d, e = _random(n, seed)
    ref = eigh_tridiagonal(d, e, eigvals_only=True)
    if np.min(np.abs(ref - x)) < 1e-9:
        return
    assert sturm_count(d, e, x) == int(np.sum(ref < x))


def test_eigenvectors_match_lapack():
    d, e = _random(200, 7)
    w, V = eigh_tridiag(d, e, 0.0)
    wr, Vr = eigh_tridiagonal(d, e, select="v", select_range=(-np.inf, 0.0))
    assert np.max(np.abs(w - wr)) <= 1e-12
    # rows versus columns, up to sign
    for j in range(len(w)):
        assert min(np.max(np.abs(V[j] - Vr[:, j])), np.max(np.abs(V[j] + Vr[:, j]))) <= 1e-10


def test_laplacian_closed_form():
    # 1D Dirichlet Laplacian: eigenvalues 2 - 2 cos(j pi/(n+1))
    n = 500
    d = 2 * np.ones(n)
    e = -np.ones(n - 1)
    w = eigvals_below(d, e, 0.1)
    ref = 2 - 2 * np.cos(np.arange(1, w.size + 1) * np.pi / (n + 1))
    assert w.size == int(np.sum(2 - 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)) < 0.1))
    assert np.max(np.abs(w - ref)) <= 1e-14
    V = inverse_iteration(d, e, w[:3])
    x = np.arange(1, n + 1)
    for j in range(3):
        s = np.sin((j + 1) * np.pi * x / (n + 1))
        s /= np.linalg.norm(s)
        assert abs(abs(V[j] @ s) - 1) <= 1e-12


def test_deterministic():
    d, e = _random(300, 3)
    a = eigh_tridiag(d, e, 1.0)
    b = eigh_tridiag(d, e, 1.0)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_length_mismatch():
    with pytest.raises(ValueError):
        sturm_count(np.ones(3), np.ones(3), 0.0)
