"""Backend parity and correctness of the hot kernels."""

import numpy as np
import pytest

from topolearn.kernels import _numpy

try:
    from topolearn.kernels import _numba

    BACKENDS = [("numpy", _numpy), ("numba", _numba)]
except ImportError:
    _numba = None
    BACKENDS = [("numpy", _numpy)]

GUARD = 1e-30


def random_csr(rng, n, density=0.2):
    dense = (rng.random((n, n)) < density) * rng.normal(size=(n, n))
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    cols, vals = [], []
    for i in range(n):
        idx = np.nonzero(dense[i])[0]
        cols.append(idx.astype(np.int64))
        vals.append(dense[i, idx])
        row_ptr[i + 1] = row_ptr[i] + idx.size
    return dense, row_ptr, np.concatenate(cols), np.concatenate(vals)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_csr_matmul_matches_dense(name, impl):
    rng = np.random.default_rng(0)
    for trial in range(5):
        n = rng.integers(2, 30)
        c = rng.integers(1, 7)
        dense, row_ptr, cols, vals = random_csr(rng, n)
        x = rng.normal(size=(n, c))
        out = impl.csr_dense_matmul(row_ptr, cols, vals, x)
        np.testing.assert_allclose(out, dense @ x, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_csr_matmul_empty_rows(name, impl):
    # rows 0 and 2 empty, including a trailing empty row
    row_ptr = np.array([0, 0, 2, 2], dtype=np.int64)
    cols = np.array([0, 2], dtype=np.int64)
    vals = np.array([2.0, -1.0])
    x = np.arange(6, dtype=np.float64).reshape(3, 2)
    out = impl.csr_dense_matmul(row_ptr, cols, vals, x)
    expected = np.array([[0.0, 0.0], [2 * 0 - 4, 2 * 1 - 5], [0.0, 0.0]])
    np.testing.assert_array_equal(out, expected)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_csr_matmul_all_empty(name, impl):
    row_ptr = np.zeros(4, dtype=np.int64)
    out = impl.csr_dense_matmul(
        row_ptr, np.empty(0, np.int64), np.empty(0), np.ones((3, 2))
    )
    np.testing.assert_array_equal(out, np.zeros((3, 2)))


def edge_repr_oracle(delta_h, ri, rj):
    d = delta_h[ri] - delta_h[rj]
    u = np.exp(-d * d)
    s = u.sum(axis=1)
    e = np.where(s[:, None] >= GUARD, u / s[:, None], 1.0 / delta_h.shape[1])
    return d, e, s


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_edge_repr_forward_matches_oracle(name, impl):
    rng = np.random.default_rng(1)
    delta_h = rng.normal(size=(12, 5))
    ri = rng.integers(0, 12, size=40).astype(np.int64)
    rj = (ri + 1 + rng.integers(0, 10, size=40)).astype(np.int64) % 12
    d, e, s = impl.edge_repr_forward(delta_h, ri, rj, GUARD)
    od, oe, os_ = edge_repr_oracle(delta_h, ri, rj)
    np.testing.assert_allclose(d, od, atol=1e-15)
    np.testing.assert_allclose(e, oe, atol=1e-12)
    np.testing.assert_allclose(s, os_, atol=1e-12)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_edge_repr_guard_emits_uniform(name, impl):
    delta_h = np.zeros((2, 4))
    delta_h[0] = 100.0  # d entries 100 -> exp(-1e4) underflows to 0
    d, e, s = impl.edge_repr_forward(
        delta_h, np.array([0], np.int64), np.array([1], np.int64), GUARD
    )
    assert s[0] < GUARD
    np.testing.assert_array_equal(e[0], np.full(4, 0.25))


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_edge_repr_backward_matches_finite_difference(name, impl):
    rng = np.random.default_rng(2)
    delta_h = rng.normal(size=(8, 4))
    ri = np.array([0, 2, 5], np.int64)
    rj = np.array([1, 3, 6], np.int64)
    d_e = rng.normal(size=(3, 4))
    d, e, s = impl.edge_repr_forward(delta_h, ri, rj, GUARD)
    grad = impl.edge_repr_backward(d, e, s, ri, rj, d_e, GUARD, 8)

    def objective(dh):
        _, e2, _ = edge_repr_oracle(dh, ri, rj)
        return float((d_e * e2).sum())

    h = 1e-6
    fd = np.zeros_like(delta_h)
    for i in range(8):
        for k in range(4):
            bump = np.zeros_like(delta_h)
            bump[i, k] = h
            fd[i, k] = (objective(delta_h + bump) - objective(delta_h - bump)) / (2 * h)
    np.testing.assert_allclose(grad, fd, atol=1e-7)


@pytest.mark.skipif(_numba is None, reason="numba not installed")
def test_backend_parity():
    rng = np.random.default_rng(3)
    dense, row_ptr, cols, vals = random_csr(rng, 25)
    x = rng.normal(size=(25, 8))
    np.testing.assert_allclose(
        _numba.csr_dense_matmul(row_ptr, cols, vals, x),
        _numpy.csr_dense_matmul(row_ptr, cols, vals, x),
        rtol=1e-12,
        atol=1e-12,
    )
    delta_h = rng.normal(size=(25, 8))
    ri = rng.integers(0, 25, size=60).astype(np.int64)
    rj = rng.integers(0, 25, size=60).astype(np.int64)
    for a, b in zip(
        _numba.edge_repr_forward(delta_h, ri, rj, GUARD),
        _numpy.edge_repr_forward(delta_h, ri, rj, GUARD),
    ):
        np.testing.assert_allclose(a, b, atol=1e-13)
    d, e, s = _numpy.edge_repr_forward(delta_h, ri, rj, GUARD)
    d_e = rng.normal(size=e.shape)
    np.testing.assert_allclose(
        _numba.edge_repr_backward(d, e, s, ri, rj, d_e, GUARD, 25),
        _numpy.edge_repr_backward(d, e, s, ri, rj, d_e, GUARD, 25),
        atol=1e-13,
    )


def test_backend_env_flag_reports():
    from topolearn import kernels

    assert kernels.active_backend() in ("numpy", "numba")
