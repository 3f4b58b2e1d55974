import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stylqr.qr import Geometry, QrSpec, build_code_target, render
from stylqr.sampler import make_kernel, ss_backward, ss_forward


def formula_kernel(a, sigma):
    """Direct per-cell evaluation of the 2-D Gaussian density, renormalized."""
    w = [[0.0] * a for _ in range(a)]
    for r in range(a):
        for c in range(a):
            i = r - (a - 1) / 2
            j = c - (a - 1) / 2
            w[r][c] = math.exp(-(i * i + j * j) / (2 * sigma * sigma)) / (2 * math.pi * sigma * sigma)
    s = sum(map(sum, w))
    return np.array([[v / s for v in row] for row in w])


def brute_force_pool(img, weights, m, a):
    out = np.zeros((m, m))
    for bi in range(m):
        for bj in range(m):
            acc = 0.0
            for p in range(a):
                for q in range(a):
                    acc += weights[p, q] * img[bi * a + p, bj * a + q]
            out[bi, bj] = acc
    return out


def test_kernel_single_cell():
    k = make_kernel(1, 0.7)
    assert k.weights.shape == (1, 1) and k.weights[0, 0] == 1.0


@pytest.mark.parametrize("sigma", [0.3, 1.0, 5.0])
def test_kernel_three(sigma):
    w = make_kernel(3, sigma).weights
    assert abs(w.sum() - 1) < 1e-12
    assert w[1, 1] > w[0, 1] and w[1, 1] > w[1, 0] and w[0, 1] > w[0, 0]


def test_kernel_a16_matches_formula():
    k = make_kernel(16)
    assert k.sigma == pytest.approx(16 / 6)
    assert np.max(np.abs(k.weights - formula_kernel(16, 16 / 6))) < 1e-12


@pytest.mark.parametrize("a", [4, 5, 8, 16])
def test_kernel_symmetries(a):
    w = make_kernel(a).weights
    assert np.allclose(w, w[::-1, :], atol=0, rtol=0)
    assert np.allclose(w, w[:, ::-1], atol=0, rtol=0)
    assert np.allclose(w, w.T, atol=0, rtol=0)
    peak = np.argwhere(w == w.max())
    c = (a - 1) / 2
    assert all(abs(r - c) <= 0.5 and abs(q - c) <= 0.5 for r, q in peak)
    assert len(peak) == (1 if a % 2 else 4)


def test_kernel_rejects_bad_sigma():
    with pytest.raises(ValueError):
        make_kernel(4, 0.0)
    with pytest.raises(ValueError):
        make_kernel(4, -1.0)


def test_constant_image():
    g = Geometry(5, 6)
    k = make_kernel(6)
    F = ss_forward(np.full((30, 30), 0.37), k, g)
    assert np.allclose(F, 0.37, atol=1e-15)


def test_ideal_render_samples_to_bits():
    spec = QrSpec(2, "M", 3, 8)
    grid = build_code_target("pool", spec)
    F = ss_forward(render(grid, spec), make_kernel(8), spec)
    assert np.max(np.abs(F - grid.bits)) < 1e-12


def test_random_image_matches_brute_force():
    rng = np.random.default_rng(0)
    g = Geometry(6, 5)
    k = make_kernel(5, 1.1)
    img = rng.random((30, 30))
    assert np.max(np.abs(ss_forward(img, k, g) - brute_force_pool(img, k.weights, 6, 5))) < 1e-12


def test_backward_examples():
    g = Geometry(4, 5)
    k = make_kernel(5)
    assert np.all(ss_backward(np.zeros((4, 4)), k, g) == 0)
    unit = np.zeros((4, 4))
    unit[2, 1] = 1
    grad = ss_backward(unit, k, g)[0]
    assert np.array_equal(grad[10:15, 5:10], k.weights)
    grad[10:15, 5:10] = 0
    assert np.all(grad == 0)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    g = Geometry(3, 4)
    k = make_kernel(4, 0.9)
    img = rng.random((12, 12))
    gout = rng.standard_normal((3, 3))
    analytic = ss_backward(gout, k, g)[0]
    h = 1e-6
    for r in range(12):
        for c in range(12):
            up, dn = img.copy(), img.copy()
            up[r, c] += h
            dn[r, c] -= h
            fd = np.sum(gout * (ss_forward(up, k, g) - ss_forward(dn, k, g))) / (2 * h)
            assert abs(fd - analytic[r, c]) <= 1e-6 * max(1.0, abs(analytic[r, c]))


def test_adjoint_identity():
    rng = np.random.default_rng(2)
    g = Geometry(21, 8)
    k = make_kernel(8)
    for _ in range(10):
        x = rng.random((168, 168))
        gout = rng.standard_normal((21, 21))
        lhs = np.sum(ss_forward(x, k, g) * gout)
        rhs = np.sum(x * ss_backward(gout, k, g)[0])
        assert abs(lhs - rhs) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    g = Geometry(4, 4)
    k = make_kernel(4)
    x, y = rng.random((16, 16)), rng.random((16, 16))
    lhs = ss_forward(alpha * x + beta * y, k, g)
    rhs = alpha * ss_forward(x, k, g) + beta * ss_forward(y, k, g)
    assert np.allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_convexity_bound(seed):
    rng = np.random.default_rng(seed)
    g = Geometry(5, 6)
    x = rng.random((30, 30))
    F = ss_forward(x, make_kernel(6, rng.uniform(0.5, 4)), g)
    blocks = x.reshape(5, 6, 5, 6)
    assert np.all(F >= blocks.min(axis=(1, 3)) - 1e-12)
    assert np.all(F <= blocks.max(axis=(1, 3)) + 1e-12)


@pytest.mark.parametrize("a", [5, 8, 16])
def test_center_pixel_dominates_corner(a):
    g = Geometry(2, a)
    k = make_kernel(a)
    base = np.full((2 * a, 2 * a), 0.5)
    c = a // 2
    center, corner = base.copy(), base.copy()
    center[c, c] += 0.1
    corner[0, 0] += 0.1
    f0 = ss_forward(base, k, g)[0, 0]
    assert ss_forward(center, k, g)[0, 0] - f0 > ss_forward(corner, k, g)[0, 0] - f0


def test_shape_errors():
    g = Geometry(3, 4)
    k = make_kernel(4)
    with pytest.raises(ValueError):
        ss_forward(np.zeros((13, 12)), k, g)
    with pytest.raises(ValueError):
        ss_forward(np.zeros((12, 12)), make_kernel(5), g)
    with pytest.raises(ValueError):
        ss_backward(np.zeros((4, 3)), k, g)
    with pytest.raises(ValueError):
        ss_forward(np.zeros((3, 12, 12)), k, g)
