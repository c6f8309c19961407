import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bellman_verify import (
    BellmanPoint,
    Direction,
    DomainError,
    DomainParams,
    MaxPoint,
    PreconditionError,
    Region,
    classify_region,
    directional_second_derivative,
    eval_B,
    eval_B_maximal,
    eval_b,
    eval_G,
    eval_U,
    fd_check,
)
from bellman_verify.core import (
    bellman_derivatives,
    bellman_value,
    block_derivatives,
    classify,
    fd_errors,
    maximal_z_derivative,
    piece_derivatives,
    piece_values,
)
from bellman_verify.grids import random_points

from conftest import mp_blocks, mp_piece, mp_region

P2 = DomainParams(2.0)


def pt(x, y, w=1.0, v=1.0):
    return BellmanPoint(x, y, w, v)


def test_region_examples():
    assert classify_region(pt(0, 1), P2) == Region.D1
    assert classify_region(pt(1, 1), P2) == Region.D3
    assert classify_region(pt(1, 10), P2) == Region.BOUNDARY23
    assert classify_region(pt(1, 40, 1, 2), P2) == Region.BOUNDARY12
    assert classify_region(pt(1, 20), P2) == Region.D2
    assert classify_region(pt(0, 0), P2) == Region.ORIGIN


def test_block_examples():
    assert eval_b(1, pt(1, 0), P2) == 0.0
    assert eval_b(6, pt(1, 0), P2) == pytest.approx(4.0, rel=1e-15)
    assert eval_b(4, pt(1, 1), P2) == pytest.approx(2**0.75, rel=1e-15)
    with pytest.raises(IndexError):
        eval_b(7, pt(1, 1), P2)
    with pytest.raises(IndexError):
        eval_b(0, pt(1, 1), P2)


def test_value_examples():
    assert eval_U(pt(0, 0, 1.3, 1.2), P2) == 0.0
    assert eval_U(pt(1, 0), P2) == pytest.approx(-2457600, rel=1e-15)
    assert eval_U(pt(0, 1), P2) == pytest.approx(0.5, rel=1e-15)
    ev = eval_B(pt(1, 0), P2)
    assert ev.value == pytest.approx(-2457600, rel=1e-15) and ev.region == Region.D3
    ev = eval_B(pt(0, 1), P2)
    assert ev.value == pytest.approx(0.5, rel=1e-15) and ev.region == Region.D1
    assert eval_G(pt(0, 1), P2) == 0.5
    assert eval_G(pt(1, 0), P2) == pytest.approx(-2457600, rel=1e-15)
    assert eval_G(pt(0, 0), P2) == 0.0


def test_origin_is_degenerate():
    ev = eval_B(pt(0, 0, 1.2, 1.1), P2)
    assert ev.value == 0.0 and ev.degenerate
    assert np.all(ev.gradient == 0)


def test_boundary_flags_and_pieces():
    ev = eval_B(pt(1, 10), P2)
    assert ev.on_boundary and ev.piece == 2
    ev = eval_B(pt(1, 40, 1, 2), P2)
    assert ev.on_boundary and ev.piece == 1


def test_domain_errors():
    for bad in [(1, 1, 3, 1), (1, 1, 0.5, 1), (1, 1, -1, -1), (1, 1, 0, 2), (math.nan, 1, 1, 1), (1, math.inf, 1, 1)]:
        with pytest.raises(DomainError):
            eval_B(BellmanPoint(*bad), P2)


@pytest.mark.parametrize("c", [1.5, 2.0, 10.0, 100.0])
def test_values_against_mpmath(c, rng):
    for region in ("D1", "D2", "D3"):
        x, y, w, v = random_points(region, 40, c, rng)
        k = {"D1": 1, "D2": 2, "D3": 3}[region]
        got = bellman_value(x, y, w, v, c)
        blocks = np.array([[float(b) for b in mp_blocks(*z, c)] for z in zip(x, y, w, v)])
        from bellman_verify.core import block_values

        assert np.allclose(block_values(x, y, w, v, c), blocks, rtol=1e-13, atol=0)
        for i in range(x.size):
            exact = mp_piece(k, x[i], y[i], w[i], v[i], c)
            mag = mp.fsum(abs(b) for b in mp_blocks(x[i], y[i], w[i], v[i], c)) * 6e5
            assert abs(got[i] - exact) <= 1e-15 * mag
            assert mp_region(x[i], y[i], w[i], v[i], c) == k


def test_classify_matches_oracle_on_boundaries():
    c = 2.0
    x = np.array([1.0, 1.0, 2.0, 0.5, 3.0])
    y = np.array([10.0, 9.999999, 20.0, 5.0000001, 30.0])
    w = np.ones(5)
    v = np.ones(5)
    got = classify(x, y, w, v, c)
    want = [mp_region(*z, c) for z in zip(x, y, w, v)]
    assert got.tolist() == want


def test_hessian_symmetric(rng):
    for c in (1.5, 4.0, 100.0):
        x, y, w, v = random_points("full", 500, c, rng)
        h = bellman_derivatives(x, y, w, v, c)[2]
        assert np.allclose(h, np.swapaxes(h, -1, -2), rtol=1e-12, atol=0)


@pytest.mark.parametrize("c", [1.5, 2.0, 4.0, 10.0])
def test_derivatives_against_mpmath(c, rng):
    """Gradient and Hessian of each piece versus 50-digit numerical differentiation."""
    for region, k in (("D1", 1), ("D2", 2), ("D3", 3)):
        x, y, w, v = random_points(region, 3, c, rng)
        _, grad, hess = piece_derivatives(k, x, y, w, v, c)
        for i in range(3):
            z0 = [mp.mpf(a) for a in (x[i], y[i], w[i], v[i])]
            f = lambda *z: mp_piece(k, *z, c)  # noqa: E731
            for a in range(4):
                order = [0] * 4
                order[a] = 1
                g = mp.diff(f, z0, tuple(order))
                assert abs(grad[i, a] - float(g)) <= 1e-9 * (1 + np.max(np.abs(grad[i])))
                for b in range(4):
                    order2 = [0] * 4
                    order2[a] += 1
                    order2[b] += 1
                    hh = mp.diff(f, z0, tuple(order2))
                    assert abs(hess[i, a, b] - float(hh)) <= 1e-8 * (1 + np.max(np.abs(hess[i])))


def test_fd_check_examples():
    rep = fd_check(pt(1.0, 5.0, 1.0, 1.5), P2, h=1e-5)
    assert rep.region == Region.D3 and rep.max_error <= 1e-6
    with pytest.raises(PreconditionError):
        fd_check(pt(1.0, 10.0), P2)
    with pytest.raises(PreconditionError):
        fd_check(pt(1.0, 1.0, 1.0, 1.0), P2)  # stencil leaves t >= 1


def test_fd_richardson(rng):
    """Halving h cuts the Hessian discrepancy by about four."""
    c = 4.0
    x, y, w, v = random_points("D3", 50, c, rng, margin=0.1)
    e1 = fd_errors(3, x, y, w, v, c, 1e-3)[1]
    e2 = fd_errors(3, x, y, w, v, c, 5e-4)[1]
    ratio = np.median(e1 / e2)
    assert 3.0 < ratio < 5.0


def test_b3_hessian_exact():
    h = block_derivatives(3, np.array(1.7), np.array(0.3), np.array(1.1), np.array(1.2), 2.0)[2]
    assert h[0, 0] == pytest.approx(2 * 4 / 1.2, rel=1e-15)


def test_directional_second_derivative_examples():
    b2 = np.array([0, 1, 0, 0, 0, 0.0])
    b3 = np.array([0, 0, 1, 0, 0, 0.0])
    assert directional_second_derivative(pt(0.3, 1), Direction(0, 1, 0, 0), P2, b2) == pytest.approx(1.0, rel=1e-15)
    assert directional_second_derivative(pt(1, 0.2), Direction(1, 0, 0, 1), P2, b3) == pytest.approx(0.0, abs=1e-12)
    assert directional_second_derivative(pt(1, 3, 1.2, 1.4), Direction(0, 0, 0, 0), P2) == 0.0
    # b2 slice: (1/v)(e - y s / v)^2
    p = pt(0.0, 1.3, 1.1, 1.6)
    d = Direction(0.0, 0.7, 0.0, -0.4)
    want = (1 / 1.6) * (0.7 + 1.3 * 0.4 / 1.6) ** 2
    assert directional_second_derivative(p, d, P2, b2) == pytest.approx(want, rel=1e-13)


def test_maximal_extension():
    assert eval_B_maximal(MaxPoint(1, 0, 0, 1, 1), P2) == pytest.approx(-2457600, rel=1e-15)
    for y in (-2.0, 0.0, 1.5):
        m = MaxPoint(0.7, y, y, 1.1, 1.2)
        assert eval_B_maximal(m, P2) == eval_B(pt(0.7, 0.0, 1.1, 1.2), P2).value
        assert maximal_z_derivative(m, P2) == 0.0
    with pytest.raises(PreconditionError):
        eval_B_maximal(MaxPoint(1, 2, 1, 1, 1), P2)


points = st.tuples(
    st.floats(-5, 5, allow_nan=False),
    st.floats(-5, 5, allow_nan=False),
    st.floats(-2, 2),  # log w
    st.floats(0, 1),  # fraction of log c for t
    st.sampled_from([1.5, 2.0, 4.0, 10.0, 100.0]),
)


def _unpack(p):
    x, y, lw, u, c = p
    w = math.exp(lw)
    t = c**u
    return x, y, w, t / w, c


@settings(max_examples=300, deadline=None)
@given(p=points, lam=st.floats(0.05, 20))
def test_quadratic_homogeneity(p, lam):
    x, y, w, v, c = _unpack(p)
    assume(abs(x) + abs(y) > 1e-3)
    a = bellman_value(x, y, w, v, c)
    b = bellman_value(lam * x, lam * y, w, v, c)
    assert abs(b - lam**2 * a) <= 1e-9 * abs(lam**2 * a) + 1e-300


@settings(max_examples=300, deadline=None)
@given(p=points, mu=st.floats(0.1, 10))
def test_weight_homogeneity(p, mu):
    x, y, w, v, c = _unpack(p)
    assume(abs(x) + abs(y) > 1e-3)
    a = bellman_value(x, y, w, v, c)
    b = bellman_value(x, y, mu * w, v / mu, c)
    assert abs(b - mu * a) <= 1e-9 * abs(mu * a) + 1e-300


@settings(max_examples=300, deadline=None)
@given(p=points)
def test_sign_symmetry(p):
    x, y, w, v, c = _unpack(p)
    a = bellman_value(x, y, w, v, c)
    assert bellman_value(-x, y, w, v, c) == a
    assert bellman_value(x, -y, w, v, c) == a


def test_continuity_across_boundaries():
    for c in (1.5, 2.0, 10.0, 100.0):
        for t in (1.0, math.sqrt(c), c):
            w = 1.3
            v = t / w
            x = 0.8
            y12 = 20 * c * x * (c / t) ** 0.25
            a, b = piece_values(1, x, y12, w, v, c), piece_values(2, x, y12, w, v, c)
            assert abs(a - b) <= 1e-12 * abs(a) * c**2
            y23 = 10 * x
            a, b = piece_values(2, x, y23, w, v, c), piece_values(3, x, y23, w, v, c)
            assert abs(a - b) <= 1e-12 * abs(a)
