import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellman_verify.errors import BellmanError, ParameterError
from bellman_verify.martingale import (
    C_SQUARED,
    SimConfig,
    average_up,
    build_transform,
    build_weight,
    chord_product_range,
    check_maximal,
    check_node_supermartingale,
    check_weighted_l2,
    ensemble_tree,
    generate_tree,
    leaf_family,
    make_tree,
    martingale_from_increments,
    multipliers,
    run_ensemble,
    running_max,
    sweep_characteristic,
    target_weights,
    tree_invariants,
    _ratio,
)


def test_build_weight_examples():
    W, V, char = build_weight([3.0] * 8)
    assert char == 1.0
    W, V, char = build_weight([1.0, 4.0])
    assert (W[0], V[0], char) == (2.5, 0.625, 1.5625)
    a, b = 2.0, 7.0
    W, V, char = build_weight([a, a, b, b])
    assert W[0] * V[0] == pytest.approx((a + b) / 2 * (1 / a + 1 / b) / 2, rel=1e-15)
    assert np.all(W[3:] * V[3:] == 1.0)


def test_build_weight_errors():
    for bad in ([1.0, 0.0], [1.0, -2.0], [1.0, math.nan], [1.0, 2.0, 3.0], [1.0]):
        with pytest.raises(ParameterError):
            build_weight(bad)
    with pytest.raises(ParameterError):
        build_weight(np.ones(2**21))


def test_transform_examples():
    X = martingale_from_increments(0.3, [1.0, 0.5, -2.0])
    assert np.array_equal(build_transform(X, np.ones(7)), X)
    X0 = martingale_from_increments(0.0, [1.0, 0.5, -2.0])
    assert np.all(build_transform(X0, np.zeros(7)) == 0)
    # alternating by level, X increments +-1, depth 2, X0 = 0: enumerate the four leaves
    X = martingale_from_increments(0.0, [1.0, 1.0, 1.0])
    H = multipliers("alternating", X, np.ones(7))
    Y = build_transform(X, H)
    # level-1 edges carry +1, level-2 edges -1: leaf = (+-1) - (+-1)
    assert Y[3:].tolist() == [0.0, 2.0, -2.0, 0.0]
    assert X[3:].tolist() == [2.0, 0.0, 0.0, -2.0]


def test_transform_errors():
    X = martingale_from_increments(0.0, [1.0, 1.0, 1.0])
    with pytest.raises(ParameterError):
        build_transform(X, np.full(7, 1.5))
    H = np.ones(7)
    H[1] = -1.0
    with pytest.raises(ParameterError):
        build_transform(X, H)
    with pytest.raises(ParameterError):
        build_transform(X, np.ones(3))


def test_running_max():
    Y = np.array([0.0, 2.0, -1.0, 1.0, 3.0, 0.5, -4.0])
    assert running_max(Y).tolist() == [0.0, 2.0, 0.0, 2.0, 3.0, 0.5, 0.0]


def test_adversarial_choice_is_greedy_optimal(rng):
    """At every node the chosen sign gives the larger one-step average of Y^2 W."""
    for _ in range(20):
        tree = generate_tree(5, 6.0, "lognormal", "adversarial", rng)
        for k in tree.internal():
            l, r = 2 * k + 1, 2 * k + 2
            d = tree.X[l] - tree.X[k]
            avg = lambda h: 0.5 * ((tree.Y[k] + h * d) ** 2 * tree.W[l] + (tree.Y[k] - h * d) ** 2 * tree.W[r])  # noqa: E731
            h = tree.H[l]
            assert avg(h) >= avg(-h) - 1e-12 * abs(avg(h))


@pytest.mark.parametrize("law", ["two-point", "power", "lognormal"])
@pytest.mark.parametrize("target", [1.0, 1.5, 4.0, 16.0])
def test_target_weights_hit_characteristic(law, target, rng):
    w = target_weights(law, target, 8, rng)
    char = build_weight(w)[2]
    assert abs(char / target - 1) <= 0.01


def test_power_characteristic_grows_with_exponent(rng):
    chars = [build_weight(leaf_family("power", a, 8, rng))[2] for a in np.linspace(0, 3, 13)]
    assert np.all(np.diff(chars) > 0)


def test_refinement_never_decreases_characteristic(rng):
    for _ in range(50):
        n = int(rng.integers(1, 8))
        leaves = np.exp(rng.normal(size=2**n))
        split = rng.uniform(-0.9, 0.9, 2**n)
        finer = np.stack([leaves * (1 + split), leaves * (1 - split)], axis=1).ravel()
        assert build_weight(finer)[2] >= build_weight(leaves)[2] * (1 - 1e-15)
        # trivial refinement keeps it
        assert build_weight(np.repeat(leaves, 2))[2] == pytest.approx(build_weight(leaves)[2], rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), depth=st.integers(1, 9), law=st.sampled_from(["two-point", "power", "lognormal"]),
       h_law=st.sampled_from(["constant", "alternating", "adversarial", "random"]), target=st.floats(1.0, 16.0))
def test_tree_invariants_hold(seed, depth, law, h_law, target):
    tree = generate_tree(depth, target, law, h_law, np.random.default_rng(seed))
    inv = tree_invariants(tree)
    assert inv["martingale"] <= 1e-14
    assert inv["subordination"] <= 4 * np.finfo(float).eps
    assert np.all(np.abs(tree.H) <= 1)
    assert inv["leaf_identity"] <= 1e-12
    assert inv["characteristic_range"] <= 1e-12
    assert check_weighted_l2(tree)["ratio"] <= 1
    mx = check_maximal(tree)
    assert mx["gap"] <= 1 and mx["two_sided"] <= 1


def test_weighted_l2_examples(rng):
    tree = generate_tree(6, 3.0, "two-point", "constant", rng)
    r = check_weighted_l2(tree)
    assert r["ratio"] == pytest.approx(1 / (C_SQUARED * tree.characteristic**2), rel=1e-12)
    assert r["raw"] == pytest.approx(1.0, rel=1e-12)
    zero = make_tree(np.zeros(15), np.ones(15), np.exp(rng.normal(size=8)))
    assert check_weighted_l2(zero)["ratio"] == 0.0
    assert check_maximal(zero) == {"gap": 0.0, "two_sided": 0.0}
    tree = generate_tree(8, 8.0, "power", "adversarial", rng)
    assert abs(tree.characteristic / 8 - 1) <= 0.01
    assert check_weighted_l2(tree)["ratio"] <= 1


def test_ratio_internal_error():
    with pytest.raises(BellmanError):
        _ratio(1.0, 0.0)
    assert _ratio(0.0, 0.0) == 0.0


def test_maximal_enumeration():
    """X0 = 1 with +-delta increments and H = 1: compare with brute-force path enumeration."""
    delta = 0.5
    depth = 3
    X = martingale_from_increments(1.0, np.full(2**depth - 1, delta))
    leaves = np.ones(2**depth)
    tree = make_tree(X, np.ones(X.size), leaves)
    gaps, absmax = [], []
    for signs in itertools.product([1, -1], repeat=depth):
        path = np.concatenate([[1.0], 1.0 + delta * np.cumsum(signs)])
        gaps.append((path.max() - path[-1]) ** 2)
        absmax.append(np.abs(path).max() ** 2)
    ex2 = np.mean([(1.0 + delta * sum(s)) ** 2 for s in itertools.product([1, -1], repeat=depth)])
    mx = check_maximal(tree)
    assert mx["gap"] == pytest.approx(np.mean(gaps) / (C_SQUARED * ex2), rel=1e-14)
    assert mx["two_sided"] == pytest.approx(np.mean(absmax) / (16 * C_SQUARED * ex2), rel=1e-14)


def test_maximal_seed7_two_point():
    tree = generate_tree(8, 4.0, "two-point", "adversarial", np.random.default_rng(7))
    mx = check_maximal(tree)
    assert mx["gap"] <= 1 and mx["two_sided"] <= 1


def test_chord_product_range():
    lo, hi = chord_product_range(np.array([1.0]), np.array([1.0]), np.array([3.0]), np.array([1 / 3]))
    # w v along the chord is 1 + s (1/3 - 1 + 3 - 1) + s^2 (2)(-2/3): peak at s = 1/2
    q = lambda s: (1 + 2 * s) * (1 - 2 * s / 3)  # noqa: E731
    assert hi[0] == pytest.approx(q(0.5), rel=1e-14) and lo[0] == pytest.approx(1.0)


def test_node_supermartingale_examples(rng):
    tree = generate_tree(6, 1.0, "two-point", "constant", rng)
    assert tree.characteristic == 1.0
    r = check_node_supermartingale(tree)
    assert r.passed and r.details["skipped"] == 0
    zero = make_tree(np.zeros(63), np.ones(63), target_weights("lognormal", 3.0, 5, rng))
    r = check_node_supermartingale(zero)
    assert r.passed and r.worst_violation == 0.0
    tree = generate_tree(6, 4.0, "lognormal", "adversarial", np.random.default_rng(42))
    r = check_node_supermartingale(tree)
    assert r.passed
    assert r.details["eligible"] + r.details["skipped"] == 63


def test_node_check_detects_a_broken_function(rng, monkeypatch):
    """Replacing B by a convex function must show violations."""
    from bellman_verify import martingale

    tree = generate_tree(6, 4.0, "lognormal", "adversarial", rng)
    monkeypatch.setattr(martingale, "bellman_value", lambda x, y, w, v, c: y * y * w + x * x)
    assert not check_node_supermartingale(tree).passed


def test_sim_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(depth=25)
    with pytest.raises(ParameterError):
        SimConfig(depth=0)
    with pytest.raises(ParameterError):
        SimConfig(n_trees=-1)
    with pytest.raises(ParameterError):
        SimConfig(c_target=0.5)
    with pytest.raises(ParameterError):
        SimConfig(leaf_law="bogus")
    with pytest.raises(ParameterError):
        SimConfig(leaf_law="user")
    with pytest.raises(ParameterError):
        SimConfig(depth=2, leaf_law="user", leaf_weights=(1.0, 2.0))


def test_user_leaf_weights():
    cfg = SimConfig(depth=2, leaf_law="user", leaf_weights=(1.0, 2.0, 4.0, 8.0), n_trees=5, h_law="adversarial")
    res = run_ensemble(cfg)
    assert res.passed
    assert {r["characteristic"] for r in res.rows} == {build_weight([1.0, 2.0, 4.0, 8.0])[2]}


def test_ensemble_reproducible_and_worker_independent():
    cfg = SimConfig(depth=6, min_depth=2, c_target=8.0, vary_char=True, n_trees=24, seed=3)
    a = run_ensemble(cfg, workers=1)
    b = run_ensemble(cfg, workers=2)
    assert a.rows == b.rows
    assert [r.to_dict() for r in a.reports] == [r.to_dict() for r in b.reports]
    assert a.passed
    t = ensemble_tree(cfg, 5)
    assert t.characteristic == a.rows[5]["characteristic"]
    with pytest.raises(ParameterError):
        ensemble_tree(cfg, 24)


def test_empty_ensemble_and_sweep():
    cfg = SimConfig(n_trees=0)
    res = run_ensemble(cfg)
    assert res.rows == [] and res.passed
    assert sweep_characteristic(cfg, [1, 2, 4]) == []
    table = sweep_characteristic(SimConfig(depth=6, n_trees=12, seed=1), [1.0, 2.0, 8.0])
    assert [row["target"] for row in table] == [1.0, 2.0, 8.0]
    assert table[0]["characteristic"] == 1.0
    assert all(row["n_trees"] == 12 for row in table)
    assert all(row["best_raw_ratio"] >= 1.0 - 1e-12 for row in table)


def test_tree_csv(rng):
    tree = generate_tree(3, 2.0, "power", "random", rng)
    lines = tree.to_csv({"seed": 1}).splitlines()
    assert lines[0].startswith("# bellman-verify") and "config=" in lines[0]
    assert lines[1] == "node,X,Y,W,V,Ystar,H"
    assert len(lines) == 2 + 15
    row = lines[2 + 4].split(",")
    assert int(row[0]) == 4 and float(row[3]) == tree.W[4]


def test_average_up():
    assert average_up([1.0, 3.0, 5.0, 7.0]).tolist() == [4.0, 2.0, 6.0, 1.0, 3.0, 5.0, 7.0]
