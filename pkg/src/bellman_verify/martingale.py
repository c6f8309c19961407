"""Finite dyadic martingales: A2 weights, transforms, running maxima and exact expectations.

Trees are stored as flat binary heaps: node k has children 2k+1 and 2k+2, level l
occupies indices 2^l - 1 .. 2^(l+1) - 2, and the 2^n leaves come last. Each split
has probability 1/2, so every expectation is an exact average over leaves.
``H[k]`` is the multiplier on the edge into node k (both siblings share it,
which is predictability); ``H[0]`` is the starting multiplier, Y_0 = H_0 X_0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import bellman_value, hessian_scale
from .errors import BellmanError, ParameterError
from .parallel import map_chunks, resolve_workers
from .report import VerificationReport, csv_text

MAX_DEPTH = 20
C_SQUARED = 1228800.0
LEAF_LAWS = ("two-point", "power", "lognormal", "user")
H_LAWS = ("constant", "alternating", "adversarial", "random")
TREE_COLUMNS = ["node", "X", "Y", "W", "V", "Ystar", "H"]


@dataclass
class DyadicTree:
    depth: int
    X: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    V: np.ndarray
    H: np.ndarray
    Ystar: np.ndarray
    Yabs_star: np.ndarray
    characteristic: float

    @property
    def n_nodes(self) -> int:
        return self.X.size

    def leaves(self) -> slice:
        return slice(2**self.depth - 1, 2 ** (self.depth + 1) - 1)

    def internal(self) -> np.ndarray:
        return np.arange(2**self.depth - 1)

    def to_csv(self, config: dict | None = None) -> str:
        rows = zip(range(self.n_nodes), self.X, self.Y, self.W, self.V, self.Ystar, self.H)
        return csv_text(TREE_COLUMNS, rows, config)


@dataclass(frozen=True)
class SimConfig:
    """Ensemble configuration.

    Each tree draws its depth uniformly from [min_depth, depth] and its target
    characteristic log-uniformly from [1, c_target] when ``vary_char`` is set
    (otherwise exactly c_target). ``leaf_law`` / ``h_law`` may be "mixed",
    which cycles through the concrete laws tree by tree.
    """

    depth: int = 8
    seed: int = 0
    c_target: float = 4.0
    leaf_law: str = "mixed"
    h_law: str = "mixed"
    n_trees: int = 100
    min_depth: int | None = None
    vary_char: bool = False
    h_value: float = 1.0
    leaf_weights: tuple | None = None
    c_bellman: float | None = None  # parameter of B in the node check; default max(char, 1.001)
    tol: float = 1e-9

    def __post_init__(self):
        if not 1 <= self.depth <= MAX_DEPTH:
            raise ParameterError(f"depth must be in [1, {MAX_DEPTH}], got {self.depth}")
        if self.min_depth is not None and not 1 <= self.min_depth <= self.depth:
            raise ParameterError("min_depth must be in [1, depth]")
        if self.n_trees < 0:
            raise ParameterError("number of trees must be nonnegative")
        if not self.c_target >= 1.0:
            raise ParameterError("target characteristic must be at least 1")
        if self.leaf_law not in LEAF_LAWS + ("mixed",):
            raise ParameterError(f"unknown leaf law {self.leaf_law!r}")
        if self.h_law not in H_LAWS + ("mixed",):
            raise ParameterError(f"unknown H law {self.h_law!r}")
        if abs(self.h_value) > 1:
            raise ParameterError("|h_value| must be at most 1")
        if self.leaf_law == "user" and self.leaf_weights is None:
            raise ParameterError("leaf law 'user' needs leaf_weights")
        if self.leaf_weights is not None and len(self.leaf_weights) != 2**self.depth:
            raise ParameterError(f"expected {2**self.depth} leaf weights, got {len(self.leaf_weights)}")


# --- building blocks -------------------------------------------------------------


def _depth_of(n_leaves: int) -> int:
    n = int(n_leaves).bit_length() - 1
    if n < 1 or 2**n != n_leaves:
        raise ParameterError(f"number of leaves must be a power of two >= 2, got {n_leaves}")
    if n > MAX_DEPTH:
        raise ParameterError(f"depth {n} exceeds the cap {MAX_DEPTH}")
    return n


def average_up(leaf_values, depth: int | None = None) -> np.ndarray:
    """Heap array whose internal nodes are averages of their two children."""
    leaf_values = np.asarray(leaf_values, dtype=float)
    n = depth if depth is not None else _depth_of(leaf_values.size)
    out = np.empty(2 ** (n + 1) - 1)
    out[2**n - 1:] = leaf_values
    for level in range(n - 1, -1, -1):
        k = np.arange(2**level - 1, 2 ** (level + 1) - 1)
        out[k] = 0.5 * (out[2 * k + 1] + out[2 * k + 2])
    return out


def build_weight(leaf_weights):
    """(W, V, characteristic): W averages the leaf weights, V their reciprocals; char = max W V."""
    leaf_weights = np.asarray(leaf_weights, dtype=float)
    if not np.all(np.isfinite(leaf_weights)) or np.any(leaf_weights <= 0):
        raise ParameterError("leaf weights must be positive and finite")
    n = _depth_of(leaf_weights.size)
    W = average_up(leaf_weights, n)
    V = average_up(1.0 / leaf_weights, n)
    return W, V, float(np.max(W * V))


def build_transform(X, H) -> np.ndarray:
    """Y with Y_0 = H_0 X_0 and Y_k = Y_parent + H_k (X_k - X_parent)."""
    X = np.asarray(X, dtype=float)
    H = np.asarray(H, dtype=float)
    if X.shape != H.shape:
        raise ParameterError("X and H must have the same number of nodes")
    if np.any(np.abs(H) > 1):
        raise ParameterError("multipliers must satisfy |H| <= 1")
    k = np.arange(1, X.size)
    if np.any(H[k[::2]] != H[k[1::2]]):
        raise ParameterError("siblings must share the multiplier (predictability)")
    Y = np.empty_like(X)
    Y[0] = H[0] * X[0]
    for lo in _level_starts(X.size)[1:]:
        kk = np.arange(lo, 2 * lo + 1)
        parent = (kk - 1) // 2
        Y[kk] = Y[parent] + H[kk] * (X[kk] - X[parent])
    return Y


def _level_starts(n_nodes: int):
    starts, lo = [], 0
    while lo < n_nodes:
        starts.append(lo)
        lo = 2 * lo + 1
    return starts


def running_max(Y) -> np.ndarray:
    """Pathwise running maximum from the root, root included."""
    out = np.array(Y, dtype=float)
    for lo in _level_starts(out.size)[1:]:
        kk = np.arange(lo, 2 * lo + 1)
        out[kk] = np.maximum(out[kk], out[(kk - 1) // 2])
    return out


def martingale_from_increments(x0: float, increments) -> np.ndarray:
    """X with children X_parent +- increments[parent] (increments has one entry per internal node)."""
    increments = np.asarray(increments, dtype=float)
    n_nodes = 2 * increments.size + 1
    X = np.empty(n_nodes)
    X[0] = x0
    for lo in _level_starts(n_nodes)[1:]:
        kk = np.arange(lo, 2 * lo + 1, 2)
        parent = (kk - 1) // 2
        X[kk] = X[parent] + increments[parent]
        X[kk + 1] = X[parent] - increments[parent]
    return X


def multipliers(law: str, X, W, rng=None, h_value: float = 1.0) -> np.ndarray:
    """Edge multipliers under one of the H laws.

    adversarial: at each node the sign maximizing the one-step average of Y^2 W,
    i.e. sign(Y d (W_left - W_right)) with d = X_left - X_parent (ties -> +1).
    """
    n_nodes = X.size
    H = np.empty(n_nodes)
    if law == "constant":
        H[:] = h_value
        return H
    if law == "random":
        rng = rng if rng is not None else np.random.default_rng()
        h = rng.uniform(-1.0, 1.0, n_nodes)
        H[0] = h[0]
        H[1::2] = h[1::2]
        H[2::2] = h[1::2]
        return H
    if law == "alternating":
        H[0] = 1.0
        for level, lo in enumerate(_level_starts(n_nodes)[1:]):
            H[lo:2 * lo + 1] = 1.0 if level % 2 == 0 else -1.0
        return H
    if law != "adversarial":
        raise ParameterError(f"unknown H law {law!r}")
    H[0] = 1.0
    Y = np.empty(n_nodes)
    Y[0] = X[0]
    for lo in _level_starts(n_nodes)[:-1]:
        k = np.arange(lo, 2 * lo + 1)
        left, right = 2 * k + 1, 2 * k + 2
        d = X[left] - X[k]
        h = np.where(Y[k] * d * (W[left] - W[right]) >= 0, 1.0, -1.0)
        H[left] = H[right] = h
        Y[left] = Y[k] + h * d
        Y[right] = Y[k] - h * d
    return H


def leaf_family(law: str, theta: float, depth: int, rng) -> np.ndarray:
    """Leaf weights of a one-parameter family; theta = 0 gives the constant weight.

    two-point: exp(theta z) with random z in {-1, 1} (both values present)
    power:     ((i + 1/2) / 2^n)^theta at leaf position i
    lognormal: exp(theta g) with standard normal g
    Random draws come from ``rng`` once; call with the same state to vary theta only.
    """
    m = 2**depth
    if law == "two-point":
        z = rng.choice([-1.0, 1.0], m)
        z[rng.integers(m // 2)] = -1.0
        z[m // 2 + rng.integers(m // 2)] = 1.0
        return np.exp(theta * z)
    if law == "power":
        return ((np.arange(m) + 0.5) / m) ** theta
    if law == "lognormal":
        return np.exp(theta * rng.standard_normal(m))
    raise ParameterError(f"unknown leaf law {law!r}")


def target_weights(law: str, c_target: float, depth: int, rng, rel_tol: float = 0.01, max_iter: int = 200):
    """Leaf weights of ``law`` whose characteristic is within rel_tol of c_target, by bisection in theta."""
    if c_target <= 1.0 + rel_tol:
        return np.ones(2**depth)
    seed = int(rng.integers(2**63))

    def draw(theta):
        return leaf_family(law, theta, depth, np.random.default_rng(seed))

    def char(theta):
        return build_weight(draw(theta))[2]

    lo, hi = 0.0, 1.0
    while char(hi) < c_target:
        hi *= 2.0
        if hi > 1e3:
            raise BellmanError(f"cannot reach characteristic {c_target} with the {law} law")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        cm = char(mid)
        if abs(cm / c_target - 1.0) <= rel_tol:
            return draw(mid)
        if cm < c_target:
            lo = mid
        else:
            hi = mid
    raise BellmanError(f"bisection for characteristic {c_target} did not converge")


def make_tree(X, H, leaf_weights) -> DyadicTree:
    W, V, char = build_weight(leaf_weights)
    X = np.asarray(X, dtype=float)
    if X.size != W.size:
        raise ParameterError("X and the weight tree differ in size")
    Y = build_transform(X, H)
    return DyadicTree(
        depth=_depth_of(np.asarray(leaf_weights).size),
        X=X, Y=Y, W=W, V=V, H=np.asarray(H, dtype=float),
        Ystar=running_max(Y), Yabs_star=running_max(np.abs(Y)),
        characteristic=char,
    )


def generate_tree(depth: int, c_target: float, leaf_law: str, h_law: str, rng, h_value: float = 1.0,
                  leaf_weights=None) -> DyadicTree:
    """Random tree: X_0 and the increments are standard normal, weights hit c_target."""
    if not 1 <= depth <= MAX_DEPTH:
        raise ParameterError(f"depth must be in [1, {MAX_DEPTH}]")
    if leaf_law == "user":
        weights = np.asarray(leaf_weights, dtype=float)
    else:
        weights = target_weights(leaf_law, c_target, depth, rng)
    X = martingale_from_increments(rng.standard_normal(), rng.standard_normal(2**depth - 1))
    W, _, _ = build_weight(weights)
    H = multipliers(h_law, X, W, rng, h_value)
    return make_tree(X, H, weights)


# --- checks ---------------------------------------------------------------------


def tree_invariants(tree: DyadicTree) -> dict:
    """Largest defects of the martingale, subordination and weight invariants."""
    k = tree.internal()
    left, right = 2 * k + 1, 2 * k + 2
    mart = 0.0
    for F in (tree.X, tree.Y, tree.W, tree.V):
        if k.size:
            gap = np.abs(F[k] - 0.5 * (F[left] + F[right])) / (1.0 + np.abs(F[k]))
            mart = max(mart, float(np.max(gap)))
    sub = 0.0
    if k.size:
        idx = np.arange(1, tree.n_nodes)
        par = (idx - 1) // 2
        # |dY| <= |dX| holds for the applied increments; recomputing dY by subtraction adds rounding in |Y|
        excess = np.abs(tree.Y[idx] - tree.Y[par]) - np.abs(tree.X[idx] - tree.X[par])
        sub = float(np.max(excess / (1.0 + np.abs(tree.Y[idx]) + np.abs(tree.Y[par]))))
    leaf = tree.leaves()
    t = tree.W * tree.V
    return {
        "martingale": mart,
        "subordination": max(sub, 0.0),
        "leaf_identity": float(np.max(np.abs(t[leaf] - 1.0))),
        "characteristic_range": float(max(0.0, 1.0 - np.min(t) - 1e-12, np.max(t) - tree.characteristic)),
    }


def chord_product_range(wl, vl, wr, vr):
    """Min and max of w v along the segment from (wl, vl) to (wr, vr)."""
    dw, dv = wr - wl, vr - vl
    a, b, c0 = dw * dv, wl * dv + vl * dw, wl * vl
    ends = np.stack([wl * vl, wr * vr])
    lo, hi = ends.min(axis=0), ends.max(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(a != 0, -b / (2 * a), -1.0)
    inside = (s > 0) & (s < 1)
    q = a * s * s + b * s + c0
    lo = np.where(inside, np.minimum(lo, q), lo)
    hi = np.where(inside, np.maximum(hi, q), hi)
    return lo, hi


def check_node_supermartingale(tree: DyadicTree, c: float | None = None, tol: float = 1e-9) -> VerificationReport:
    """Worst (mean B(children) - B(parent)) / scale over nodes whose child chord stays in D_c."""
    c = float(c) if c is not None else max(tree.characteristic, 1.0 + 1e-3)
    k = tree.internal()
    left, right = 2 * k + 1, 2 * k + 2
    lo, hi = chord_product_range(tree.W[left], tree.V[left], tree.W[right], tree.V[right])
    eligible = (lo >= 1.0 - 1e-12) & (hi <= c * (1.0 + 1e-12))
    worst, witness = -np.inf, {}
    if np.any(eligible):
        kk = k[eligible]
        B = lambda idx: bellman_value(tree.X[idx], tree.Y[idx], tree.W[idx], tree.V[idx], c)  # noqa: E731
        gap = 0.5 * (B(2 * kk + 1) + B(2 * kk + 2)) - B(kk)
        viol = gap / hessian_scale(tree.X[kk], tree.Y[kk], tree.W[kk], tree.V[kk], c)
        j = int(np.argmax(viol))
        worst = float(viol[j])
        witness = {"node": int(kk[j])}
    return VerificationReport(
        "node_supermartingale", int(k.size), worst, tol, witness, c=c,
        details={"eligible": int(np.sum(eligible)), "skipped": int(k.size - np.sum(eligible))},
    )


def _leaf_expectations(tree: DyadicTree):
    leaf = tree.leaves()
    W = tree.W[leaf]
    return (
        float(np.mean(tree.X[leaf] ** 2 * W)),
        float(np.mean(tree.Y[leaf] ** 2 * W)),
        float(np.mean((tree.Ystar[leaf] - tree.Y[leaf]) ** 2 * W)),
        float(np.mean(tree.Yabs_star[leaf] ** 2 * W)),
    )


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    if num > 0:
        raise BellmanError("E[X^2 W] = 0 while the transform side is positive")
    return 0.0


def check_weighted_l2(tree: DyadicTree) -> dict:
    """ratio = E[Y^2 W] / (1228800 char^2 E[X^2 W]) (must be <= 1) and raw = sqrt(E[Y^2 W] / E[X^2 W])."""
    ex, ey, _, _ = _leaf_expectations(tree)
    bound = C_SQUARED * tree.characteristic**2 * ex
    return {"ratio": _ratio(ey, bound), "raw": float(np.sqrt(_ratio(ey, ex)))}


def check_maximal(tree: DyadicTree) -> dict:
    """Exact maximal-function ratios, both must be <= 1.

    gap:       E[(Y* - Y)^2 W] / (1228800 char^2 E[X^2 W])
    two_sided: E[(|Y|*)^2 W] / (16 * 1228800 char^2 E[X^2 W])
    """
    ex, _, eg, ea = _leaf_expectations(tree)
    bound = C_SQUARED * tree.characteristic**2 * ex
    return {"gap": _ratio(eg, bound), "two_sided": _ratio(ea, 16.0 * bound)}


# --- ensembles ------------------------------------------------------------------


@dataclass
class EnsembleResult:
    rows: list = field(default_factory=list)
    reports: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_csv(self, config: dict | None = None) -> str:
        cols = list(ROW_COLUMNS)
        return csv_text(cols, ([row[c] for c in cols] for row in self.rows), config)


ROW_COLUMNS = ("tree", "depth", "leaf_law", "h_law", "target", "characteristic", "l2_ratio", "gap_ratio",
               "two_sided_ratio", "raw_ratio", "node_worst", "eligible", "skipped")


def _tree_plan(cfg: SimConfig, index: int, rng):
    lo = cfg.min_depth or cfg.depth
    depth = int(rng.integers(lo, cfg.depth + 1))
    if cfg.leaf_weights is not None:
        depth = cfg.depth
    target = float(np.exp(rng.uniform(0.0, np.log(cfg.c_target)))) if cfg.vary_char else cfg.c_target
    leaf_law = LEAF_LAWS[index % 3] if cfg.leaf_law == "mixed" else cfg.leaf_law
    h_law = H_LAWS[(index // 3) % len(H_LAWS)] if cfg.h_law == "mixed" else cfg.h_law
    return depth, target, leaf_law, h_law


def _planned_tree(cfg: SimConfig, index: int, seed_seq):
    rng = np.random.default_rng(seed_seq)
    depth, target, leaf_law, h_law = _tree_plan(cfg, index, rng)
    tree = generate_tree(depth, target, leaf_law, h_law, rng, cfg.h_value, cfg.leaf_weights)
    return (depth, target, leaf_law, h_law), tree


def ensemble_tree(cfg: SimConfig, index: int) -> DyadicTree:
    """Tree number ``index`` of the ensemble described by ``cfg``, exactly as run_ensemble builds it."""
    if not 0 <= index < cfg.n_trees:
        raise ParameterError(f"tree index {index} outside [0, {cfg.n_trees})")
    return _planned_tree(cfg, index, np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)[index])[1]


def _run_tree(cfg: SimConfig, index: int, seed_seq) -> dict:
    (depth, target, leaf_law, h_law), tree = _planned_tree(cfg, index, seed_seq)
    node = check_node_supermartingale(tree, cfg.c_bellman, cfg.tol)
    l2 = check_weighted_l2(tree)
    mx = check_maximal(tree)
    inv = tree_invariants(tree)
    return {
        "tree": index, "depth": depth, "leaf_law": leaf_law, "h_law": h_law, "target": target,
        "characteristic": tree.characteristic, "l2_ratio": l2["ratio"], "gap_ratio": mx["gap"],
        "two_sided_ratio": mx["two_sided"], "raw_ratio": l2["raw"], "node_worst": node.worst_violation,
        "eligible": node.details["eligible"], "skipped": node.details["skipped"], "invariants": inv,
    }


def _run_batch(indices, cfg: SimConfig, seeds):
    rows = [_run_tree(cfg, int(i), seeds[int(i)]) for i in indices]
    return (np.array(rows, dtype=object),)


def run_ensemble(cfg: SimConfig, workers: int | None = 1) -> EnsembleResult:
    """Generate ``n_trees`` trees (per-tree seeds spawned from cfg.seed) and check each exactly."""
    start = time.perf_counter()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
    rows = []
    if cfg.n_trees:
        chunk = max(1, cfg.n_trees // (4 * resolve_workers(workers)))
        (out,) = map_chunks(_run_batch, (np.arange(cfg.n_trees),), cfg, seeds, workers=workers, chunk=chunk)
        rows = list(out)
    n = len(rows)

    def worst(key):
        return max((r[key] for r in rows), default=-np.inf)

    def arg(key):
        return {"tree": max(rows, key=lambda r: r[key])["tree"]} if rows else {}

    inv_worst = max((max(r["invariants"].values()) for r in rows), default=0.0)
    reports = [
        VerificationReport("weighted_l2", n, worst("l2_ratio"), 1.0, arg("l2_ratio")),
        VerificationReport("maximal_gap", n, worst("gap_ratio"), 1.0, arg("gap_ratio")),
        VerificationReport("two_sided_maximal", n, worst("two_sided_ratio"), 1.0, arg("two_sided_ratio")),
        VerificationReport(
            "node_supermartingale", sum(r["eligible"] + r["skipped"] for r in rows), worst("node_worst"), cfg.tol,
            arg("node_worst"),
            details={"eligible": sum(r["eligible"] for r in rows), "skipped": sum(r["skipped"] for r in rows)},
        ),
        VerificationReport("tree_invariants", n, inv_worst, 1e-12),
    ]
    elapsed = time.perf_counter() - start
    for r in reports:
        r.wall_time = elapsed
    for r in rows:
        r.pop("invariants")
    return EnsembleResult(rows, reports)


def sweep_characteristic(cfg: SimConfig, char_grid, workers: int | None = 1) -> list[dict]:
    """Per target: achieved characteristic and the best raw ratio ||Y||/||X|| in L2(W) over the ensemble."""
    if cfg.n_trees == 0:
        return []
    table = []
    for target in char_grid:
        res = run_ensemble(replace(cfg, c_target=float(target), vary_char=False), workers)
        table.append({
            "target": float(target),
            "characteristic": max(r["characteristic"] for r in res.rows),
            "best_raw_ratio": max(r["raw_ratio"] for r in res.rows),
            "n_trees": len(res.rows),
        })
    return table

