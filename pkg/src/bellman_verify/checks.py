"""Pointwise grid checks of the size conditions, piece ordering and constrained concavity."""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .concavity import constrained_max_chunk, lambda_grid
from .core import (
    PIECE_COEFFS,
    bellman_derivatives,
    bellman_value,
    block_values,
    classify,
    fd_errors,
    hessian_scale,
    majorant,
    piece_index,
    validate,
    value_scale,
)
from .grids import GridSpec, random_points
from .kernels import phi_all, phi_derivatives
from .parallel import map_chunks
from .report import VerificationReport

GLOBAL_CHECKS = ("initial", "majorization", "ordering", "continuity", "neumann")


def majorization_gap(x, y, w, v, c: float) -> np.ndarray:
    """B - G evaluated without cancellation.

    B - G = y^2 w g(t) + 294400 c^2 x^2 (1 - psi_hat(t)) / v + (piece term), with
    g(t) = 3(t - 1)/(2t) - ln(t)/(2c) and 1 - psi_hat = (phi - 1)/phi; every
    summand is nonnegative on its own.
    """
    x, y, w, v, t = validate(x, y, w, v, c)
    tm1 = t - 1.0
    lt = np.log1p(tm1)
    g = 1.5 * tm1 / t - lt / (2.0 * c)
    phi_m1 = tm1 / t - lt / (2.0 * c)
    one_minus_psi_hat = phi_m1 / (1.0 + phi_m1)
    blocks = block_values(x, y, w, v, c)
    pieces = piece_index(classify(x, y, w, v, c))
    extra = np.select(
        [pieces == 1, pieces == 2, pieces == 3],
        [6400.0 * blocks[..., 2], 320.0 * blocks[..., 3], 32.0 * blocks[..., 4]],
    )
    return y * y * w * g + 294400.0 * c * c * x * x * one_minus_psi_hat / v + extra


def _magnitude(x, y, w, v, c):
    """Sum of absolute summands in B and G, the size of binary64 rounding in B - G."""
    blocks = np.abs(block_values(x, y, w, v, c))
    return blocks @ np.abs(PIECE_COEFFS[2] + np.array([0, 0, 6400, 0, 32, 0])) + np.abs(majorant(x, y, w, v, c))


def _initial_chunk(x, y, w, v, c):
    return (bellman_value(x, y, w, v, c) / value_scale(x, y, w),)


def _majorization_chunk(x, y, w, v, c):
    gap = majorization_gap(x, y, w, v, c)
    naive = bellman_value(x, y, w, v, c) - majorant(x, y, w, v, c)
    consistency = np.abs(naive - gap) / (64 * np.finfo(float).eps * _magnitude(x, y, w, v, c) + 1e-300)
    return -gap / value_scale(x, y, w), consistency


def _ordering_chunk(x, y, w, v, c):
    b = block_values(x, y, w, v, c)
    p1, p2, p3 = (b @ PIECE_COEFFS[k] for k in (1, 2, 3))
    reg = piece_index(classify(x, y, w, v, c))
    viol = np.select([reg == 1, reg == 2, reg == 3], [p1 - p2, p2 - np.minimum(p1, p3), p3 - p2])
    return viol / hessian_scale(x, y, w, v, c), reg


def _continuity_chunk(x, y, w, v, c, pair):
    b = block_values(x, y, w, v, c)
    lo, hi = pair
    return (np.abs(b @ PIECE_COEFFS[lo] - b @ PIECE_COEFFS[hi]) / hessian_scale(x, y, w, v, c),)


def _neumann_chunk(x, y, w, v, c):
    grad = bellman_derivatives(x, y, w, v, c)[1]
    return (np.abs(grad[..., 1]) / value_scale(x, y, w),)


def _scan_report(name, grid_for_c, chunk_fn, tol, grid: GridSpec, workers, extra_args=(), dump=False):
    start = time.perf_counter()
    worst, witness, total = -np.inf, {}, 0
    dumps = []
    extras = []
    for c in grid.c_values:
        g = grid_for_c(c)
        x, y, w, v = g.points(c)
        outs = map_chunks(chunk_fn, (x, y, w, v), c, *extra_args, workers=workers)
        viol = outs[0]
        extras.append(outs[1:])
        total += x.size
        k = int(np.argmax(viol))
        if viol[k] > worst:
            worst = float(viol[k])
            witness = {"c": c, "x": float(x[k]), "y": float(y[k]), "w": float(w[k]), "v": float(v[k])}
        if dump:
            dumps.append((x, y, w, v, classify(x, y, w, v, c), viol))
    report = VerificationReport(
        check=name,
        total_points=total,
        worst_violation=worst,
        tolerance=tol,
        witness=witness,
        c=grid.c_values[0] if len(grid.c_values) == 1 else None,
        wall_time=time.perf_counter() - start,
    )
    if dump and dumps:
        cols = [np.concatenate(parts) for parts in zip(*dumps)]
        report.dump = dict(zip(("x", "y", "w", "v", "region", "value"), cols))
    return report, extras


def verify_global(check: str, grid: GridSpec, tol: float | None = None, workers: int | None = 1, dump: bool = False):
    """Pointwise size/ordering checks; violations are signed and scale-normalized.

    initial:      B / s                      <= tol on |y| <= |x|
    majorization: (G - B) / s                <= tol everywhere
    ordering:     piece excess / s'          <= tol on each region
    continuity:   |B_i - B_j| / s'           <= tol on the two boundaries
    neumann:      |dB/dy (x, 0, w, v)| / s   <= tol

    with s = (1 + x^2 + y^2) w and s' = s max(1, c^2 / v).
    """
    if check not in GLOBAL_CHECKS:
        raise ValueError(f"unknown global check {check!r}; choose from {GLOBAL_CHECKS}")
    at = lambda region: (lambda c: replace(grid, c_values=(c,), region=region))  # noqa: E731
    if check == "initial":
        report, _ = _scan_report("initial", at("initial"), _initial_chunk, tol or 1e-10, grid, workers, dump=dump)
    elif check == "majorization":
        report, extras = _scan_report("majorization", at("full"), _majorization_chunk, tol or 1e-10, grid, workers, dump=dump)
        cons = max(float(np.max(e[0])) for e in extras)
        report.subchecks = [
            VerificationReport(
                "majorization.rounding_consistency", report.total_points, cons, 1.0,
                details={"meaning": "|(B - G) - gap| in units of 64 eps times the summand magnitude"},
            )
        ]
    elif check == "ordering":
        reports = []
        for region in ("D1", "D2", "D3"):
            r, extras = _scan_report(f"ordering.{region}", at(region), _ordering_chunk, tol or 1e-9, grid, workers, dump=dump)
            reports.append(r)
        report = _combine("ordering", reports, tol or 1e-9)
    elif check == "continuity":
        r12, _ = _scan_report("continuity.12", at("boundary12"), _continuity_chunk, tol or 1e-9, grid, workers, ((1, 2),), dump)
        r23, _ = _scan_report("continuity.23", at("boundary23"), _continuity_chunk, tol or 1e-9, grid, workers, ((2, 3),), dump)
        report = _combine("continuity", [r12, r23], tol or 1e-9)
    else:
        report, _ = _scan_report("neumann", at("y_axis0"), _neumann_chunk, tol or 1e-12, grid, workers, dump=dump)
    return report


def _combine(name, reports, tol):
    worst = max(reports, key=lambda r: r.worst_violation)
    dumps = [r.dump for r in reports if r.dump]
    out = VerificationReport(
        check=name,
        total_points=sum(r.total_points for r in reports),
        worst_violation=worst.worst_violation,
        tolerance=tol,
        witness={**worst.witness, "part": worst.check},
        c=reports[0].c,
        wall_time=sum(r.wall_time for r in reports),
        subchecks=reports,
    )
    if dumps:
        out.dump = {k: np.concatenate([d[k] for d in dumps]) for k in dumps[0]}
    return out


def verify_concavity(grid: GridSpec, tol: float = 1e-9, lambda_samples: int = 41, workers: int | None = 1):
    """Constrained Hessian form of the region's own piece, at interior points of D1, D2 and D3."""
    lams = lambda_grid(lambda_samples)
    reports = []
    for region in ("D1", "D2", "D3"):
        start = time.perf_counter()
        worst, witness, direction, total = -np.inf, {}, None, 0
        for c in grid.c_values:
            g = replace(grid, c_values=(c,), region=region, interior=max(grid.interior, 1e-3))
            x, y, w, v = g.points(c)
            val, dirs = map_chunks(constrained_max_chunk, (x, y, w, v), c, lams, workers=workers)
            total += x.size
            k = int(np.argmax(val))
            if val[k] > worst:
                worst = float(val[k])
                witness = {"c": c, "x": float(x[k]), "y": float(y[k]), "w": float(w[k]), "v": float(v[k])}
                direction = tuple(float(a) for a in dirs[k])
        reports.append(VerificationReport(
            f"concavity.{region}", total, worst, tol, witness, direction,
            c=grid.c_values[0] if len(grid.c_values) == 1 else None,
            wall_time=time.perf_counter() - start,
            details={"lambda_samples": lambda_samples},
        ))
    out = _combine("concavity", reports, tol)
    out.direction = max(reports, key=lambda r: r.worst_violation).direction
    return out


def verify_kernels(c_values=(1.1, 2.0, 10.0, 100.0), n: int = 10_000, tol: float = 1e-12) -> VerificationReport:
    """Relative errors of the two kernel identities on ``n`` samples of [1, c] per c."""
    start = time.perf_counter()
    worst, witness = -np.inf, {}
    for c in c_values:
        t = np.linspace(1.0, c, n)
        p, p1, p2 = phi_all(t, c)
        id1 = np.abs((2 * p1 + t * p2) - (-1.0 / (2 * c * t))) / (1.0 / (2 * c * t))
        rhs2 = 2.0 - np.log(t) / (2 * c) - 1.0 / (2 * c)
        id2 = np.abs((p + t * p1) - rhs2) / np.abs(rhs2)
        err = np.maximum(id1, id2)
        k = int(np.argmax(err))
        if err[k] > worst:
            worst, witness = float(err[k]), {"c": c, "t": float(t[k])}
    return VerificationReport("kernels", n * len(c_values), worst, tol, witness, wall_time=time.perf_counter() - start)


def phi_derivative_sign_check(c: float, n: int = 10_000):
    """Max violations of phi in [1, 2], phi' >= 0, phi'' <= 0 on a t-grid (helper for tests/CLI)."""
    t = np.linspace(1.0, c, n)
    p = phi_all(t, c)[0]
    d1, d2 = phi_derivatives(t, c)
    return float(max(np.max(1 - p), np.max(p - 2), np.max(-d1), np.max(d2)))


def verify_derivatives(c_values=(1.5, 2.0, 4.0, 10.0), n: int = 1000, tol: float = 1e-6, seed: int = 0, h: float = 1e-5):
    """Closed-form gradient and Hessian of each piece against central differences at random interior points."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    reports = []
    for region, piece in (("D1", 1), ("D2", 2), ("D3", 3)):
        worst, witness = -np.inf, {}
        for c in c_values:
            x, y, w, v = random_points(region, n, c, rng)
            g_err, h_err = fd_errors(piece, x, y, w, v, c, h)
            err = np.maximum(g_err, h_err)
            k = int(np.argmax(err))
            if err[k] > worst:
                worst = float(err[k])
                witness = {"c": c, "x": float(x[k]), "y": float(y[k]), "w": float(w[k]), "v": float(v[k])}
        reports.append(VerificationReport(f"derivatives.{region}", n * len(c_values), worst, tol, witness,
                                          details={"step": h, "seed": seed}))
    out = _combine("derivatives", reports, tol)
    out.wall_time = time.perf_counter() - start
    return out


# --- named suites --------------------------------------------------------------

DEFAULT_C_VALUES = (1.5, 2.0, 4.0, 10.0, 100.0)
# points per axis used when no --grid is given (roughly 1e5 for pointwise scans, 1e4 for Hessian scans)
DEFAULT_GRID = {"global": 47, "concavity": 22, "forms": 21, "domain": 22}


def _grid(c_values, n):
    return GridSpec(c_values=tuple(c_values), n_angle=n, n_w=n, n_t=n)


def run_suite(name: str, c_values=DEFAULT_C_VALUES, grid: int | None = None, tol: float | None = None,
              workers: int | None = 1, seed: int = 0, dump: bool = False) -> VerificationReport:
    """Run one named suite; ``grid`` is the number of points per grid axis."""
    from . import lemmas

    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    kind = SUITES[name]
    opts = {} if tol is None else {"tol": tol}
    if kind == "global":
        return verify_global(name, _grid(c_values, grid or DEFAULT_GRID["global"]), tol, workers, dump)
    if kind == "concavity":
        return verify_concavity(_grid(c_values, grid or DEFAULT_GRID["concavity"]), workers=workers, **opts)
    if kind == "forms":
        return lemmas.verify_form_bounds(name[-1], _grid(c_values, grid or DEFAULT_GRID["forms"]), workers=workers, **opts)
    if kind == "domain":
        fn = {"domain1": lemmas.verify_domain1, "domain2": lemmas.verify_domain2, "domain3": lemmas.verify_domain3}[name]
        return fn(_grid(c_values, grid or DEFAULT_GRID["domain"]), workers=workers, **opts)
    if kind == "kernels":
        return verify_kernels(**opts)
    return verify_derivatives(tuple(c for c in c_values if c <= 10.0) or tuple(c_values), n=(grid or 10) ** 3, seed=seed, **opts)


SUITES = {
    "kernels": "kernels",
    "derivatives": "derivatives",
    **{name: "global" for name in GLOBAL_CHECKS},
    "concavity": "concavity",
    "form_a": "forms",
    "form_b": "forms",
    "form_c": "forms",
    "domain1": "domain",
    "domain2": "domain",
    "domain3": "domain",
}
