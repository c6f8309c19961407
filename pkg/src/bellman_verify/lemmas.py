"""Matrix lemmas behind the concavity of B, checked on grids and in exact arithmetic.

Float matrices are built in batches (trailing shape (3, 3)); the constant
matrices of the D2/D3 arguments are built exactly with ``Fraction`` entries
at beta = 3/4.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .concavity import constrained_max_chunk, lambda_grid
from .core import block_derivatives, combo_derivatives, hessian_scale
from .grids import GridSpec
from .kernels import check_t, phi_all, psi_hat_all
from .linalg import (
    SymmetricMatrix,
    batch_max_eigenvalue,
    batch_nonpositive_sylvester,
    det_exact,
    diagonal_normalize,
    exact_polynomial_coefficients,
    is_nonpositive_definite_exact,
    leading_minors,
)
from .parallel import map_chunks
from .report import VerificationReport

BETA_EXACT = Fraction(3, 4)

# block combinations handled by the three domain lemmas
DOMAIN1_COEFFS = np.array([1.0, -1.0, -160.0, 0.0, 0.0, 0.0])
DOMAIN2_COEFFS = np.array([1.0, 0.0, -320000.0, 320.0, 0.0, 0.0])
DOMAIN3_COEFFS = np.array([1.0, 0.0, -4600.0, 0.0, 32.0, -294400.0])

YWV = [1, 2, 3]
XWV = [0, 2, 3]


# --- exact constant matrices ------------------------------------------------


def matrix_A1(beta=BETA_EXACT) -> SymmetricMatrix:
    """Form of b4 in relative coordinates (E, D, R, S), divided by b4."""
    b = beta
    return SymmetricMatrix.from_rows([
        [0, 1, 1 - b, -b],
        [1, 0, 1 - b, -b],
        [1 - b, 1 - b, b * (b - 1), b * (b - 1)],
        [-b, -b, b * (b - 1), b * (b + 1)],
    ])


def matrix_A2() -> SymmetricMatrix:
    """Form of b3 in (D, S), divided by b3."""
    return SymmetricMatrix.from_rows([[2, -2], [-2, 2]])


def matrix_A3(lam, beta=BETA_EXACT) -> SymmetricMatrix:
    b = beta
    return SymmetricMatrix.from_rows([
        [2 * lam, (1 - b) * (1 + lam), -b * (1 + lam)],
        [(1 - b) * (1 + lam), b * (b - 1), b * (b - 1)],
        [-b * (1 + lam), b * (b - 1), b * (b + 1)],
    ])


def matrix_A4() -> SymmetricMatrix:
    return SymmetricMatrix.from_rows([[2, 0, -2], [0, 0, 0], [-2, 0, 2]])


def matrix_A5(beta=BETA_EXACT) -> SymmetricMatrix:
    """Form of b5 in (E, R, S), divided by (c/t)^beta y^2 w."""
    b = beta
    return SymmetricMatrix.from_rows([
        [2, 2 * (1 - b), -2 * b],
        [2 * (1 - b), b * (b - 1), b * (b - 1)],
        [-2 * b, b * (b - 1), b * (b + 1)],
    ])


def domain2_test_matrix(lam, sign: int) -> SymmetricMatrix:
    """A3 - 50 A4 + (1/20) e1 e1^T +- (1/40)(e1 e2^T + e2 e1^T), entries as printed."""
    lam = Fraction(lam)
    off = Fraction(1, 4) * (1 + lam) + sign * Fraction(1, 40)
    corner = -Fraction(3, 4) * (1 + lam) + 100
    return SymmetricMatrix.from_rows([
        [2 * lam - 100 + Fraction(1, 20), off, corner],
        [off, Fraction(-3, 16), Fraction(-3, 16)],
        [corner, Fraction(-3, 16), Fraction(21, 16) - 100],
    ])


def domain3_dominating(sign: int) -> SymmetricMatrix:
    k = Fraction(1, 16)
    return SymmetricMatrix.from_rows([[192 * k, sign * 2 * k, 0], [sign * 2 * k, 0, 0], [0, 0, 46 * k]])


def domain3_difference(sign: int) -> SymmetricMatrix:
    """A5 minus its dominating matrix; nonpositive-definite when the bound holds."""
    return matrix_A5() - domain3_dominating(sign)


def reduce_A1(lam) -> SymmetricMatrix:
    """M^T A1 M for the substitution E = lam D, as an exact 3x3 matrix in (D, R, S)."""
    a = matrix_A1().rows()
    m = [[lam, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    out = [[sum(m[i][p] * a[i][j] * m[j][q] for i in range(4) for j in range(4)) for q in range(3)] for p in range(3)]
    return SymmetricMatrix.from_rows(out)


# --- float matrices for the b1 and b6 form estimates ------------------------


def _kernel_parts(w, v, c):
    w, v = np.broadcast_arrays(np.asarray(w, dtype=float), np.asarray(v, dtype=float))
    t = np.asarray(check_t(w * v, c), dtype=float)
    return w, v, t


def matrix_A_batch(y, w, v, c: float) -> np.ndarray:
    """Hessian of b1 in (y, w, v) minus 80 c w in the (y, y) slot."""
    y, w, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (y, w, v)))
    w, v, t = _kernel_parts(w, v, c)
    p, p1, p2 = phi_all(t, c)
    y2 = y * y
    m = np.empty(y.shape + (3, 3))
    m[..., 0, 0] = 2 * w * p - 80 * c * w
    m[..., 0, 1] = m[..., 1, 0] = 2 * y * p + 2 * y * t * p1
    m[..., 0, 2] = m[..., 2, 0] = 2 * y * w * w * p1
    m[..., 1, 1] = 2 * y2 * v * p1 + y2 * t * v * p2
    m[..., 1, 2] = m[..., 2, 1] = 2 * y2 * w * p1 + y2 * t * w * p2
    m[..., 2, 2] = y2 * w**3 * p2
    return m


def matrix_B_batch(y, w, v, c: float) -> np.ndarray:
    m = matrix_A_batch(y, w, v, c)
    w, v, t = _kernel_parts(*np.broadcast_arrays(w, v), c)
    p = phi_all(t, c)[0]
    m[..., 0, 0] = 2 * w * p - 4 * w
    m[..., 0, 1] = m[..., 1, 0] = 0.0
    return m


def matrix_C_batch(x, w, v, c: float) -> np.ndarray:
    """psi_hat form of the b6 Hessian in (x, w, v) minus (1/16) c v^-3 x^2 in the (v, v) slot."""
    x, w, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, w, v)))
    w, v, t = _kernel_parts(w, v, c)
    h, h1, h2 = psi_hat_all(t, c)
    c2, x2 = c * c, x * x
    m = np.empty(x.shape + (3, 3))
    m[..., 0, 0] = 2 * c2 * h / v
    m[..., 0, 1] = m[..., 1, 0] = 2 * c2 * x * h1
    m[..., 0, 2] = m[..., 2, 0] = 2 * x * c2 * (h1 * w / v - h / v**2)
    m[..., 1, 1] = c2 * v * x2 * h2
    m[..., 1, 2] = m[..., 2, 1] = c2 * w * x2 * h2
    m[..., 2, 2] = x2 * c2 * (2 * h / v**3 - 2 * w * h1 / v**2 + w * w * h2 / v) - c * x2 / (16 * v**3)
    return m


def matrix_C_psi_form_batch(x, w, v, c: float) -> np.ndarray:
    """The same matrix written with psi = psi_hat / t (first printed form)."""
    x, w, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, w, v)))
    w, v, t = _kernel_parts(w, v, c)
    h, h1, h2 = psi_hat_all(t, c)
    ps = h / t
    ps1 = h1 / t - h / t**2
    ps2 = h2 / t - 2 * h1 / t**2 + 2 * h / t**3
    c2, x2 = c * c, x * x
    m = np.empty(x.shape + (3, 3))
    m[..., 0, 0] = 2 * c2 * w * ps
    m[..., 0, 1] = m[..., 1, 0] = 2 * x * c2 * (ps + t * ps1)
    m[..., 0, 2] = m[..., 2, 0] = 2 * x * c2 * w * w * ps1
    m[..., 1, 1] = x2 * c2 * (2 * v * ps1 + w * v * v * ps2)
    m[..., 1, 2] = m[..., 2, 1] = x2 * c2 * (2 * w * ps1 + w * w * v * ps2)
    m[..., 2, 2] = x2 * c2 * w**3 * ps2 - c * x2 / (16 * v**3)
    return m


def _symmetric(m: np.ndarray) -> SymmetricMatrix:
    return SymmetricMatrix.from_rows(m.tolist())


def build_matrix_A(y, w, v, params) -> SymmetricMatrix:
    return _symmetric(matrix_A_batch(y, w, v, _c(params)))


def build_matrix_B(y, w, v, params) -> SymmetricMatrix:
    return _symmetric(matrix_B_batch(y, w, v, _c(params)))


def build_matrix_C(x, w, v, params) -> SymmetricMatrix:
    return _symmetric(matrix_C_batch(x, w, v, _c(params)))


def _c(params) -> float:
    return float(getattr(params, "c", params))


# --- grid checks --------------------------------------------------------------


def definiteness_violations(mats: np.ndarray, sign: int = -1):
    """Signed violations of sign*M being nonpositive-definite, by eigenvalues and by Sylvester.

    ``sign=-1`` tests M <= 0, ``sign=+1`` tests M >= 0. Both numbers are
    computed on the diagonally normalized matrix, so they are scale free.
    """
    a = diagonal_normalize(mats if sign < 0 else -mats)
    return batch_max_eigenvalue(a), batch_nonpositive_sylvester(a, 0.0)


def _lemma_chunk(s, w, v, c, part):
    if part == "a":
        mats = matrix_A_batch(s, w, v, c)
        eig, syl = definiteness_violations(mats, -1)
        hb = block_derivatives(1, 0.0, s, w, v, c)[2][..., YWV, :][..., :, YWV]
        hb[..., 0, 0] -= 80 * c * w
        cons = np.max(np.abs(hb - mats), axis=(-2, -1)) / np.maximum(np.max(np.abs(mats), axis=(-2, -1)), 1e-300)
        extra = np.zeros_like(eig)
    elif part == "b":
        mats = matrix_B_batch(s, w, v, c)
        eig, syl = definiteness_violations(mats, -1)
        t = w * v
        p, p1, _ = phi_all(np.asarray(check_t(t, c)), c)
        hb = block_derivatives(1, 0.0, s, w, v, c)[2][..., YWV, :][..., :, YWV]
        rest = hb - mats
        expect = np.zeros_like(rest)
        expect[..., 0, 0] = 4 * w
        expect[..., 0, 1] = expect[..., 1, 0] = 2 * s * (p + t * p1)
        cons = np.max(np.abs(rest - expect), axis=(-2, -1)) / np.max(np.abs(hb), axis=(-2, -1))
        extra = (p + t * p1) - 2.0  # cross-term bound 4|y|(phi + t phi') <= 8|y|
    else:
        mats = matrix_C_batch(s, w, v, c)
        eig, syl = definiteness_violations(mats, +1)
        hb = block_derivatives(6, s, 0.0, w, v, c)[2][..., XWV, :][..., :, XWV]
        hb[..., 2, 2] -= c * s * s / (16 * v**3)
        alt = matrix_C_psi_form_batch(s, w, v, c)
        ref = np.maximum(np.max(np.abs(mats), axis=(-2, -1)), 1e-300)
        cons = np.maximum(np.max(np.abs(hb - mats), axis=(-2, -1)), np.max(np.abs(alt - mats), axis=(-2, -1))) / ref
        extra = np.zeros_like(eig)
    return eig, syl, cons, extra


def verify_form_bounds(part: str, grid: GridSpec, tol: float = 1e-9, workers: int | None = 1) -> VerificationReport:
    """Grid certification of the quadratic-form estimates for b1 (parts a, b) and b6 (part c)."""
    if part not in ("a", "b", "c"):
        raise ValueError("part must be 'a', 'b' or 'c'")
    start = time.perf_counter()
    worst = (-np.inf, None)
    worst_syl = -np.inf
    disagree = 0
    cons_worst = 0.0
    extra_worst = -np.inf
    total = 0
    for c in grid.c_values:
        s, w, v = grid.coordinate_grid(c)
        eig, syl, cons, extra = map_chunks(_lemma_chunk, (s, w, v), c, part, workers=workers)
        total += s.size
        k = int(np.argmax(eig))
        if eig[k] > worst[0]:
            worst = (float(eig[k]), {"c": c, "coord": float(s[k]), "w": float(w[k]), "v": float(v[k])})
        worst_syl = max(worst_syl, float(np.max(syl)))
        disagree += int(np.sum((eig <= tol) != (syl <= tol)))
        cons_worst = max(cons_worst, float(np.max(cons)))
        extra_worst = max(extra_worst, float(np.max(extra)))
    label = {"a": "nonpositive", "b": "nonpositive", "c": "nonnegative"}[part]
    subs = [
        VerificationReport(f"form_{part}.sylvester", total, worst_syl, tol),
        VerificationReport(f"form_{part}.agreement", total, float(disagree), 0.0),
        VerificationReport(f"form_{part}.hessian_consistency", total, cons_worst, 1e-9),
    ]
    if part == "b":
        subs.append(VerificationReport("form_b.cross_term_bound", total, extra_worst, tol))
    return VerificationReport(
        check=f"form_{part}",
        total_points=total,
        worst_violation=worst[0],
        tolerance=tol,
        witness=worst[1] or {},
        c=grid.c_values[0] if len(grid.c_values) == 1 else None,
        wall_time=time.perf_counter() - start,
        details={"definiteness": label, "method": "eigenvalues of diagonally normalized matrix"},
        subchecks=subs,
    )


def _constrained_scan(name, coeffs, grid: GridSpec, region: str, tol, lambda_samples, workers):
    start = time.perf_counter()
    lams = lambda_grid(lambda_samples)
    worst, witness, direction, total = -np.inf, {}, None, 0
    for c in grid.c_values:
        g = GridSpec(**{**grid.__dict__, "c_values": (c,), "region": region})
        x, y, w, v = g.points(c)
        keep = (x != 0) & (y != 0) if region == "D2" else np.ones(x.shape, bool)
        x, y, w, v = x[keep], y[keep], w[keep], v[keep]
        val, dirs = map_chunks(constrained_max_chunk, (x, y, w, v), c, lams, coeffs, workers=workers)
        total += x.size
        k = int(np.argmax(val))
        if val[k] > worst:
            worst = float(val[k])
            witness = {"c": c, "x": float(x[k]), "y": float(y[k]), "w": float(w[k]), "v": float(v[k])}
            direction = tuple(float(a) for a in dirs[k])
    return VerificationReport(
        check=name,
        total_points=total,
        worst_violation=worst,
        tolerance=tol,
        witness=witness,
        direction=direction,
        c=grid.c_values[0] if len(grid.c_values) == 1 else None,
        wall_time=time.perf_counter() - start,
        details={"lambda_samples": lambda_samples, "region": region},
    )


def verify_domain1(grid: GridSpec, tol: float = 1e-9, lambda_samples: int = 41, workers: int | None = 1):
    """Constrained form of b1 - b2 - 160 b3 is nonpositive on D1."""
    return _constrained_scan("domain1", DOMAIN1_COEFFS, grid, "D1", tol, lambda_samples, workers)


def _exact_report(name, matrices: dict) -> VerificationReport:
    """One subcheck per exact matrix: violation 0 if nonpositive-definite, 1 otherwise."""
    certs = {}
    bad = 0
    for key, m in matrices.items():
        ok = is_nonpositive_definite_exact(m)
        bad += not ok
        certs[key] = {"leading_minors": [str(d) for d in leading_minors(m)], "nonpositive_definite": ok}
    return VerificationReport(name, len(matrices), float(bad), 0.0, details={"certificates": certs})


def domain2_exact(lambda_samples: int = 41) -> list[VerificationReport]:
    """Exact parts of the D2 argument at beta = 3/4."""
    tenth = Fraction(1, 10)
    endpoints = {f"lam={lam},sign={'+' if s > 0 else '-'}": domain2_test_matrix(lam, s) for lam in (-tenth, tenth) for s in (1, -1)}
    scan = {}
    for k in range(lambda_samples):
        lam = -tenth + Fraction(2 * k, 10 * (lambda_samples - 1))
        for s in (1, -1):
            scan[f"lam={lam},sign={'+' if s > 0 else '-'}"] = domain2_test_matrix(lam, s)
    lam_scan = _exact_report("domain2.lambda_scan", scan)
    lam_scan.details = {"samples": len(scan)}

    # structural identities: A3 is the lam-reduction of A1, and the test matrix is A3 - 50 A4 + shifts
    mismatch = 0
    for k in range(lambda_samples):
        lam = -tenth + Fraction(2 * k, 10 * (lambda_samples - 1))
        if reduce_A1(lam).upper != matrix_A3(lam).upper:
            mismatch += 1
        base = matrix_A3(lam) - matrix_A4().scaled(50)
        for s in (1, -1):
            shift = SymmetricMatrix.from_rows([[Fraction(1, 20), s * Fraction(1, 40), 0], [s * Fraction(1, 40), 0, 0], [0, 0, 0]])
            if (base + shift).upper != domain2_test_matrix(lam, s).upper:
                mismatch += 1
    identities = VerificationReport("domain2.identities", lambda_samples, float(mismatch), 0.0)

    # convexity of det in lam: det is a polynomial of degree <= 3 with exact coefficients
    convex_bad = 0
    polys = {}
    for s in (1, -1):
        coeffs = exact_polynomial_coefficients(lambda lam: det_exact(domain2_test_matrix(lam, s).rows()), 3)
        polys["+" if s > 0 else "-"] = [str(a) for a in coeffs]
        second = lambda lam: 2 * coeffs[2] + 6 * coeffs[3] * lam  # noqa: E731
        convex_bad += (second(-tenth) < 0) + (second(tenth) < 0)
    lam_f = np.linspace(-0.1, 0.1, 201)
    worst_dd = -np.inf
    for s in (1, -1):
        dets = np.array([np.linalg.det(domain2_test_matrix(Fraction(float(l)), s).to_array()) for l in lam_f])
        dd = dets[:-2] - 2 * dets[1:-1] + dets[2:]
        worst_dd = max(worst_dd, float(np.max(-dd)))
    convex = VerificationReport(
        "domain2.det_convexity", 2, float(convex_bad), 0.0,
        details={"det_polynomial_coefficients": polys, "numeric_worst_negative_second_difference": worst_dd},
        subchecks=[VerificationReport("domain2.det_convexity_numeric", lam_f.size, worst_dd, 1e-9)],
    )
    return [_exact_report("domain2.exact_endpoints", endpoints), lam_scan, identities, convex]


def _b4_vs_b3_chunk(x, y, w, v, c):
    b4 = block_derivatives(4, x, y, w, v, c)[0]
    b3 = block_derivatives(3, x, y, w, v, c)[0]
    return ((50 * b4 - 1000 * b3) / hessian_scale(x, y, w, v, c),)


def verify_domain2(grid: GridSpec, tol: float = 1e-9, lambda_samples: int = 41, workers: int | None = 1):
    """D2 lemma: exact matrix certificates, determinant convexity and the end-to-end constrained form."""
    report = _constrained_scan("domain2", DOMAIN2_COEFFS, grid, "D2", tol, lambda_samples, workers)
    subs = domain2_exact(lambda_samples)
    worst = -np.inf
    total = 0
    for c in grid.c_values:
        g = GridSpec(**{**grid.__dict__, "c_values": (c,), "region": "D2"})
        x, y, w, v = g.points(c)
        (viol,) = map_chunks(_b4_vs_b3_chunk, (x, y, w, v), c, workers=workers)
        worst = max(worst, float(np.max(viol)))
        total += x.size
    subs.append(VerificationReport("domain2.b3_dominates_b4", total, worst, tol))
    report.subchecks = subs
    return report


def domain3_exact() -> VerificationReport:
    return _exact_report("domain3.exact_difference", {f"sign={'+' if s > 0 else '-'}": domain3_difference(s) for s in (1, -1)})


def _partial_ineq_chunk(x, y, w, v, c):
    """Lower bound of the (2300/16)(b3 + 64 b6) Hessian on (x, w, v) by (c/t)(w/16) diag(2300, 0, 46 y^2/v^2)."""
    h = combo_derivatives(np.array([0, 0, 2300 / 16, 0, 0, 64 * 2300 / 16]), x, y, w, v, c)[2]
    q = h[..., XWV, :][..., :, XWV].copy()
    k = (c / (w * v)) * w / 16.0
    q[..., 0, 0] -= k * 2300.0
    q[..., 2, 2] -= k * 46.0 * y * y / v**2
    min_eig = np.linalg.eigvalsh(q)[..., 0]
    return (-min_eig / hessian_scale(x, y, w, v, c),)


def verify_domain3(grid: GridSpec, tol: float = 1e-9, lambda_samples: int = 41, workers: int | None = 1):
    """D3 lemma: exact A5 bound, the b3 + 64 b6 lower bound, and the end-to-end constrained form."""
    report = _constrained_scan("domain3", DOMAIN3_COEFFS, grid, "D3", tol, lambda_samples, workers)
    worst, total = -np.inf, 0
    for c in grid.c_values:
        g = GridSpec(**{**grid.__dict__, "c_values": (c,), "region": "D3"})
        x, y, w, v = g.points(c)
        (viol,) = map_chunks(_partial_ineq_chunk, (x, y, w, v), c, workers=workers)
        worst = max(worst, float(np.max(viol)))
        total += x.size
    report.subchecks = [domain3_exact(), VerificationReport("domain3.partial_inequality", total, worst, tol)]
    return report
