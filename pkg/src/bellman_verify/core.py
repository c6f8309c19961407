"""The four-variable Burkholder function B(x, y, w, v) and its building blocks.

Coordinates are ordered (x, y, w, v) everywhere; gradients have trailing
shape (4,) and Hessians (4, 4). Every array function broadcasts its
coordinate arguments, so grid scans evaluate millions of points at once.

Building blocks (t = w v, beta = 3/4):

    b1 = y^2 w phi(t)              b4 = c^beta |x||y| w^(1-beta) v^(-beta)
    b2 = y^2 / (2 v)               b5 = c^beta y^2 w^(1-beta) v^(-beta)
    b3 = c^2 x^2 / v               b6 = c^2 x^2 w psi(t) = c^2 x^2 psi_hat(t) / v

    U  = b1 - b2 - 320000 b3 - 294400 b6
    B1 = U + 6400 b3,  B2 = U + 320 b4,  B3 = U + 32 b5
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .kernels import BETA, DomainParams, check_t, phi_all, psi_hat_all

# coefficient vectors over (b1, ..., b6)
U_COEFFS = np.array([1.0, -1.0, -320000.0, 0.0, 0.0, -294400.0])
PIECE_COEFFS = {
    1: U_COEFFS + np.array([0.0, 0.0, 6400.0, 0.0, 0.0, 0.0]),
    2: U_COEFFS + np.array([0.0, 0.0, 0.0, 320.0, 0.0, 0.0]),
    3: U_COEFFS + np.array([0.0, 0.0, 0.0, 0.0, 32.0, 0.0]),
}

D1_THRESHOLD_FACTOR = 20.0
D3_SLOPE = 10.0


class Region(enum.IntEnum):
    ORIGIN = 0
    D1 = 1
    D2 = 2
    D3 = 3
    BOUNDARY12 = 12
    BOUNDARY23 = 23


# piece used on each region; boundaries take the piece of the lower-index side
PIECE_OF_REGION = {
    Region.ORIGIN: 3,
    Region.D1: 1,
    Region.D2: 2,
    Region.D3: 3,
    Region.BOUNDARY12: 1,
    Region.BOUNDARY23: 2,
}


@dataclass(frozen=True)
class BellmanPoint:
    x: float
    y: float
    w: float
    v: float

    @property
    def t(self) -> float:
        return self.w * self.v

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.v], dtype=float)


@dataclass(frozen=True)
class Direction:
    d: float
    e: float
    r: float
    s: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d, self.e, self.r, self.s], dtype=float)

    def is_subordinate(self, atol: float = 0.0) -> bool:
        return abs(self.e) <= abs(self.d) + atol


@dataclass(frozen=True)
class MaxPoint:
    x: float
    y: float
    z: float
    w: float
    v: float


@dataclass(frozen=True)
class BellmanEval:
    value: float
    gradient: np.ndarray = field(repr=False)
    hessian: np.ndarray = field(repr=False)
    region: Region
    piece: int
    on_boundary: bool = False
    degenerate: bool = False


def _params(params) -> DomainParams:
    return params if isinstance(params, DomainParams) else DomainParams(float(params))


def validate(x, y, w, v, c: float):
    """Broadcast and check membership in R^2 x D_c; returns clamped ``t``."""
    x, y, w, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, w, v)))
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)):
        raise DomainError("x and y must be finite")
    if np.any(~(w > 0)) or np.any(~(v > 0)):
        raise DomainError("w and v must be positive")
    t = check_t(w * v, c)
    return x, y, w, v, np.asarray(t, dtype=float)


def d1_threshold(t, c: float):
    """Slope 20c (c/t)^(1-beta) of the D1/D2 boundary |y| = slope |x|."""
    return D1_THRESHOLD_FACTOR * c * np.exp((1.0 - BETA) * np.log(c / np.asarray(t, dtype=float)))


def classify(x, y, w, v, c: float) -> np.ndarray:
    """Region codes (``Region`` values) for arrays of points."""
    x, y, w, v, t = validate(x, y, w, v, c)
    ax, ay = np.abs(x), np.abs(y)
    upper = d1_threshold(t, c) * ax
    lower = D3_SLOPE * ax
    out = np.full(x.shape, int(Region.D2), dtype=np.int64)
    out[ay > upper] = Region.D1
    out[ay == upper] = Region.BOUNDARY12
    out[ay < lower] = Region.D3
    out[ay == lower] = Region.BOUNDARY23
    out[(ax == 0) & (ay == 0)] = Region.ORIGIN
    return out


def piece_index(regions) -> np.ndarray:
    regions = np.asarray(regions)
    out = np.full(regions.shape, 3, dtype=np.int64)
    out[(regions == Region.D1) | (regions == Region.BOUNDARY12)] = 1
    out[(regions == Region.D2) | (regions == Region.BOUNDARY23)] = 2
    return out


def _weight_power(w, v):
    """w^(1-beta) v^(-beta) through logs."""
    return np.exp((1.0 - BETA) * np.log(w) - BETA * np.log(v))


def block_values(x, y, w, v, c: float) -> np.ndarray:
    """Values of b1..b6 stacked on a trailing axis of length 6."""
    x, y, w, v, t = validate(x, y, w, v, c)
    p = phi_all(t, c)[0]
    cb = c**BETA
    wp = _weight_power(w, v)
    b = np.empty(x.shape + (6,))
    b[..., 0] = y * y * w * p
    b[..., 1] = y * y / (2.0 * v)
    b[..., 2] = c * c * x * x / v
    b[..., 3] = cb * np.abs(x) * np.abs(y) * wp
    b[..., 4] = cb * y * y * wp
    b[..., 5] = c * c * x * x * w / (t * p)
    return b


def _separable(k, factors):
    """Value, gradient, Hessian of k * prod_i g_i(z_i) from per-coordinate (g, g', g'')."""
    g = [f[0] for f in factors]
    g1 = [f[1] for f in factors]
    g2 = [f[2] for f in factors]
    shape = np.broadcast(*g).shape
    val = k * g[0] * g[1] * g[2] * g[3]
    grad = np.empty(shape + (4,))
    hess = np.empty(shape + (4, 4))
    for i in range(4):
        rest = k
        for m in range(4):
            if m != i:
                rest = rest * g[m]
        grad[..., i] = g1[i] * rest
        hess[..., i, i] = g2[i] * rest
        for j in range(i + 1, 4):
            rest = k * g1[i] * g1[j]
            for m in range(4):
                if m != i and m != j:
                    rest = rest * g[m]
            hess[..., i, j] = rest
            hess[..., j, i] = rest
    return val, grad, hess


def _power(z, p):
    return (z**p, p * z ** (p - 1), p * (p - 1) * z ** (p - 2))


def block_derivatives(i: int, x, y, w, v, c: float):
    """Closed-form (value, gradient, Hessian) of the block b_i, i in 1..6."""
    if i not in range(1, 7):
        raise IndexError(f"building block index must be in 1..6, got {i}")
    x, y, w, v, t = validate(x, y, w, v, c)
    one = (np.ones_like(x), np.zeros_like(x), np.zeros_like(x))
    sq = lambda z: (z * z, 2.0 * z, np.full_like(z, 2.0))  # noqa: E731
    absf = lambda z: (np.abs(z), np.sign(z), np.zeros_like(z))  # noqa: E731
    cb = c**BETA
    if i == 2:
        return _separable(0.5, [one, sq(y), one, _power(v, -1.0)])
    if i == 3:
        return _separable(c * c, [sq(x), one, one, _power(v, -1.0)])
    if i == 4:
        return _separable(cb, [absf(x), absf(y), _power(w, 1.0 - BETA), _power(v, -BETA)])
    if i == 5:
        return _separable(cb, [one, sq(y), _power(w, 1.0 - BETA), _power(v, -BETA)])

    grad = np.zeros(x.shape + (4,))
    hess = np.zeros(x.shape + (4, 4))
    if i == 1:
        p, p1, p2 = phi_all(t, c)
        y2 = y * y
        val = y2 * w * p
        grad[..., 1] = 2.0 * y * w * p
        grad[..., 2] = y2 * (p + t * p1)
        grad[..., 3] = y2 * w * w * p1
        h = {
            (1, 1): 2.0 * w * p,
            (1, 2): 2.0 * y * (p + t * p1),
            (1, 3): 2.0 * y * w * w * p1,
            (2, 2): y2 * v * (2.0 * p1 + t * p2),
            (2, 3): y2 * w * (2.0 * p1 + t * p2),
            (3, 3): y2 * w**3 * p2,
        }
    else:
        h0, h1, h2 = psi_hat_all(t, c)
        k = c * c
        x2 = x * x
        val = k * x2 * h0 / v
        grad[..., 0] = 2.0 * k * x * h0 / v
        grad[..., 2] = k * x2 * h1
        grad[..., 3] = k * x2 * (h1 * w / v - h0 / v**2)
        h = {
            (0, 0): 2.0 * k * h0 / v,
            (0, 2): 2.0 * k * x * h1,
            (0, 3): 2.0 * k * x * (h1 * w / v - h0 / v**2),
            (2, 2): k * x2 * v * h2,
            (2, 3): k * x2 * w * h2,
            (3, 3): k * x2 * (w * w * h2 / v - 2.0 * w * h1 / v**2 + 2.0 * h0 / v**3),
        }
    for (a, b), val_ab in h.items():
        hess[..., a, b] = val_ab
        hess[..., b, a] = val_ab
    return val, grad, hess


def combo_derivatives(coeffs, x, y, w, v, c: float):
    """(value, gradient, Hessian) of sum_i coeffs[i] b_{i+1}; zero coefficients are skipped."""
    coeffs = np.asarray(coeffs, dtype=float)
    x, y, w, v, _ = validate(x, y, w, v, c)
    val = np.zeros(x.shape)
    grad = np.zeros(x.shape + (4,))
    hess = np.zeros(x.shape + (4, 4))
    for i in range(6):
        if coeffs[..., i].any() if coeffs.ndim > 1 else coeffs[i] != 0.0:
            ci = coeffs[..., i]
            bv, bg, bh = block_derivatives(i + 1, x, y, w, v, c)
            val = val + ci * bv
            grad = grad + np.asarray(ci)[..., None] * bg
            hess = hess + np.asarray(ci)[..., None, None] * bh
    return val, grad, hess


def piece_values(piece: int, x, y, w, v, c: float) -> np.ndarray:
    return block_values(x, y, w, v, c) @ PIECE_COEFFS[piece]


def piece_derivatives(piece: int, x, y, w, v, c: float):
    return combo_derivatives(PIECE_COEFFS[piece], x, y, w, v, c)


def bellman_value(x, y, w, v, c: float) -> np.ndarray:
    """B evaluated piecewise by region (vectorized)."""
    blocks = block_values(x, y, w, v, c)
    pieces = piece_index(classify(x, y, w, v, c))
    table = np.stack([PIECE_COEFFS[k] for k in (1, 2, 3)])
    return np.einsum("...i,...i->...", blocks, table[pieces - 1])


def bellman_derivatives(x, y, w, v, c: float):
    """(value, gradient, Hessian, region) of B, each from the region's own piece."""
    regions = classify(x, y, w, v, c)
    table = np.stack([PIECE_COEFFS[k] for k in (1, 2, 3)])
    coeffs = table[piece_index(regions) - 1]
    val, grad, hess = combo_derivatives(coeffs, x, y, w, v, c)
    origin = regions == Region.ORIGIN
    if np.any(origin):
        grad[origin] = 0.0
    return val, grad, hess, regions


def majorant(x, y, w, v, c: float) -> np.ndarray:
    """G = kappa (y^2 w - C^2 c^2 x^2 / v) with kappa = 1/2, C^2 = 1228800."""
    x, y, w, v, _ = validate(x, y, w, v, c)
    return 0.5 * (y * y * w - 1228800.0 * c * c * x * x / v)


def hessian_scale(x, y, w, v, c: float):
    """Tolerance scale (1 + x^2 + y^2) w max(1, c^2/v) used by every sign check."""
    return (1.0 + x * x + y * y) * w * np.maximum(1.0, c * c / v)


def value_scale(x, y, w):
    return (1.0 + x * x + y * y) * w


# --- scalar API ----------------------------------------------------------


def classify_region(p: BellmanPoint, params) -> Region:
    c = _params(params).c
    return Region(int(classify(p.x, p.y, p.w, p.v, c)))


def eval_b(i: int, p: BellmanPoint, params) -> float:
    if i not in range(1, 7):
        raise IndexError(f"building block index must be in 1..6, got {i}")
    c = _params(params).c
    return float(block_values(p.x, p.y, p.w, p.v, c)[i - 1])


def eval_U(p: BellmanPoint, params) -> float:
    c = _params(params).c
    return float(block_values(p.x, p.y, p.w, p.v, c) @ U_COEFFS)


def eval_B(p: BellmanPoint, params) -> BellmanEval:
    c = _params(params).c
    region = classify_region(p, c)
    piece = PIECE_OF_REGION[region]
    val, grad, hess = piece_derivatives(piece, p.x, p.y, p.w, p.v, c)
    degenerate = region == Region.ORIGIN
    if degenerate:
        val, grad = 0.0, np.zeros(4)
    return BellmanEval(
        value=float(val),
        gradient=np.array(grad, dtype=float),
        hessian=np.array(hess, dtype=float),
        region=region,
        piece=piece,
        on_boundary=region in (Region.BOUNDARY12, Region.BOUNDARY23),
        degenerate=degenerate,
    )


def eval_G(p: BellmanPoint, params) -> float:
    c = _params(params).c
    return float(majorant(p.x, p.y, p.w, p.v, c))


def directional_second_derivative(p: BellmanPoint, direction: Direction, params, coeffs=None) -> float:
    """<D^2 F(p) dir, dir> for F the region's piece, or the block combination ``coeffs``."""
    c = _params(params).c
    if coeffs is None:
        hess = eval_B(p, c).hessian
    else:
        hess = combo_derivatives(coeffs, p.x, p.y, p.w, p.v, c)[2]
    u = direction.as_array()
    return float(u @ hess @ u)


def eval_B_maximal(p: MaxPoint, params) -> float:
    """Maximal extension B(x, y - z, w, v) on {y <= z}."""
    if p.y > p.z:
        raise PreconditionError(f"maximal extension needs y <= z, got y={p.y}, z={p.z}")
    return eval_B(BellmanPoint(p.x, p.y - p.z, p.w, p.v), params).value


def maximal_z_derivative(p: MaxPoint, params) -> float:
    """d/dz of B(x, y - z, w, v), i.e. -B_y at the shifted point."""
    if p.y > p.z:
        raise PreconditionError(f"maximal extension needs y <= z, got y={p.y}, z={p.z}")
    return -float(eval_B(BellmanPoint(p.x, p.y - p.z, p.w, p.v), params).gradient[1])


@dataclass(frozen=True)
class FDReport:
    gradient_error: float
    hessian_error: float
    region: Region
    h: float

    @property
    def max_error(self) -> float:
        return max(self.gradient_error, self.hessian_error)


def coordinate_steps(x, y, w, v, h):
    """Per-coordinate steps: h*|(x, y)| for x and y, h*w and h*v for the weights."""
    r = np.hypot(x, y)
    return np.stack(np.broadcast_arrays(h * r, h * r, h * w, h * v), axis=-1)


def fd_errors(piece: int, x, y, w, v, c: float, h: float = 1e-5):
    """Scale-free discrepancies between closed-form and central-difference derivatives.

    The gradient is compared with central differences of the piece value, the
    Hessian with central differences of the closed-form gradient. Both are
    measured in the coordinates z_i / step_i so that entries are commensurate.
    Returns (gradient_error, hessian_error) arrays.
    """
    x, y, w, v, _ = validate(x, y, w, v, c)
    z = np.stack([x, y, w, v], axis=-1)
    steps = coordinate_steps(x, y, w, v, h)
    scale = steps / h
    val, grad, hess = piece_derivatives(piece, x, y, w, v, c)
    fd_grad = np.empty_like(grad)
    fd_hess = np.empty_like(hess)
    for i in range(4):
        dz = np.zeros_like(z)
        dz[..., i] = steps[..., i]
        zp, zm = z + dz, z - dz
        vp, gp, _ = piece_derivatives(piece, *np.moveaxis(zp, -1, 0), c)
        vm, gm, _ = piece_derivatives(piece, *np.moveaxis(zm, -1, 0), c)
        fd_grad[..., i] = (vp - vm) / (2.0 * steps[..., i])
        fd_hess[..., :, i] = (gp - gm) / (2.0 * steps[..., i][..., None])
    fd_hess = 0.5 * (fd_hess + np.swapaxes(fd_hess, -1, -2))
    sg = scale
    sh = scale[..., :, None] * scale[..., None, :]
    g_ref = np.max(np.abs(grad * sg), axis=-1)
    h_ref = np.max(np.abs(hess * sh), axis=(-2, -1))
    g_err = np.max(np.abs((fd_grad - grad) * sg), axis=-1) / np.maximum(g_ref, np.finfo(float).tiny)
    h_err = np.max(np.abs((fd_hess - hess) * sh), axis=(-2, -1)) / np.maximum(h_ref, np.finfo(float).tiny)
    return g_err, h_err


def fd_check(p: BellmanPoint, params, h: float = 1e-5) -> FDReport:
    """Compare closed-form derivatives of the piece at ``p`` with central differences.

    Every stencil point (offsets up to 10 steps) must stay in the same region
    and inside D_c; otherwise PreconditionError is raised.
    """
    c = _params(params).c
    region = classify_region(p, c)
    if region not in (Region.D1, Region.D2, Region.D3):
        raise PreconditionError(f"finite-difference check needs an interior point, got {region.name}")
    steps = coordinate_steps(p.x, p.y, p.w, p.v, h)
    z = p.as_array()
    for i in range(4):
        for sign in (-10.0, 10.0):
            q = z.copy()
            q[i] += sign * steps[i]
            if not (1.0 <= q[2] * q[3] <= c) or q[2] <= 0 or q[3] <= 0:
                raise PreconditionError("finite-difference stencil leaves D_c")
            if int(classify(*q, c)) != region:
                raise PreconditionError("finite-difference stencil crosses a region boundary")
    g_err, h_err = fd_errors(PIECE_OF_REGION[region], p.x, p.y, p.w, p.v, c, h)
    return FDReport(float(g_err), float(h_err), region, h)
