"""Hessian quadratic forms restricted to subordinate directions |e| <= |d|.

Every subordinate direction is (d, lam*d, r, s) with lam in [-1, 1] (d = 0
forces e = 0, which any lam covers). For fixed lam the form is a quadratic
form in (d, r, s) with matrix M_lam^T H M_lam; the constrained maximum of the
form over unit (d, r, s) is the largest eigenvalue, maximized over lam.
"""

from __future__ import annotations

import numpy as np

from .core import (
    BellmanPoint,
    Direction,
    PIECE_COEFFS,
    classify,
    combo_derivatives,
    hessian_scale,
    piece_index,
)
from .kernels import DomainParams


def lambda_grid(samples: int) -> np.ndarray:
    """``samples`` equispaced values in [-1, 1], endpoints included."""
    if samples < 2:
        raise ValueError("need at least the two endpoints lam = -1, 1")
    return np.linspace(-1.0, 1.0, samples)


def embedding(lams) -> np.ndarray:
    """Matrices M_lam (L, 4, 3) mapping (d, r, s) to (d, lam d, r, s)."""
    lams = np.asarray(lams, dtype=float)
    m = np.zeros(lams.shape + (4, 3))
    m[..., 0, 0] = 1.0
    m[..., 1, 0] = lams
    m[..., 2, 1] = 1.0
    m[..., 3, 2] = 1.0
    return m


def reduced_matrices(hess: np.ndarray, lams) -> np.ndarray:
    """(..., L, 3, 3) stack of M_lam^T H M_lam."""
    m = embedding(lams)
    return np.einsum("lia,...ij,ljb->...lab", m, hess, m)


def constrained_max_batch(hess: np.ndarray, lams):
    """Largest constrained form value and a maximizing unit direction (d, e, r, s) per Hessian."""
    red = reduced_matrices(hess, lams)
    vals, vecs = np.linalg.eigh(red)
    top = vals[..., -1]
    best = np.argmax(top, axis=-1)
    value = np.take_along_axis(top, best[..., None], axis=-1)[..., 0]
    vec = np.take_along_axis(vecs[..., :, -1], best[..., None, None], axis=-2)[..., 0, :]
    lam = np.asarray(lams)[best]
    direction = np.stack([vec[..., 0], lam * vec[..., 0], vec[..., 1], vec[..., 2]], axis=-1)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return value, direction


def region_hessians(x, y, w, v, c, coeffs=None):
    if coeffs is None:
        table = np.stack([PIECE_COEFFS[k] for k in (1, 2, 3)])
        coeffs = table[piece_index(classify(x, y, w, v, c)) - 1]
    return combo_derivatives(coeffs, x, y, w, v, c)[2]


def constrained_max_chunk(x, y, w, v, c, lams, coeffs=None):
    """Scale-normalized constrained maxima for a chunk of points (worker entry point)."""
    hess = region_hessians(x, y, w, v, c, coeffs)
    value, direction = constrained_max_batch(hess, lams)
    return value / hessian_scale(x, y, w, v, c), direction


def constrained_max_form(p: BellmanPoint, params, lambda_samples: int = 41, coeffs=None):
    """Maximum of <D^2 F(p) u, u> over unit u = (d, lam d, r, s) / |(d, r, s)|, lam sampled in [-1, 1].

    ``F`` is the piece of B for the region of ``p`` unless ``coeffs`` selects a
    combination of the building blocks. Returns (value, Direction).
    """
    c = params.c if isinstance(params, DomainParams) else DomainParams(float(params)).c
    hess = region_hessians(p.x, p.y, p.w, p.v, c, coeffs)
    value, direction = constrained_max_batch(hess, lambda_grid(lambda_samples))
    return float(value), Direction(*(float(a) for a in direction))
