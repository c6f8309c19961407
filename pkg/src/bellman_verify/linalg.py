"""Small symmetric matrices: Sylvester minors (exact or float) and eigenvalue tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SymmetricMatrix:
    """Symmetric matrix of order 2..4 stored as its upper triangle (row-major).

    Entries may be floats or ``Fraction``; exact minors are available when all
    entries are rational.
    """

    order: int
    upper: tuple

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "SymmetricMatrix":
        n = len(rows)
        for i in range(n):
            if len(rows[i]) != n:
                raise ValueError("matrix must be square")
            for j in range(i + 1, n):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"matrix is not symmetric at ({i}, {j})")
        return cls(n, tuple(rows[i][j] for i in range(n) for j in range(i, n)))

    def __getitem__(self, ij):
        i, j = ij
        if i > j:
            i, j = j, i
        n = self.order
        return self.upper[i * n - i * (i - 1) // 2 + (j - i)]

    def rows(self) -> list[list]:
        return [[self[i, j] for j in range(self.order)] for i in range(self.order)]

    def to_array(self) -> np.ndarray:
        return np.array([[float(a) for a in row] for row in self.rows()])

    @property
    def is_exact(self) -> bool:
        return all(isinstance(a, (int, Fraction)) for a in self.upper)

    def __sub__(self, other: "SymmetricMatrix") -> "SymmetricMatrix":
        return SymmetricMatrix(self.order, tuple(a - b for a, b in zip(self.upper, other.upper)))

    def __add__(self, other: "SymmetricMatrix") -> "SymmetricMatrix":
        return SymmetricMatrix(self.order, tuple(a + b for a, b in zip(self.upper, other.upper)))

    def __neg__(self) -> "SymmetricMatrix":
        return SymmetricMatrix(self.order, tuple(-a for a in self.upper))

    def scaled(self, k) -> "SymmetricMatrix":
        return SymmetricMatrix(self.order, tuple(k * a for a in self.upper))

    def quadratic_form(self, u) -> float:
        a = self.to_array()
        u = np.asarray(u, dtype=float)
        return float(u @ a @ u)


def det_exact(rows: list[list]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    m = [[Fraction(a) for a in row] for row in rows]
    n = len(m)
    det = Fraction(1)
    for k in range(n):
        pivot = next((i for i in range(k, n) if m[i][k] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != k:
            m[k], m[pivot] = m[pivot], m[k]
            det = -det
        det *= m[k][k]
        for i in range(k + 1, n):
            f = m[i][k] / m[k][k]
            if f:
                for j in range(k, n):
                    m[i][j] -= f * m[k][j]
    return det


def _minor_rows(rows, idx):
    return [[rows[i][j] for j in idx] for i in idx]


def leading_minors(m: SymmetricMatrix, exact: bool | None = None) -> tuple:
    """Leading principal minors Delta_1..Delta_n (exact when entries are rational)."""
    exact = m.is_exact if exact is None else exact
    rows = m.rows()
    if exact:
        return tuple(det_exact(_minor_rows(rows, range(k))) for k in range(1, m.order + 1))
    a = m.to_array()
    return tuple(float(np.linalg.det(a[:k, :k])) for k in range(1, m.order + 1))


def sylvester_signs(m: SymmetricMatrix) -> tuple:
    """Leading principal minors of ``m``; the caller interprets the signs."""
    return leading_minors(m)


def principal_minors(m: SymmetricMatrix, exact: bool | None = None) -> dict:
    """All principal minors keyed by index tuple."""
    exact = m.is_exact if exact is None else exact
    rows = m.rows()
    out = {}
    for k in range(1, m.order + 1):
        for idx in itertools.combinations(range(m.order), k):
            if exact:
                out[idx] = det_exact(_minor_rows(rows, idx))
            else:
                out[idx] = float(np.linalg.det(np.asarray(_minor_rows(rows, idx), dtype=float)))
    return out


def is_nonpositive_definite_exact(m: SymmetricMatrix) -> bool:
    """Exact test: every principal minor of order k has sign (-1)^k or vanishes."""
    if not m.is_exact:
        raise TypeError("exact test needs rational entries")
    return all((-1) ** len(idx) * val >= 0 for idx, val in principal_minors(m).items())


def is_negative_definite_exact(m: SymmetricMatrix) -> bool:
    """Sylvester: (-1)^k Delta_k > 0 for every leading minor."""
    if not m.is_exact:
        raise TypeError("exact test needs rational entries")
    return all((-1) ** (k + 1) * d > 0 for k, d in enumerate(leading_minors(m)))


def diagonal_normalize(a: np.ndarray) -> np.ndarray:
    """Congruence D a D with D = diag(|a_ii|^-1/2) (1 where a_ii = 0); preserves definiteness."""
    diag = np.abs(np.diagonal(a, axis1=-2, axis2=-1))
    d = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    return a * d[..., :, None] * d[..., None, :]


def batch_max_eigenvalue(a: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(a)[..., -1]


def batch_nonpositive_sylvester(a: np.ndarray, tol: float) -> np.ndarray:
    """Float principal-minor test of nonpositive-definiteness with slack ``tol``.

    Returns the worst signed violation max_idx (-1)^{k+1} det(a[idx, idx]) per
    matrix; values <= tol mean the test passes. Intended for matrices already
    normalized by ``diagonal_normalize``.
    """
    n = a.shape[-1]
    worst = np.full(a.shape[:-2], -np.inf)
    for k in range(1, n + 1):
        for idx in itertools.combinations(range(n), k):
            sub = a[..., idx, :][..., :, idx]
            val = (-1.0) ** (k + 1) * np.linalg.det(sub)
            worst = np.maximum(worst, val)
    return worst


def exact_polynomial_coefficients(fn, degree: int) -> list[Fraction]:
    """Coefficients c_0..c_degree of a polynomial known through exact evaluations ``fn(Fraction)``."""
    nodes = [Fraction(k) for k in range(degree + 1)]
    values = [Fraction(fn(x)) for x in nodes]
    # Vandermonde solve by exact elimination
    rows = [[x**j for j in range(degree + 1)] + [y] for x, y in zip(nodes, values)]
    n = degree + 1
    for k in range(n):
        for i in range(k + 1, n):
            f = rows[i][k] / rows[k][k]
            for j in range(k, n + 1):
                rows[i][j] -= f * rows[k][j]
    coeffs = [Fraction(0)] * n
    for i in reversed(range(n)):
        s = rows[i][n] - sum(rows[i][j] * coeffs[j] for j in range(i + 1, n))
        coeffs[i] = s / rows[i][i]
    return coeffs
