"""One-dimensional kernels phi, psi and psi_hat on the weight interval [1, c].

phi(t) = 2 - 1/t - ln(t)/(2c),  psi(t) = 1/(t phi(t)),  psi_hat(t) = t psi(t) = 1/phi(t).

All derivatives come from closed forms. Functions accept scalars or numpy
arrays; arrays are validated elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

BETA = 0.75
KAPPA = 0.5
C_SQUARED_MAJORANT = 1228800.0

# rounding slack when a grid point lands a hair outside [1, c]
_CLAMP_REL = 1e-12


@dataclass(frozen=True)
class DomainParams:
    """Characteristic bound ``c`` together with the fixed constants of the construction."""

    c: float
    beta: float = BETA
    kappa: float = KAPPA
    c_squared_majorant: float = C_SQUARED_MAJORANT

    def __post_init__(self):
        if not np.isfinite(self.c) or self.c <= 1.0:
            raise ParameterError(f"characteristic bound must satisfy c > 1, got c={self.c!r}")
        if self.beta != BETA or self.kappa != KAPPA or self.c_squared_majorant != C_SQUARED_MAJORANT:
            raise ParameterError("beta, kappa and C^2 are fixed at 3/4, 1/2 and 1228800")


@dataclass(frozen=True)
class KernelValue:
    t: float
    phi: float
    phi_d1: float
    phi_d2: float
    psi: float
    psi_hat: float
    psi_hat_d1: float
    psi_hat_d2: float


def _as_params(params) -> DomainParams:
    if isinstance(params, DomainParams):
        return params
    return DomainParams(float(params))


def check_t(t, c: float):
    """Validate ``1 <= t <= c`` and clamp values within rounding distance of the edges."""
    arr = np.asarray(t, dtype=float)
    slack = _CLAMP_REL * c
    bad = ~((arr >= 1.0 - slack) & (arr <= c + slack))
    if np.any(bad):
        worst = arr[bad].flat[0] if arr.ndim else float(arr)
        raise DomainError(f"t = w*v must lie in [1, c={c}], got t={worst!r}")
    arr = np.clip(arr, 1.0, c)
    return arr if arr.ndim else float(arr)


def phi(t, params):
    """phi(t) = 2 - 1/t - ln(t)/(2c)."""
    c = _as_params(params).c
    t = check_t(t, c)
    return 2.0 - 1.0 / t - np.log(t) / (2.0 * c)


def phi_derivatives(t, params):
    """Return (phi', phi'') with phi' = (2c - t)/(2ct^2), phi'' = -(4c - t)/(2ct^3)."""
    c = _as_params(params).c
    t = check_t(t, c)
    d1 = (2.0 * c - t) / (2.0 * c * t * t)
    d2 = -(4.0 * c - t) / (2.0 * c * t**3)
    return d1, d2


def phi_all(t, c: float):
    """(phi, phi', phi'') without re-validating; ``t`` must already be checked."""
    p = 2.0 - 1.0 / t - np.log(t) / (2.0 * c)
    d1 = (2.0 * c - t) / (2.0 * c * t * t)
    d2 = -(4.0 * c - t) / (2.0 * c * t**3)
    return p, d1, d2


def psi_hat_all(t, c: float):
    """(psi_hat, psi_hat', psi_hat'') for psi_hat = 1/phi."""
    p, d1, d2 = phi_all(t, c)
    h = 1.0 / p
    h1 = -d1 / (p * p)
    h2 = -(p * d2 - 2.0 * d1 * d1) / p**3
    return h, h1, h2


def psi(t, params):
    c = _as_params(params).c
    t = check_t(t, c)
    return 1.0 / (t * phi_all(t, c)[0])


def eval_phi(t: float, params) -> float:
    return float(phi(t, params))


def eval_phi_derivatives(t: float, params) -> tuple[float, float]:
    d1, d2 = phi_derivatives(t, params)
    return float(d1), float(d2)


def eval_psi_family(t: float, params) -> KernelValue:
    c = _as_params(params).c
    t = float(check_t(t, c))
    p, d1, d2 = phi_all(t, c)
    h, h1, h2 = psi_hat_all(t, c)
    return KernelValue(
        t=t,
        phi=p,
        phi_d1=d1,
        phi_d2=d2,
        psi=1.0 / (t * p),
        psi_hat=h,
        psi_hat_d1=h1,
        psi_hat_d2=h2,
    )
