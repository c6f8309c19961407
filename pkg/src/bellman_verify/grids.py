"""Point grids over R^2 x D_c.

By the two homogeneities of B (quadratic in (x, y), linear under
(w, v) -> (mu w, v / mu)) the behaviour at a point depends only on the angle
of (x, y), on t = w v and on the sign pattern. Grids are therefore linear in
the angle, logarithmic in t, and logarithmic in w over a moderate range so
that the w-homogeneity is exercised too.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import D3_SLOPE, d1_threshold

REGION_CHOICES = ("full", "D1", "D2", "D3", "initial", "boundary12", "boundary23", "y_axis0")


@dataclass(frozen=True)
class GridSpec:
    c_values: tuple = (2.0,)
    n_angle: int = 21
    n_w: int = 21
    n_t: int = 21
    w_range: tuple = (0.25, 4.0)
    t_range: tuple | None = None  # default [1, c]
    scale: str = "log"
    radius: float = 1.0
    region: str = "full"
    interior: float = 0.0  # fraction of the angle interval (and of log t) trimmed at each end
    all_signs: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.region not in REGION_CHOICES:
            raise ValueError(f"unknown grid region {self.region!r}")
        if min(self.n_angle, self.n_w, self.n_t) < 1:
            raise ValueError("points per axis must be positive")
        if self.scale not in ("log", "linear"):
            raise ValueError("scale must be 'log' or 'linear'")
        if any(c <= 1.0 for c in self.c_values):
            raise ValueError("every c must exceed 1")

    @property
    def size(self) -> int:
        return self.n_angle * self.n_w * self.n_t

    def with_c(self, c: float) -> "GridSpec":
        return replace(self, c_values=(float(c),))

    def _axis(self, lo, hi, n, log):
        if n == 1:
            return np.array([np.sqrt(lo * hi) if log else 0.5 * (lo + hi)])
        if log:
            return np.exp(np.linspace(np.log(lo), np.log(hi), n))
        return np.linspace(lo, hi, n)

    def weights(self, c: float):
        """(w, t) mesh satisfying 1 <= t <= c."""
        t_lo, t_hi = self.t_range or (1.0, c)
        t_lo, t_hi = max(t_lo, 1.0), min(t_hi, c)
        if self.interior > 0.0:
            span = np.log(t_hi / t_lo)
            t_lo, t_hi = t_lo * np.exp(self.interior * span), t_hi * np.exp(-self.interior * span)
        log = self.scale == "log"
        w = self._axis(*self.w_range, self.n_w, log)
        t = self._axis(t_lo, t_hi, self.n_t, log)
        return np.meshgrid(w, t, indexing="ij")

    def points(self, c: float):
        """Arrays (x, y, w, v), each of length ``size``."""
        w, t = self.weights(c)
        w, t = w.ravel(), t.ravel()
        m = w.size
        k = self.n_angle
        u = np.linspace(0.0, 1.0, k) if k > 1 else np.array([0.5])
        if self.interior > 0.0:
            u = self.interior + (1.0 - 2.0 * self.interior) * u
        slope1 = d1_threshold(t, c)
        if self.region == "full":
            theta = np.broadcast_to(2.0 * np.pi * (np.arange(k) / k), (m, k))
            signs = False
        elif self.region == "y_axis0":
            theta = np.broadcast_to(np.where(np.arange(k) % 2 == 0, 0.0, np.pi), (m, k))
            signs = False
        else:
            lo, hi = self._angle_bounds(slope1)
            if self.region in ("boundary12", "boundary23"):
                theta = None
            else:
                theta = lo[:, None] + (hi - lo)[:, None] * u[None, :]
            signs = self.all_signs
        if theta is None:
            slope = slope1 if self.region == "boundary12" else np.full(m, D3_SLOPE)
            ax = np.broadcast_to(self.radius * np.linspace(0.2, 1.0, k), (m, k))
            x = np.array(ax)
            y = slope[:, None] * ax
        else:
            x = self.radius * np.cos(theta)
            y = self.radius * np.sin(theta)
        if signs:
            idx = np.arange(m * k).reshape(m, k)
            x = np.where(idx % 2 == 0, x, -x)
            y = np.where((idx // 2) % 2 == 0, y, -y)
        ww = np.repeat(w[:, None], k, axis=1)
        tt = np.repeat(t[:, None], k, axis=1)
        return x.ravel(), y.ravel(), ww.ravel(), (tt / ww).ravel()

    def _angle_bounds(self, slope1):
        a1 = np.arctan(slope1)
        a3 = np.full_like(a1, np.arctan(D3_SLOPE))
        if self.region == "D1":
            return a1, np.full_like(a1, 0.5 * np.pi)
        if self.region == "D2":
            return a3, a1
        if self.region == "D3":
            return np.zeros_like(a1), a3
        if self.region == "initial":
            return np.zeros_like(a1), np.full_like(a1, 0.25 * np.pi)
        return a3, a1

    def coordinate_grid(self, c: float):
        """(s, w, v) mesh for matrices indexed by one linear coordinate: s in [-radius, radius]."""
        w, t = self.weights(c)
        s = np.linspace(-self.radius, self.radius, self.n_angle)
        s3, w3, t3 = np.meshgrid(s, w[:, 0], t[0, :], indexing="ij")
        return s3.ravel(), w3.ravel(), (t3 / w3).ravel()


def random_points(region: str, n: int, c: float, rng, margin: float = 0.02, w_range=(0.25, 4.0)):
    """Random points strictly inside ``region`` (D1, D2, D3 or full), away from t = 1 and t = c."""
    span = np.log(c)
    log_t = rng.uniform(margin * span, (1.0 - margin) * span, n)
    t = np.exp(log_t)
    w = np.exp(rng.uniform(np.log(w_range[0]), np.log(w_range[1]), n))
    slope1 = d1_threshold(t, c)
    a1, a3 = np.arctan(slope1), np.arctan(D3_SLOPE)
    if region == "D1":
        lo, hi = a1, np.full(n, 0.5 * np.pi)
    elif region == "D2":
        lo, hi = np.full(n, a3), a1
    elif region == "D3":
        lo, hi = np.zeros(n), np.full(n, a3)
    elif region == "full":
        lo, hi = np.zeros(n), np.full(n, 0.5 * np.pi)
    else:
        raise ValueError(f"unknown region {region!r}")
    u = rng.uniform(margin, 1.0 - margin, n)
    theta = lo + (hi - lo) * u
    r = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n))
    x = r * np.cos(theta) * rng.choice([-1.0, 1.0], n)
    y = r * np.sin(theta) * rng.choice([-1.0, 1.0], n)
    return x, y, w, t / w
