"""Kernel estimators of the conditional hazard ``alpha_x(y)``.

The local-constant estimator is the ratio of a kernel-weighted event count
(occurrence) to kernel-weighted time at risk (exposure)::

    O(x, y) = n^-1 sum_i K_b(x - X_i) k_h(y - T_i) 1{event_i}
    E(x, y) = n^-1 sum_i K_b(x - X_i) int_{entry_i}^{exit_i} k_h(y - u) du

The time integral is evaluated exactly from the kernel antiderivative. The
local-linear variant fits a plane in ``(x, y)`` and needs the first and
second kernel moments over each exposure interval, also in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Sample
from .errors import SingularDesign, ZeroExposure
from .kernels import get_kernel

__all__ = [
    "HazardPoint",
    "HazardCurve",
    "LocalConstantHazard",
    "LocalLinearHazard",
    "ExactHazard",
    "exposure_floor",
    "occurrence_lc",
    "exposure_lc",
    "hazard_lc",
    "ll_moments",
    "hazard_ll",
    "RCOND_MIN",
]

RCOND_MIN = 1e-10


def exposure_floor(n: int, b: float, h: float) -> float:
    return 1e-12 / (n * b * h)


@dataclass(frozen=True)
class HazardPoint:
    occurrence: float
    exposure: float
    floor: float = 0.0
    method: str = "lc"

    @property
    def defined(self) -> bool:
        return bool(self.exposure >= self.floor and self.exposure > 0)

    @property
    def value(self) -> float:
        return self.occurrence / self.exposure if self.defined else float("nan")

    def require(self) -> float:
        if not self.defined:
            raise ZeroExposure(
                f"exposure {self.exposure:.3g} below floor {self.floor:.3g}"
            )
        return self.value


@dataclass(frozen=True, eq=False)
class HazardCurve:
    """Occurrence and exposure along a time grid at one covariate value."""

    x: float
    y: np.ndarray
    occurrence: np.ndarray
    exposure: np.ndarray
    floor: float = 0.0

    @property
    def defined(self) -> np.ndarray:
        return (self.exposure >= self.floor) & (self.exposure > 0)

    @property
    def value(self) -> np.ndarray:
        out = np.full(self.y.shape, np.nan)
        ok = self.defined
        out[ok] = self.occurrence[ok] / self.exposure[ok]
        return out


def _check(sample: Sample, b: float, h: float) -> None:
    if not (b > 0 and h > 0):
        raise ValueError(f"bandwidths must be positive, got b={b!r}, h={h!r}")
    if sample.n == 0:
        raise ValueError("empty sample")


class LocalConstantHazard:
    """Local-constant hazard surface of one sample.

    Parameters
    ----------
    sample : Sample
    kernel_x, kernel_y : Kernel or str
        Kernels for the covariate and time directions.
    b, h : float
        Covariate and time bandwidths.
    """

    method = "lc"

    def __init__(self, sample: Sample, kernel_x="quartic", kernel_y=None, b=1.0, h=None):
        h = b if h is None else h
        _check(sample, b, h)
        self.sample = sample
        self.kernel_x = get_kernel(kernel_x)
        self.kernel_y = self.kernel_x if kernel_y is None else get_kernel(kernel_y)
        self.b = float(b)
        self.h = float(h)
        self.floor = exposure_floor(sample.n, self.b, self.h)

    def covariate_weights(self, xs) -> np.ndarray:
        """``K_b(x - X_i)`` with shape ``(len(xs), n)``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return self.kernel_x((xs[:, None] - self.sample.x[None, :]) / self.b) / self.b

    def _time_parts(self, ys):
        s, h, k = self.sample, self.h, self.kernel_y
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        occ = k((ys[:, None] - s.exit[None, :]) / h) / h * s.event[None, :]
        mass = k.partial_moment(
            0, (ys[:, None] - s.exit[None, :]) / h, (ys[:, None] - s.entry[None, :]) / h
        )
        return occ, mass

    def grid(self, xs, ys):
        """Occurrence and exposure on the product grid, each ``(len(xs), len(ys))``."""
        w = self.covariate_weights(xs)
        occ, mass = self._time_parts(ys)
        n = self.sample.n
        return w @ occ.T / n, w @ mass.T / n

    def components(self, x: float, ys):
        """Occurrence and exposure at one ``x`` along ``ys``."""
        o, e = self.grid([x], ys)
        return o[0], e[0]

    def curve(self, x: float, ys) -> HazardCurve:
        ys = np.asarray(ys, dtype=float)
        o, e = self.components(x, ys)
        return HazardCurve(float(x), ys, o, e, self.floor)

    def point(self, x: float, y: float) -> HazardPoint:
        o, e = self.components(x, [y])
        return HazardPoint(float(o[0]), float(e[0]), self.floor, "lc")


def occurrence_lc(sample, K, k, b, h, x, y) -> float:
    return LocalConstantHazard(sample, K, k, b, h).point(x, y).occurrence


def exposure_lc(sample, K, k, b, h, x, y) -> float:
    return LocalConstantHazard(sample, K, k, b, h).point(x, y).exposure


def hazard_lc(sample, K, k, b, h, x, y) -> HazardPoint:
    """Local-constant hazard at ``(x, y)``; ``.require()`` raises on zero exposure."""
    return LocalConstantHazard(sample, K, k, b, h).point(x, y)


def ll_moments(sample, K, k, b, h, x, y):
    """Local-linear moment sums ``(c0, c1, D)`` at ``w = (x, y)``.

    With ``v_i(u) = (x - X_i, y - u)`` and product kernel weight
    ``K_b(x - X_i) k_h(y - u)``, integrated over each exposure interval::

        c0 = n^-1 sum_i int K k
        c1 = n^-1 sum_i int K k v
        D  = n^-1 sum_i int K k v v^T
    """
    K, k = get_kernel(K), get_kernel(k)
    s = sample
    a = x - s.x
    kx = K(a / b) / b
    lo = (y - s.exit) / h
    hi = (y - s.entry) / h
    i0 = k.partial_moment(0, lo, hi)
    i1 = h * k.partial_moment(1, lo, hi)
    i2 = h * h * k.partial_moment(2, lo, hi)
    n = s.n
    c0 = np.sum(kx * i0) / n
    c1 = np.array([np.sum(kx * a * i0), np.sum(kx * i1)]) / n
    d = np.array(
        [
            [np.sum(kx * a * a * i0), np.sum(kx * a * i1)],
            [np.sum(kx * a * i1), np.sum(kx * i2)],
        ]
    ) / n
    return c0, c1, d


def _well_conditioned(mat: np.ndarray) -> bool:
    if not np.all(np.isfinite(mat)):
        return False
    sv = np.linalg.svd(mat, compute_uv=False)
    return sv[0] > 0 and sv[-1] / sv[0] >= RCOND_MIN


def hazard_ll(sample, K, b, x, y, *, h=None, k=None, fallback=False) -> HazardPoint:
    """Local-linear hazard at ``(x, y)``.

    Raises :class:`SingularDesign` when ``D`` or the full local design
    ``[[c0, c1'], [c1, D]]`` is ill-conditioned after bandwidth scaling;
    with ``fallback=True`` the local-constant value is returned instead.
    """
    h = b if h is None else h
    k = K if k is None else k
    _check(sample, b, h)
    K, k = get_kernel(K), get_kernel(k)
    c0, c1, d = ll_moments(sample, K, k, b, h, x, y)
    scale = np.array([1.0 / b, 1.0 / h])
    d_s = d * np.outer(scale, scale)
    full = np.empty((3, 3))
    full[0, 0] = c0
    full[0, 1:] = full[1:, 0] = c1 * scale
    full[1:, 1:] = d_s
    if not (_well_conditioned(d_s) and _well_conditioned(full)):
        if fallback:
            return hazard_lc(sample, K, k, b, h, x, y)
        raise SingularDesign(f"local-linear design singular at (x={x}, y={y})")
    beta = np.linalg.solve(d, c1)
    exposure = c0 - c1 @ beta
    s = sample
    ev = s.event
    v = np.column_stack([x - s.x[ev], y - s.exit[ev]])
    kern = K(v[:, 0] / b) / b * k(v[:, 1] / h) / h
    occurrence = np.sum(kern * (1.0 - v @ beta)) / s.n
    return HazardPoint(float(occurrence), float(exposure), exposure_floor(s.n, b, h), "ll")


class LocalLinearHazard(LocalConstantHazard):
    """Local-linear hazard surface, evaluated point by point.

    Singular points fall back to local-constant values when ``fallback`` is
    set, otherwise they are reported with zero exposure (undefined).
    """

    method = "ll"

    def __init__(self, sample, kernel_x="quartic", kernel_y=None, b=1.0, h=None, fallback=True):
        super().__init__(sample, kernel_x, kernel_y, b, h)
        self.fallback = fallback

    def components(self, x, ys):
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        o = np.zeros(ys.shape)
        e = np.zeros(ys.shape)
        for j, y in enumerate(ys):
            try:
                p = hazard_ll(
                    self.sample, self.kernel_x, self.b, x, y,
                    h=self.h, k=self.kernel_y, fallback=self.fallback,
                )
            except SingularDesign:
                continue
            o[j], e[j] = p.occurrence, p.exposure
        return o, e

    def grid(self, xs, ys):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        rows = [self.components(x, ys) for x in xs]
        return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])


class ExactHazard:
    """Hazard source built from known functions, for synthetic checks.

    ``alpha(x, y)`` and ``exposure(x, y)`` must broadcast over ``y``;
    occurrence is reported as ``alpha * exposure``.
    """

    method = "exact"
    floor = 0.0

    def __init__(self, alpha, exposure=None):
        self.alpha = alpha
        self.exposure = exposure if exposure is not None else (lambda x, y: np.ones_like(y))

    def components(self, x, ys):
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        e = np.asarray(self.exposure(x, ys), dtype=float) * np.ones_like(ys)
        return np.asarray(self.alpha(x, ys), dtype=float) * e, e

    def curve(self, x, ys) -> HazardCurve:
        ys = np.asarray(ys, dtype=float)
        o, e = self.components(x, ys)
        return HazardCurve(float(x), ys, o, e, 0.0)
