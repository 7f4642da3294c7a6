"""Regression functionals of conditional survivor estimates.

``g^T(x) = -int_0^T y dS_x(y)`` (truncated mean) and
``S_x^{-1}(p) = inf{y : S_x(y) <= 1 - p}`` (quantile, median at p = 0.5).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Sample
from .errors import QuantileUndefined, SingularDesign
from .kernels import get_kernel
from .survivor import (
    StepFunction,
    _weights_lc,
    integrated_hazards,
    local_linear_weights,
    product_limit,
)

__all__ = [
    "CurveEstimate",
    "mean_truncated",
    "quantile",
    "default_truncation",
    "conditional_survivors",
    "estimate_curve",
    "nadaraya_watson",
    "variance_identity",
]

METHODS = {"lc": "local-constant", "ll": "local-linear", "two-step": "two-step"}


def mean_truncated(S: StepFunction, T: float) -> float:
    """Stieltjes sum ``sum_{t_k <= T} t_k (S(t_k-) - S(t_k))``."""
    if not T > 0:
        raise ValueError("truncation point must be positive")
    keep = S.jumps <= T
    drops = -S.increments[keep]
    return float(np.sum(S.jumps[keep] * drops))


def quantile(S: StepFunction, p: float) -> float:
    """Smallest ``y`` with ``S(y) <= 1 - p``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    level = 1.0 - p
    if S.initial <= level:
        return 0.0
    hit = np.flatnonzero(S.values <= level)
    if hit.size == 0:
        raise QuantileUndefined(
            f"survivor stays above {level:g} (terminal value {S.terminal:.4g})"
        )
    return float(S.jumps[hit[0]])


def default_truncation(sample: Sample, q: float = 0.95) -> float:
    """Empirical ``q``-quantile of all observed exits."""
    return float(np.quantile(sample.exit, q))


@dataclass
class CurveEstimate:
    grid: np.ndarray
    values: np.ndarray
    method: str
    truncation: float
    target: str = "mean"
    bandwidth: float | None = None
    kernel: str = "quartic"
    reasons: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def fraction_defined(self) -> float:
        return float(np.mean(self.defined)) if self.grid.size else 0.0

    def __call__(self, x):
        """Linear interpolation over defined grid points (no extrapolation)."""
        ok = self.defined
        x = np.asarray(x, dtype=float)
        if np.any(x < self.grid[ok][0]) or np.any(x > self.grid[ok][-1]):
            raise ValueError("evaluation outside the defined grid range")
        return np.interp(x, self.grid[ok], self.values[ok])

    def metadata(self) -> dict:
        return {
            "method": METHODS.get(self.method, self.method),
            "target": self.target,
            "truncation": _json_float(self.truncation),
            "bandwidth": _json_float(self.bandwidth),
            "kernel": self.kernel,
            "grid_points": int(self.grid.size),
            "defined_points": int(self.defined.sum()),
            "undefined": {repr(float(k)): v for k, v in sorted(self.reasons.items())},
            **self.meta,
        }

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "estimate", "defined"])
            for x, v, d in zip(self.grid, self.values, self.defined):
                w.writerow([repr(float(x)), repr(float(v)) if d else "", int(d)])

    def to_json(self, path) -> None:
        doc = self.metadata()
        doc["grid"] = [float(x) for x in self.grid]
        doc["values"] = [float(v) if np.isfinite(v) else None for v in self.values]
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def conditional_survivors(sample: Sample, method: str, K, b: float, grid):
    """Product-limit survivors per grid point; ``SingularDesign`` entries mark failures."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if method == "lc":
        weights = _weights_lc(sample, K, b, grid)
        return [product_limit(A) for A in integrated_hazards(sample, weights)]
    if method == "ll":
        out = []
        for x in grid:
            try:
                w = local_linear_weights(sample, K, b, x)
            except SingularDesign as exc:
                out.append(exc)
                continue
            out.append(product_limit(integrated_hazards(sample, w[None, :])[0]))
        return out
    raise ValueError(f"unknown method {method!r}; expected 'lc' or 'll'")


def estimate_curve(sample: Sample, method: str, K, b: float, grid, T=None,
                   target: str = "mean") -> CurveEstimate:
    """Truncated-mean or median regression curve from a filtered sample.

    Grid points where the survivor cannot be formed (no covariate mass in
    the window, singular local-linear design, undefined quantile) are
    returned as NaN with a reason in ``CurveEstimate.reasons``.
    """
    if not b > 0:
        raise ValueError("bandwidth must be positive")
    if target not in ("mean", "median"):
        raise ValueError(f"target must be 'mean' or 'median', got {target!r}")
    K = get_kernel(K)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    T = default_truncation(sample) if T is None else float(T)
    values = np.full(grid.shape, np.nan)
    reasons = {}
    for j, (x, S) in enumerate(zip(grid, conditional_survivors(sample, method, K, b, grid))):
        if isinstance(S, Exception):
            reasons[x] = str(S)
            continue
        if S.diagnostics.get("no_events"):
            reasons[x] = "no covariate mass in window"
            continue
        if target == "mean":
            values[j] = mean_truncated(S, T)
        else:
            try:
                values[j] = quantile(S, 0.5)
            except QuantileUndefined as exc:
                reasons[x] = str(exc)
    return CurveEstimate(grid, values, method, T, target, b, K.name, reasons)


def nadaraya_watson(sample: Sample, K, b: float, x: float) -> float:
    """Kernel-weighted average of the exits; intended for fully observed data."""
    if not np.all(sample.event):
        raise ValueError("Nadaraya-Watson oracle needs fully observed data")
    K = get_kernel(K)
    w = K((x - sample.x) / b) / b
    total = w.sum()
    if total <= 0:
        raise ZeroDivisionError(f"no covariate mass at x={x}")
    return float(np.sum(w * sample.exit) / total)


def variance_identity(survivor, hazard, upper: float = 40.0, num: int = 40001):
    """Both sides of the identity linking the hazard form of the variance to moments.

    Returns ``(lhs, rhs)`` with::

        lhs = int alpha(u) / S(u) * (int_u^upper S(y) dy)^2 du
        rhs = 2 int u S(u) du - (int S(u) du)^2

    computed by the trapezoid rule on ``num`` points over ``[0, upper]``.
    """
    from scipy.integrate import cumulative_trapezoid

    u = np.linspace(0.0, upper, num)
    s = np.asarray(survivor(u), dtype=float)
    a = np.asarray(hazard(u), dtype=float)
    head = cumulative_trapezoid(s, u, initial=0.0)
    tail = head[-1] - head
    lhs = np.trapezoid(a / s * tail**2, u)
    rhs = 2.0 * np.trapezoid(u * s, u) - head[-1] ** 2
    return float(lhs), float(rhs)
