"""Integrated conditional hazards and conditional survivor functions.

Letting the time bandwidth go to zero in the integrated local-constant
hazard leaves a pure-jump process. At each distinct event time ``t``::

    dA_x(t) = sum_{i: T_i = t, event} K_b(x - X_i)
              / sum_j K_b(x - X_j) 1{entry_j < t <= exit_j}

so with equal weights this is Nelson-Aalen and its product integral is
Kaplan-Meier.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Sample
from .errors import SingularDesign
from .hazard import RCOND_MIN
from .kernels import get_kernel

__all__ = [
    "StepFunction",
    "integrated_hazard_lc",
    "integrated_hazard_ll",
    "integrated_hazards",
    "local_linear_weights",
    "product_limit",
    "exp_survivor",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function.

    ``f(t) = initial`` for ``t < jumps[0]`` and ``f(t) = values[k]`` on
    ``[jumps[k], jumps[k+1])``.
    """

    jumps: np.ndarray
    values: np.ndarray
    initial: float = 0.0
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        jumps = np.asarray(self.jumps, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if jumps.shape != values.shape:
            raise ValueError("jumps and values must have equal length")
        if np.any(np.diff(jumps) <= 0):
            raise ValueError("jump locations must be strictly increasing")
        jumps.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.initial == other.initial
            and np.array_equal(self.jumps, other.jumps)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jumps, t, side="right")
        table = np.concatenate([[self.initial], self.values])
        return table[idx]

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.jumps, t, side="left")
        table = np.concatenate([[self.initial], self.values])
        return table[idx]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.concatenate([[self.initial], self.values]))

    @property
    def terminal(self) -> float:
        return float(self.values[-1]) if len(self.values) else float(self.initial)

    @classmethod
    def zero(cls, **diagnostics) -> "StepFunction":
        return cls(np.empty(0), np.empty(0), 0.0, dict(diagnostics))

    def to_csv(self, path) -> None:
        """Write ``t,value`` rows, starting with the initial value at ``t = 0``."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value"])
            w.writerow([0.0, repr(float(self.initial))])
            for t, v in zip(self.jumps, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "StepFunction":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        v = np.array([float(r["value"]) for r in rows])
        if len(t) and t[0] == 0.0:
            return cls(t[1:], v[1:], float(v[0]))
        return cls(t, v, 0.0)


def _jump_tables(sample: Sample, weights: np.ndarray):
    """Numerator and denominator of every jump for each weight row."""
    times = sample.event_times
    ev = sample.event[:, None] & (sample.exit[:, None] == times[None, :])
    risk = sample.at_risk(times)
    return times, weights @ ev, weights @ risk


def _steps_from_tables(times, num, den, floor) -> StepFunction:
    active = num != 0
    ok = active & (den > floor)
    skipped = int(np.count_nonzero(active & ~ok))
    if skipped:
        logger.debug("skipped %d event time(s) with vanishing risk-set weight", skipped)
    if not np.any(ok):
        return StepFunction.zero(skipped=skipped, no_events=True)
    jumps = num[ok] / den[ok]
    return StepFunction(times[ok], np.cumsum(jumps), 0.0, {"skipped": skipped})


def integrated_hazards(sample: Sample, weights) -> list[StepFunction]:
    """Integrated hazards for each row of a ``(m, n)`` weight matrix."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    times, num, den = _jump_tables(sample, weights)
    out = []
    for w, nu, de in zip(weights, num, den):
        floor = 1e-12 * float(np.sum(np.abs(w)))
        out.append(_steps_from_tables(times, nu, de, floor))
    return out


def _weights_lc(sample, K, b, xs):
    K = get_kernel(K)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    return K((xs[:, None] - sample.x[None, :]) / b) / b


def integrated_hazard_lc(sample: Sample, K, b: float, x: float) -> StepFunction:
    if not b > 0:
        raise ValueError("bandwidth must be positive")
    return integrated_hazards(sample, _weights_lc(sample, K, b, [x]))[0]


def local_linear_weights(sample: Sample, K, b: float, x: float) -> np.ndarray:
    """Equivalent-kernel weights ``Kbar_{x,b}(x - X_i)`` of local-linear smoothing.

    ``Kbar(v) = K_b(v) (1 - v c1 / d) / (c0 - c1^2 / d)`` with the moment sums
    ``c0, c1, d`` of ``K_b(x - X_i)`` times powers of ``x - X_i``.
    """
    if not b > 0:
        raise ValueError("bandwidth must be positive")
    K = get_kernel(K)
    v = x - sample.x
    kb = K(v / b) / b
    n = sample.n
    c0 = kb.sum() / n
    c1 = (kb * v).sum() / n
    d = (kb * v * v).sum() / n
    design = np.array([[c0, c1 / b], [c1 / b, d / b**2]])
    sv = np.linalg.svd(design, compute_uv=False)
    if not (np.all(np.isfinite(design)) and sv[0] > 0 and sv[-1] / sv[0] >= RCOND_MIN):
        raise SingularDesign(f"covariate design singular at x={x}")
    return kb * (1.0 - v * c1 / d) / (c0 - c1 * c1 / d)


def integrated_hazard_ll(sample: Sample, K, b: float, x: float) -> StepFunction:
    """Local-linear integrated hazard; jumps may be negative."""
    w = local_linear_weights(sample, K, b, x)
    return integrated_hazards(sample, w[None, :])[0]


def product_limit(A: StepFunction) -> StepFunction:
    """Product integral ``prod_{t_k <= y} (1 - dA(t_k))`` clamped into ``[0, 1]``.

    Once a factor drops to zero or below the survivor stays at zero.
    """
    s = 1.0
    clamped = 0
    vals = np.empty(len(A.jumps))
    for k, dA in enumerate(A.increments):
        if s > 0.0:
            factor = 1.0 - dA
            if factor <= 0.0:
                s = 0.0
                clamped += factor < 0.0
            else:
                s *= factor
                if s > 1.0:
                    s = 1.0
                    clamped += 1
        vals[k] = s
    diag = dict(A.diagnostics)
    diag["clamped"] = clamped
    return StepFunction(A.jumps, vals, 1.0, diag)


def exp_survivor(A: StepFunction) -> StepFunction:
    return StepFunction(A.jumps, np.exp(-A.values), float(np.exp(-A.initial)), dict(A.diagnostics))
