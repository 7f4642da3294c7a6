"""Self-check suites: exact reductions, numerical identities, shape fixed points.

Each check returns a :class:`CheckResult`; :func:`run_suite` collects them
for the ``check`` subcommand. The oracles here are written independently of
the estimators they test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import from_right_censored
from .hazard import ExactHazard
from .kernels import EPANECHNIKOV, QUARTIC, TRIWEIGHT, get_kernel
from .regression import estimate_curve, variance_identity
from .shape import (
    WeightFunction,
    estimate_shape,
    oracle_criterion,
    oracle_location,
)
from .survivor import integrated_hazard_lc, local_linear_weights, product_limit

__all__ = ["CheckResult", "SUITES", "run_suite", "kaplan_meier", "nadaraya_watson_direct"]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    error: float
    tolerance: float

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.suite:<17} {self.name:<34} {status}  err={self.error:.3e}  tol={self.tolerance:.0e}"


def _result(suite, name, err, tol) -> CheckResult:
    err = float(err)
    return CheckResult(suite, name, bool(np.isfinite(err) and err <= tol), err, tol)


def kaplan_meier(times, events):
    """Textbook Kaplan-Meier: returns distinct event times and the survivor after each."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    out_t, out_s = [], []
    s = 1.0
    for t in np.unique(times[events]):
        d = np.sum((times == t) & events)
        r = np.sum(times >= t)
        s *= 1.0 - d / r
        out_t.append(t)
        out_s.append(s)
    return np.array(out_t), np.array(out_s)


def nadaraya_watson_direct(x, y, kernel, b, x0):
    """Kernel-weighted mean of ``y`` at ``x0``, written without the package estimators."""
    w = kernel((x0 - np.asarray(x)) / b)
    return float(np.dot(w, y) / w.sum())


def local_linear_direct(x, y, kernel, b, x0):
    """Weighted least-squares intercept of ``y`` on ``x - x0``."""
    v = np.asarray(x) - x0
    w = kernel(v / b)
    design = np.column_stack([np.ones_like(v), v])
    coef = np.linalg.solve(design.T @ (w[:, None] * design), design.T @ (w * y))
    return float(coef[0])


# ----------------------------------------------------------------------------
# reductions

def check_nadaraya_watson(rng, datasets=50, grid_points=20, tol=1e-10) -> CheckResult:
    K = get_kernel("quartic")
    worst = 0.0
    for _ in range(datasets):
        n = int(rng.integers(5, 51))
        x = rng.random(n)
        y = rng.exponential(1.0, n) + 0.1
        s = from_right_censored(x, y, np.full(n, np.inf))
        b = 0.3
        grid = np.linspace(0.05, 0.95, grid_points)
        est = estimate_curve(s, "lc", K, b, grid, T=2.0 * y.max())
        for x0, v in zip(grid, est.values):
            if K((x0 - x) / b).sum() <= 0:
                continue
            worst = max(worst, abs(v - nadaraya_watson_direct(x, y, K, b, x0)))
    return _result("reductions", "local-constant = Nadaraya-Watson", worst, tol)


def check_kaplan_meier(rng, datasets=100, tol=1e-12) -> CheckResult:
    worst = 0.0
    for _ in range(datasets):
        n = int(rng.integers(2, 31))
        # coarse rounding produces ties between events and censorings
        y = np.round(rng.exponential(1.0, n), 1) + 0.1
        u = np.round(rng.exponential(1.5, n), 1) + 0.1
        s = from_right_censored(np.zeros(n), y, u)
        S = product_limit(integrated_hazard_lc(s, "quartic", 1.0, 0.0))
        t_km, s_km = kaplan_meier(s.exit, s.event)
        if len(t_km) == 0:
            continue
        worst = max(worst, float(np.max(np.abs(S(t_km) - s_km))))
    return _result("reductions", "equal weights = Kaplan-Meier", worst, tol)


def check_local_linear(rng, datasets=30, tol=1e-8) -> CheckResult:
    """Local-linear weights on unfiltered data against weighted least squares.

    Holds exactly whenever no product-limit factor needs clamping, so only
    those fits are compared.
    """
    K = get_kernel("quartic")
    worst = 0.0
    for _ in range(datasets):
        n = int(rng.integers(20, 61))
        x = rng.random(n)
        y = 1.0 + x + rng.random(n)
        s = from_right_censored(x, y, np.full(n, np.inf))
        for x0 in (0.3, 0.5, 0.7):
            est = estimate_curve(s, "ll", K, 0.4, [x0], T=10.0)
            w = local_linear_weights(s, K, 0.4, x0)
            order = np.argsort(s.exit)
            tails = np.cumsum(w[order][::-1])[::-1]
            if np.any(tails <= 0) or not np.isfinite(est.values[0]):
                continue
            worst = max(worst, abs(est.values[0] - local_linear_direct(x, y, K, 0.4, x0)))
    return _result("reductions", "local-linear = weighted LS fit", worst, tol)


# ----------------------------------------------------------------------------
# identities

def check_variance_identity(tol=1e-3) -> CheckResult:
    lhs, rhs = variance_identity(lambda u: np.exp(-u), lambda u: np.ones_like(u))
    return _result("identities", "variance identity, Exp(1)", max(abs(lhs - 1), abs(rhs - 1)), tol)


def check_kernel_moments(tol=1e-10) -> list[CheckResult]:
    from scipy.integrate import quad

    out = []
    for K in (QUARTIC, EPANECHNIKOV, TRIWEIGHT):
        mass = quad(K, -1, 1)[0]
        mu2 = quad(lambda u: u * u * K(u), -1, 1)[0]
        l2 = quad(lambda u: K(u) ** 2, -1, 1)[0]
        err = max(abs(mass - 1), abs(mu2 - K.mu2), abs(l2 - K.l2sq))
        out.append(_result("identities", f"{K.name} kernel moments", err, tol))
    return out


# ----------------------------------------------------------------------------
# shape fixed point

def _alpha0(u):
    """Weibull(shape 2) baseline hazard."""
    return 2.0 * np.asarray(u, dtype=float)


def _g(x):
    return 1.0 + 0.5 * np.sin(np.pi * np.asarray(x, dtype=float))


def _exact_hazard():
    return ExactHazard(
        lambda x, y: _alpha0(y / _g(x)) / _g(x),
        lambda x, y: np.exp(-y) * (1.0 + x),
    )


def _band():
    return WeightFunction.constant_band((0.0, 1.0), 0.3, 3.0, taper_width=0.1)


def check_shape_fixed_point(tol=1e-10) -> CheckResult:
    xgrid = np.linspace(0.0, 1.0, 41)
    us = np.linspace(0.4, 1.8, 20)
    est = estimate_shape(_exact_hazard(), _g, _band(), xgrid, us)
    return _result("shape-fixedpoint", "pooled shape recovers alpha0", np.max(np.abs(est - _alpha0(us))), tol)


def check_criterion_zero(tol=1e-5) -> list[CheckResult]:
    hz, wf = _exact_hazard(), _band()
    x = 0.3
    ys = np.linspace(0.0, 3.5, 400)
    curve = hz.curve(x, ys)
    theta_star = float(_g(x))
    at_star = oracle_criterion(curve, _alpha0, theta_star, wf)
    off = min(oracle_criterion(curve, _alpha0, theta_star * f, wf) for f in (0.8, 0.95, 1.05, 1.2))
    loc = oracle_location(hz, _alpha0, x, wf, (0.5 * theta_star, 1.5 * theta_star), ygrid=ys)
    return [
        _result("shape-fixedpoint", "criterion zero at theta*", at_star, 1e-12),
        _result("shape-fixedpoint", "criterion positive elsewhere", 0.0 if off > 0 else 1.0, 0.0),
        _result("shape-fixedpoint", "oracle location recovers theta*", abs(loc.theta - theta_star), tol),
    ]


def _reductions(seed):
    rng = np.random.default_rng(seed)
    return [check_nadaraya_watson(rng), check_kaplan_meier(rng), check_local_linear(rng)]


def _identities(seed):
    return [check_variance_identity(), *check_kernel_moments()]


def _shape(seed):
    return [check_shape_fixed_point(), *check_criterion_zero()]


SUITES = {"reductions": _reductions, "identities": _identities, "shape-fixedpoint": _shape}


def run_suite(name: str, seed: int = 20240101) -> list[CheckResult]:
    """Run one suite, or every suite for ``name == "all"``."""
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](seed)]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join([*SUITES, 'all'])}")
    return SUITES[name](seed)
