"""Efficient location estimation under a common error shape.

Under ``Y = g(X) eps`` with ``eps`` independent of ``X`` the conditional
hazard factors as ``alpha_x(y) = alpha0(y / g(x)) / g(x)``. Given an
unrestricted hazard estimate ``ahat`` with exposure ``E`` the location at
``x`` minimises the minimum chi-squared criterion::

    l(theta; x) = int [ahat(y) - alpha0(y / theta) / theta]^2 / ahat(y) E(y) w(x, y) dy

and the baseline hazard is pooled across covariate values by::

    alpha0(u) = int E w dx / int E w / (g(x) ahat(u g(x))) dx

evaluated at ``y = u g(x)``. The two-step estimator plugs a preliminary
curve into the pooled ratio and then re-minimises ``l`` at each ``x``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data import Sample
from .errors import (
    HazardUndefinedInWeightSupport,
    MinimizerError,
    QuantileUndefined,
    ShapeUndefined,
)
from .hazard import HazardCurve, LocalConstantHazard, LocalLinearHazard
from .kernels import get_kernel
from .regression import CurveEstimate, conditional_survivors, estimate_curve, quantile

__all__ = [
    "WeightFunction",
    "ShapeEstimate",
    "ModelLocation",
    "TwoStepConfig",
    "TwoStepFit",
    "weight",
    "oracle_criterion",
    "minimize_1d",
    "oracle_location",
    "estimate_shape",
    "fit_shape",
    "fit_two_step",
    "two_step",
]

SCHEMA_VERSION = 1


def _ramp(t, lo, hi):
    """Cosine ramp from 0 at ``lo`` to 1 at ``hi``; a step when ``lo == hi``."""
    t = np.asarray(t, dtype=float)
    width = hi - lo
    if width <= 0:
        return (t >= lo).astype(float)
    s = np.clip((t - lo) / width, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * s))


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Cosine-tapered indicator of ``{x in R_X, tau_x <= y <= T_x}``.

    ``tau_x`` and ``T_x`` are tabulated at ``knots`` and interpolated
    linearly. Each edge ``c`` is smoothed over ``[c (1 - taper), c (1 + taper)]``
    in ``y``; the covariate edges use a band of half-width
    ``taper * (x_hi - x_lo)``. ``w`` is zero wherever the exposure is below
    ``exposure_floor`` and is multiplied by ``scale``.
    """

    x_range: tuple
    knots: np.ndarray
    tau: np.ndarray
    upper: np.ndarray
    taper_width: float = 0.1
    exposure_floor: float = 0.0
    scale: float = 1.0
    quantiles: tuple = (0.1, 0.9)

    def tau_at(self, x):
        return np.interp(x, self.knots, self.tau)

    def upper_at(self, x):
        return np.interp(x, self.knots, self.upper)

    def x_factor(self, x) -> float:
        lo, hi = self.x_range
        band = self.taper_width * (hi - lo)
        return float(_ramp(x, lo - band, lo + band) * (1.0 - _ramp(x, hi - band, hi + band)))

    def y_support(self, x) -> tuple[float, float]:
        tw = self.taper_width
        return float(self.tau_at(x) * (1 - tw)), float(self.upper_at(x) * (1 + tw))

    def __call__(self, x, y, exposure=None):
        tw = self.taper_width
        tau, up = self.tau_at(x), self.upper_at(x)
        w = _ramp(y, tau * (1 - tw), tau * (1 + tw)) * (1.0 - _ramp(y, up * (1 - tw), up * (1 + tw)))
        w = self.scale * self.x_factor(x) * w
        if exposure is not None:
            w = np.where(np.asarray(exposure) >= self.exposure_floor, w, 0.0)
        return w

    def scaled(self, factor: float) -> "WeightFunction":
        return WeightFunction(
            self.x_range, self.knots, self.tau, self.upper, self.taper_width,
            self.exposure_floor, self.scale * factor, self.quantiles,
        )

    @classmethod
    def constant_band(cls, x_range, tau, upper, **kw) -> "WeightFunction":
        """Band with ``tau_x`` and ``T_x`` constant in ``x``."""
        knots = np.array([x_range[0], x_range[1]], dtype=float)
        return cls(tuple(x_range), knots, np.full(2, float(tau)), np.full(2, float(upper)), **kw)

    @classmethod
    def from_pilot(cls, sample: Sample, K, b: float, x_range=None, q_lo=0.1, q_hi=0.9,
                   taper_width=0.1, exposure_floor=None, n_knots=100,
                   rel_exposure_floor=0.02, scale=1.0) -> "WeightFunction":
        """Band limits from conditional quantiles of a local-constant pilot survivor.

        Where the pilot survivor never reaches the upper level the last jump
        time stands in for ``T_x``. The default exposure floor is
        ``rel_exposure_floor`` times the largest pilot covariate density.
        """
        K = get_kernel(K)
        if x_range is None:
            x_range = (float(sample.x.min()), float(sample.x.max()))
        knots = np.linspace(x_range[0], x_range[1], n_knots)
        tau = np.full(n_knots, np.nan)
        upper = np.full(n_knots, np.nan)
        for j, S in enumerate(conditional_survivors(sample, "lc", K, b, knots)):
            if S.diagnostics.get("no_events"):
                continue
            try:
                tau[j] = quantile(S, q_lo)
            except QuantileUndefined:
                continue
            try:
                upper[j] = quantile(S, q_hi)
            except QuantileUndefined:
                upper[j] = S.jumps[-1]
        ok = np.isfinite(tau) & np.isfinite(upper) & (upper > tau)
        if not ok.any():
            raise ShapeUndefined("pilot survivor gives no usable weight band")
        tau = np.interp(knots, knots[ok], tau[ok])
        upper = np.interp(knots, knots[ok], upper[ok])
        if exposure_floor is None:
            dens = (K((knots[:, None] - sample.x[None, :]) / b) / b).mean(axis=1)
            exposure_floor = rel_exposure_floor * float(dens.max())
        return cls(tuple(map(float, x_range)), knots, tau, upper, taper_width,
                   float(exposure_floor), scale, (q_lo, q_hi))


def weight(wf: WeightFunction, x, y, exposure=None):
    return wf(x, y, exposure)


@dataclass(frozen=True, eq=False)
class ShapeEstimate:
    """Baseline hazard tabulated on ``ugrid`` with linear interpolation.

    Evaluation outside the grid raises unless ``extrapolation="clamp"``,
    which holds the boundary values; clamped evaluations are counted on
    the caller side.
    """

    ugrid: np.ndarray
    values: np.ndarray
    extrapolation: str = "error"

    def __post_init__(self):
        if len(self.ugrid) < 2 or np.any(np.diff(self.ugrid) <= 0):
            raise ShapeUndefined("shape grid needs two or more increasing points")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.ugrid[0]), float(self.ugrid[-1])

    def clamped(self) -> "ShapeEstimate":
        return ShapeEstimate(self.ugrid, self.values, "clamp")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.domain
        if self.extrapolation != "clamp" and (np.any(u < lo) or np.any(u > hi)):
            raise ValueError(f"baseline hazard requested outside its grid [{lo:.4g}, {hi:.4g}]")
        return np.interp(u, self.ugrid, self.values)


@dataclass
class ModelLocation:
    theta: float
    bracket: tuple
    criterion_value: float
    iterations: int
    at_boundary: bool = False


def _quad_weights(t: np.ndarray) -> np.ndarray:
    """Trapezoid weights; a single node gets unit weight."""
    if t.size == 1:
        return np.ones(1)
    dt = np.diff(t)
    w = np.zeros(t.size)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def _effective_weight(curve: HazardCurve, wf, x):
    ahat = curve.value
    w = np.asarray(wf(x, curve.y, curve.exposure), dtype=float) * np.ones_like(curve.y)
    bad = (w > 0) & ~curve.defined
    if bad.any():
        raise HazardUndefinedInWeightSupport(
            f"hazard undefined at y={curve.y[bad][0]:.4g} inside the weight support (x={x})"
        )
    # non-positive hazard estimates cannot carry the inverse-variance weight
    return np.where(w > 0, np.where(ahat > 0, w, 0.0), 0.0), ahat


def oracle_criterion(curve: HazardCurve, alpha0, theta: float, wf, x=None) -> float:
    """Weighted squared distance between ``ahat`` and ``alpha0(y / theta) / theta``.

    Trapezoid rule over ``curve.y``; points with zero weight contribute 0.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta!r}")
    x = curve.x if x is None else x
    w, ahat = _effective_weight(curve, wf, x)
    return _criterion(curve.y, ahat, curve.exposure, w, alpha0, theta)


def _criterion(y, ahat, exposure, w, alpha0, theta):
    on = w > 0
    if not on.any():
        return 0.0
    model = np.asarray(alpha0(y[on] / theta), dtype=float) / theta
    terms = np.zeros(y.shape)
    terms[on] = (ahat[on] - model) ** 2 / ahat[on] * exposure[on] * w[on]
    return float(_quad_weights(y) @ terms)


_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


def minimize_1d(f, bracket, tol=None, maxiter=200):
    """Bounded Brent minimisation mixing golden-section and parabolic steps.

    Both bracket endpoints are evaluated as well, and the best point seen
    is returned as ``(argmin, value, iterations)``.
    """
    a, b = map(float, bracket)
    if not (math.isfinite(a) and math.isfinite(b)) or a > b:
        raise ValueError(f"invalid bracket {bracket!r}")

    def call(t):
        v = float(f(t))
        if not math.isfinite(v):
            raise MinimizerError(f"objective not finite at {t!r}")
        return v

    if a == b:
        return a, call(a), 0
    tol = 1e-6 * (b - a) if tol is None else float(tol)
    sqrt_eps = math.sqrt(np.finfo(float).eps)

    x = w = v = a + _GOLDEN * (b - a)
    fx = fw = fv = call(x)
    d = e = 0.0
    it = 0
    for it in range(1, maxiter + 1):
        mid = 0.5 * (a + b)
        tol1 = sqrt_eps * abs(x) + tol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - mid) <= tol2 - 0.5 * (b - a):
            break
        golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            r, e = e, d
            if abs(p) < abs(0.5 * q * r) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < mid else -tol1
                golden = False
        if golden:
            e = (a - x) if x >= mid else (b - x)
            d = _GOLDEN * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = call(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu

    lo, hi = map(float, bracket)
    best = min([(fx, x), (call(lo), lo), (call(hi), hi)], key=lambda t: t[0])
    return best[1], best[0], it


def _ygrid(wf, x, n_y):
    lo, hi = wf.y_support(x)
    return np.linspace(max(lo, 0.0), hi, n_y)


def oracle_location(hazard, alpha0, x: float, wf, bracket, ygrid=None, n_y=200,
                    tol=None) -> ModelLocation:
    """Minimise the criterion over ``bracket`` at covariate value ``x``.

    ``hazard`` is any hazard source with a ``curve(x, ys)`` method, such as
    :class:`~filtreg.hazard.LocalConstantHazard`.
    """
    ys = _ygrid(wf, x, n_y) if ygrid is None else np.asarray(ygrid, dtype=float)
    curve = hazard.curve(x, ys)
    w, ahat = _effective_weight(curve, wf, x)
    if not np.any(w > 0):
        raise HazardUndefinedInWeightSupport(f"weight vanishes at x={x}")

    def obj(theta):
        return _criterion(ys, ahat, curve.exposure, w, alpha0, theta)

    theta, value, iters = minimize_1d(obj, bracket, tol=tol)
    lo, hi = map(float, bracket)
    tol_abs = 1e-6 * (hi - lo) if tol is None else tol
    at_boundary = min(theta - lo, hi - theta) <= tol_abs
    return ModelLocation(float(theta), (lo, hi), float(value), iters, bool(at_boundary))


def _g_values(gtilde, xgrid):
    if callable(gtilde):
        return np.asarray(gtilde(xgrid), dtype=float)
    g = np.asarray(gtilde, dtype=float)
    if g.shape != xgrid.shape:
        raise ValueError("gtilde values must align with xgrid")
    return g


def _shape_ratio(hazard, gvals, wf, xgrid, us):
    us = np.atleast_1d(np.asarray(us, dtype=float))
    qw = _quad_weights(xgrid)
    num = np.zeros(us.shape)
    den = np.zeros(us.shape)
    for xj, gj, cj in zip(xgrid, gvals, qw):
        if not (np.isfinite(gj) and gj > 0) or cj == 0:
            continue
        ys = us * gj
        o, e = hazard.components(xj, ys)
        curve = HazardCurve(float(xj), ys, o, e, getattr(hazard, "floor", 0.0))
        ahat = curve.value
        w = np.asarray(wf(xj, ys, e), dtype=float) * np.ones_like(ys)
        use = (w > 0) & curve.defined & (ahat > 0)
        num += cj * np.where(use, e * w, 0.0)
        den += cj * np.where(use, e * w / (gj * np.where(use, ahat, 1.0)), 0.0)
    return num, den


def estimate_shape(hazard, gtilde, wf, xgrid, u):
    """Pooled baseline hazard at ``u`` (scalar or array).

    Raises :class:`ShapeUndefined` when the denominator integral is below
    ``1e-12`` at any requested ``u``.
    """
    xgrid = np.atleast_1d(np.asarray(xgrid, dtype=float))
    num, den = _shape_ratio(hazard, _g_values(gtilde, xgrid), wf, xgrid, u)
    if np.any(den < 1e-12):
        raise ShapeUndefined("pooled baseline hazard has a vanishing denominator")
    out = num / den
    return float(out[0]) if np.ndim(u) == 0 else out


def shape_range(wf, gtilde, xgrid):
    """Baseline-time range reached by ``y / g(x)`` inside the weight support."""
    xgrid = np.atleast_1d(np.asarray(xgrid, dtype=float))
    g = _g_values(gtilde, xgrid)
    lo, hi = np.inf, -np.inf
    for x, gx in zip(xgrid, g):
        if not (np.isfinite(gx) and gx > 0) or wf.x_factor(x) <= 0:
            continue
        a, b_ = wf.y_support(x)
        lo, hi = min(lo, max(a, 0.0) / gx), max(hi, b_ / gx)
    if not lo < hi:
        raise ShapeUndefined("weight support does not cover any baseline times")
    return lo, hi


def fit_shape(hazard, gtilde, wf, xgrid, ugrid=None, n_u=100) -> ShapeEstimate:
    """Tabulate the pooled baseline hazard, dropping grid points it cannot reach."""
    xgrid = np.atleast_1d(np.asarray(xgrid, dtype=float))
    if ugrid is None:
        ugrid = np.linspace(*shape_range(wf, gtilde, xgrid), n_u)
    ugrid = np.asarray(ugrid, dtype=float)
    num, den = _shape_ratio(hazard, _g_values(gtilde, xgrid), wf, xgrid, ugrid)
    ok = den >= 1e-12
    if ok.sum() < 2:
        raise ShapeUndefined("pooled baseline hazard defined at fewer than two points")
    return ShapeEstimate(ugrid[ok], num[ok] / den[ok])


@dataclass
class TwoStepConfig:
    """Tuning of the two-step estimator (JSON-serialisable)."""

    c_lo: float = 0.5
    c_hi: float = 1.5
    n_y: int = 200
    n_x: int = 100
    n_u: int = 100
    taper_width: float = 0.1
    q_lo: float = 0.1
    q_hi: float = 0.9
    exposure_floor: float | None = None
    rel_exposure_floor: float = 0.02
    x_range: tuple | None = None
    truncation: float | None = None
    target: str = "mean"
    hazard: str = "lc"
    tol: float | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not 0 < self.c_lo < 1 < self.c_hi:
            raise ValueError("bracket factors must satisfy 0 < c_lo < 1 < c_hi")
        if not 0 < self.q_lo < self.q_hi < 1:
            raise ValueError("weight quantiles must satisfy 0 < q_lo < q_hi < 1")
        if min(self.n_y, self.n_x, self.n_u) < 2:
            raise ValueError("grid sizes must be at least 2")
        if self.hazard not in ("lc", "ll"):
            raise ValueError("hazard must be 'lc' or 'll'")
        if self.x_range is not None:
            self.x_range = tuple(float(v) for v in self.x_range)
        if self.truncation is not None:
            self.truncation = float(self.truncation)  # accepts "inf" from JSON
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")

    @classmethod
    def from_dict(cls, d: dict) -> "TwoStepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown two-step option(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["x_range"] is not None:
            d["x_range"] = list(d["x_range"])
        if d["truncation"] is not None and math.isinf(d["truncation"]):
            d["truncation"] = "inf"
        return d


@dataclass
class TwoStepFit:
    curve: CurveEstimate
    preliminary: CurveEstimate
    shape: ShapeEstimate
    weight: WeightFunction
    locations: dict = field(default_factory=dict)


def fit_two_step(sample: Sample, K, k, b: float, h: float, grid,
                 config: TwoStepConfig | None = None, wf: WeightFunction | None = None,
                 alpha0=None) -> TwoStepFit:
    """Preliminary curve, pooled baseline hazard, then per-point re-minimisation.

    Passing ``alpha0`` skips the pooling step and uses that baseline hazard
    directly (the oracle version).
    """
    cfg = config or TwoStepConfig()
    K = get_kernel(K)
    k = K if k is None else get_kernel(k)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    x_range = cfg.x_range or (float(sample.x.min()), float(sample.x.max()))
    xgrid = np.linspace(x_range[0], x_range[1], cfg.n_x)

    prelim_pool = estimate_curve(sample, "lc", K, b, xgrid, cfg.truncation, cfg.target)
    prelim = estimate_curve(sample, "lc", K, b, grid, cfg.truncation, cfg.target)
    if wf is None:
        wf = WeightFunction.from_pilot(
            sample, K, b, x_range, cfg.q_lo, cfg.q_hi, cfg.taper_width,
            cfg.exposure_floor, n_knots=cfg.n_x, rel_exposure_floor=cfg.rel_exposure_floor,
        )
    haz_cls = LocalConstantHazard if cfg.hazard == "lc" else LocalLinearHazard
    hazard = haz_cls(sample, K, k, b, h)

    if alpha0 is None:
        ok = prelim_pool.defined
        shape = fit_shape(hazard, prelim_pool.values[ok], wf, xgrid[ok], n_u=cfg.n_u)
        alpha0 = shape.clamped()
    else:
        shape = alpha0 if isinstance(alpha0, ShapeEstimate) else None

    values = np.full(grid.shape, np.nan)
    reasons, locations = {}, {}
    for j, x in enumerate(grid):
        g0 = prelim.values[j]
        if not (np.isfinite(g0) and g0 > 0):
            reasons[x] = "preliminary estimate undefined"
            continue
        try:
            loc = oracle_location(hazard, alpha0, x, wf, (cfg.c_lo * g0, cfg.c_hi * g0),
                                  n_y=cfg.n_y, tol=cfg.tol)
        except (HazardUndefinedInWeightSupport, MinimizerError, ValueError) as exc:
            reasons[x] = str(exc)
            continue
        values[j] = loc.theta
        locations[x] = loc

    curve = CurveEstimate(
        grid, values, "two-step", prelim.truncation, cfg.target, b, K.name, reasons,
        meta={"time_bandwidth": h, "two_step": cfg.to_dict(),
              "boundary_hits": int(sum(l.at_boundary for l in locations.values()))},
    )
    return TwoStepFit(curve, prelim, shape, wf, locations)


def two_step(sample: Sample, K, k, b: float, h: float, grid,
             config: TwoStepConfig | None = None, wf: WeightFunction | None = None) -> CurveEstimate:
    return fit_two_step(sample, K, k, b, h, grid, config, wf).curve
