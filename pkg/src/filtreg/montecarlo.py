"""Simulation study: multiplicative model with a two-component censoring mixture.

Design: ``X ~ U[0, 1]``, ``eps ~ U[0.5, 1.5]``, ``Y = g(X) eps`` with
``g(x) = 4.5 - 64 x^2 (1 - x)^2 - 16 (x - 0.5)^2``. The censoring time is
``V ~ Beta(1, 3)`` when ``W ~ Beta(1, 0.75)`` falls below 0.5 and infinite
otherwise; the observed data are ``(min(Y, U), 1{Y < U}, X)``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .data import Sample, from_right_censored
from .regression import estimate_curve
from .shape import TwoStepConfig, two_step

__all__ = [
    "StudyConfig",
    "StudyResult",
    "true_g",
    "beta1_inverse",
    "draw_latent",
    "sample_dgp",
    "silverman_bandwidth",
    "run_study",
    "worker_count",
]

SCHEMA_VERSION = 1
METHOD_NAMES = ("local-constant", "two-step")


def true_g(x):
    x = np.asarray(x, dtype=float)
    return 4.5 - 64.0 * x**2 * (1.0 - x) ** 2 - 16.0 * (x - 0.5) ** 2


def beta1_inverse(u, beta: float):
    """Quantile function of Beta(1, beta): ``1 - (1 - u)^(1 / beta)``."""
    return 1.0 - (1.0 - np.asarray(u, dtype=float)) ** (1.0 / beta)


def draw_latent(n: int, seed) -> dict:
    """Latent variables ``x, eps, v, w`` of one sample, all from one uniform block."""
    if n < 1:
        raise ValueError("n must be positive")
    u = np.random.default_rng(seed).random((4, n))
    return {
        "x": u[0],
        "eps": 0.5 + u[1],
        "v": beta1_inverse(u[2], 3.0),
        "w": beta1_inverse(u[3], 0.75),
    }


def sample_dgp(n: int, seed) -> tuple[Sample, float]:
    """Draw one simulated sample; returns it with its censoring fraction."""
    d = draw_latent(n, seed)
    cens = np.where(d["w"] < 0.5, d["v"], np.inf)
    sample = from_right_censored(d["x"], true_g(d["x"]) * d["eps"], cens)
    return sample, float(1.0 - sample.event.mean())


def silverman_bandwidth(xs) -> float:
    """``1.06 min(sd, IQR / 1.34) n^(-1/5)``; the sd alone when the IQR is zero."""
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2 or np.all(xs == xs[0]):
        raise ValueError("Silverman's rule needs at least two distinct values")
    sd = float(np.std(xs, ddof=1))
    q75, q25 = np.percentile(xs, [75, 25])
    iqr = float(q75 - q25) / 1.34
    spread = min(sd, iqr) if iqr > 0 else sd
    return 1.06 * spread * xs.size ** (-0.2)


def worker_count(jobs: int) -> int:
    """Parallel workers, capped by ``FILTREG_THREADS`` (default 1)."""
    try:
        cap = int(os.environ.get("FILTREG_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, jobs))


@dataclass
class StudyConfig:
    n: int = 250
    reps: int = 15
    grid_size: int = 200
    seed: int = 0
    methods: tuple = METHOD_NAMES
    bandwidth: object = "silverman"
    time_bandwidth: object = "silverman"
    kernel: str = "quartic"
    truncation: float | None = None
    two_step: dict = field(default_factory=lambda: {"x_range": [0.0, 1.0]})
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.n < 10 or self.reps < 1 or self.grid_size < 2:
            raise ValueError("need n >= 10, reps >= 1, grid_size >= 2")
        self.methods = tuple(self.methods)
        bad = set(self.methods) - set(METHOD_NAMES)
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHOD_NAMES}")
        for name in ("bandwidth", "time_bandwidth"):
            v = getattr(self, name)
            if v != "silverman" and not (isinstance(v, (int, float)) and v > 0):
                raise ValueError(f"{name} must be 'silverman' or a positive number")
        if self.truncation is not None:
            self.truncation = float(self.truncation)
            if not self.truncation > 0:
                raise ValueError("truncation must be positive")
        TwoStepConfig.from_dict(self.two_step)

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown study option(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        if d["truncation"] is not None and math.isinf(d["truncation"]):
            d["truncation"] = "inf"
        return d

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)


def _bandwidths(cfg: StudyConfig, sample: Sample) -> tuple[float, float]:
    b = silverman_bandwidth(sample.x) if cfg.bandwidth == "silverman" else float(cfg.bandwidth)
    if cfg.time_bandwidth == "silverman":
        h = silverman_bandwidth(sample.exit[sample.event])
    else:
        h = float(cfg.time_bandwidth)
    return b, h


def _run_rep(cfg: StudyConfig, rep: int) -> dict:
    sample, cens = sample_dgp(cfg.n, cfg.seed + rep)
    b, h = _bandwidths(cfg, sample)
    grid = cfg.grid
    T = math.inf if cfg.truncation is None else cfg.truncation
    out = {"rep": rep, "censoring": cens, "b": b, "h": h, "errors": {}}
    for method in cfg.methods:
        try:
            if method == "local-constant":
                est = estimate_curve(sample, "lc", cfg.kernel, b, grid, T)
            else:
                ts = TwoStepConfig.from_dict({"truncation": T, **cfg.two_step})
                est = two_step(sample, cfg.kernel, cfg.kernel, b, h, grid, ts)
            out[method] = est.values
        except Exception as exc:  # recorded per replication, not fatal
            out[method] = np.full(grid.shape, np.nan)
            out["errors"][method] = f"{type(exc).__name__}: {exc}"
    return out


@dataclass
class StudyResult:
    config: StudyConfig
    grid: np.ndarray
    estimates: dict
    censoring: np.ndarray
    bandwidths: list
    errors: list

    def mean(self, method):
        return _nan_reduce(np.nanmean, self.estimates[method])

    def std(self, method):
        """Across-replication standard deviation (ddof = 1); NaN with fewer than 2 reps."""
        est = self.estimates[method]
        count = np.sum(np.isfinite(est), axis=0)
        out = np.full(self.grid.shape, np.nan)
        ok = count >= 2
        if ok.any():
            out[ok] = np.nanstd(est[:, ok], axis=0, ddof=1)
        return out

    def iqr13(self, method):
        """Interquartile range across replications divided by 1.3."""
        est = self.estimates[method]
        ok = np.sum(np.isfinite(est), axis=0) >= 2
        out = np.full(self.grid.shape, np.nan)
        if ok.any():
            q75, q25 = np.nanpercentile(est[:, ok], [75, 25], axis=0)
            out[ok] = (q75 - q25) / 1.3
        return out

    def standardized(self, method):
        """``(estimate - mean) / std`` per replication and grid point."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return (self.estimates[method] - self.mean(method)) / self.std(method)

    def rmse(self, method, lo=0.05, hi=0.95) -> float:
        inner = (self.grid >= lo) & (self.grid <= hi)
        err = self.mean(method)[inner] - true_g(self.grid[inner])
        return float(np.sqrt(np.nanmean(err**2)))

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "censoring_fraction": [float(c) for c in self.censoring],
            "mean_censoring_fraction": float(np.mean(self.censoring)),
            "bandwidths": self.bandwidths,
            "interior_rmse": {m: self.rmse(m) for m in self.estimates},
            "errors": self.errors,
            "standardization": "z = (estimate - mean over reps) / sd over reps with ddof=1",
            "spread": "iqr13 = (Q75 - Q25) / 1.3 across replications",
        }

    def write(self, outdir) -> list[Path]:
        """Write the four plot tables and ``summary.json``; returns the paths."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        methods = [m for m in METHOD_NAMES if m in self.estimates]
        paths = []

        rows = [self.grid, true_g(self.grid)] + [self.mean(m) for m in methods]
        paths.append(_write_table(outdir / "mean_curve.csv",
                                  ["x", "true_g"] + [f"mean_{_slug(m)}" for m in methods], rows))
        for m, name in (("two-step", "qq_efficient.csv"), ("local-constant", "qq_inefficient.csv")):
            if m not in self.estimates:
                continue
            z = self.standardized(m)
            z = np.sort(z[np.isfinite(z)])
            theo = norm.ppf((np.arange(1, z.size + 1) - 0.5) / z.size) if z.size else z
            paths.append(_write_table(outdir / name, ["theoretical", "sample"], [theo, z]))
        cols, header = [self.grid], ["x"]
        for m in methods:
            cols += [self.std(m), self.iqr13(m)]
            header += [f"std_{_slug(m)}", f"iqr13_{_slug(m)}"]
        cols.append(np.isfinite(np.column_stack(cols[1:])).all(axis=1).astype(int))
        header.append("defined")
        paths.append(_write_table(outdir / "spread.csv", header, cols))
        summary = outdir / "summary.json"
        summary.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
        paths.append(summary)
        return paths

    @property
    def has_undefined(self) -> bool:
        return any(not np.all(np.isfinite(self.std(m))) for m in self.estimates)


def _slug(method: str) -> str:
    return method.replace("-", "_")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


def _write_table(path: Path, header, cols) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def _nan_reduce(fn, est):
    out = np.full(est.shape[1], np.nan)
    ok = np.any(np.isfinite(est), axis=0)
    if ok.any():
        out[ok] = fn(est[:, ok], axis=0)
    return out


def run_study(config: StudyConfig, workers: int | None = None) -> StudyResult:
    """Run every replication (seed ``config.seed + r``) and aggregate in order."""
    workers = worker_count(config.reps) if workers is None else workers
    reps = range(config.reps)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_rep, [config] * config.reps, reps))
    else:
        results = [_run_rep(config, r) for r in reps]
    estimates = {m: np.array([r[m] for r in results]) for m in config.methods}
    errors = [{"rep": r["rep"], **r["errors"]} for r in results if r["errors"]]
    if len(errors) == config.reps and all(len(e) - 1 == len(config.methods) for e in errors):
        raise RuntimeError(f"every replication failed: {errors[0]}")
    return StudyResult(
        config,
        config.grid,
        estimates,
        np.array([r["censoring"] for r in results]),
        [{"rep": r["rep"], "b": r["b"], "h": r["h"]} for r in results],
        errors,
    )
