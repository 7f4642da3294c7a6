"""Command-line front end: ``filtreg estimate | simulate | check``.

Exit codes: 0 on success, 2 when some output is undefined (grid points
without an estimate, spreads from a single replication), 1 on fatal errors.
Diagnostics go to stderr. ``check`` prints nothing but its result table to
stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .checks import SUITES, run_suite
from .data import read_csv
from .errors import FiltRegError
from .montecarlo import StudyConfig, run_study, silverman_bandwidth, worker_count
from .regression import default_truncation, estimate_curve
from .shape import TwoStepConfig, two_step

log = logging.getLogger("filtreg")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def file_digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    import scipy

    return {"filtreg": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    command: str
    config: dict
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    versions: dict = field(default_factory=_versions)
    wall_time: float = 0.0

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = file_digest(path)

    def write(self, path) -> Path:
        doc = asdict(self)
        doc["config_hash"] = self.config_hash
        path = Path(path)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n",
                        encoding="utf-8")
        return path


def parse_grid(text: str):
    """``lo:hi:n`` to an evenly spaced grid."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:n, got {text!r}") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise argparse.ArgumentTypeError(f"grid needs n >= 1 and hi > lo, got {text!r}")
    return np.linspace(lo, hi, n)


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _load_json(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return doc


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    sample = read_csv(args.input)
    b = args.bandwidth if args.bandwidth is not None else silverman_bandwidth(sample.x)
    T = args.truncation if args.truncation is not None else default_truncation(sample)
    grid = args.grid if args.grid is not None else np.linspace(sample.x.min(), sample.x.max(), 100)
    config = {"method": args.method, "target": args.target, "bandwidth": b,
              "truncation": T if math.isfinite(T) else "inf", "kernel": args.kernel,
              "grid": [float(grid[0]), float(grid[-1]), int(grid.size)]}

    if args.method == "two-step":
        opts = _load_json(args.config) if args.config else {}
        opts.setdefault("truncation", T)
        opts.setdefault("target", args.target)
        ts = TwoStepConfig.from_dict(opts)
        events = sample.exit[sample.event]
        h = args.time_bandwidth if args.time_bandwidth is not None else silverman_bandwidth(events)
        config.update(time_bandwidth=h, two_step=ts.to_dict())
        est = two_step(sample, args.kernel, args.kernel, b, h, grid, ts)
    else:
        est = estimate_curve(sample, args.method, args.kernel, b, grid, T, args.target)

    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = out.with_suffix(".json")
    est.to_csv(out)
    est.to_json(meta)
    manifest = RunManifest("estimate", config)
    manifest.add_input(args.input)
    manifest.add_output(out)
    manifest.add_output(meta)
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out.with_suffix(".manifest.json"))

    missing = int((~est.defined).sum())
    if missing:
        log.warning("%d of %d grid points undefined", missing, est.grid.size)
        for x, why in sorted(est.reasons.items()):
            log.info("x=%.6g: %s", x, why)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = StudyConfig.from_json(args.config)
    workers = args.workers if args.workers is not None else worker_count(cfg.reps)
    result = run_study(cfg, workers=workers)
    paths = result.write(args.outdir)
    manifest = RunManifest("simulate", cfg.to_dict(), seed=cfg.seed)
    manifest.add_input(args.config)
    for p in paths:
        manifest.add_output(p)
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(Path(args.outdir) / "manifest.json")
    for err in result.errors:
        log.warning("replication %s failed: %s", err["rep"],
                    "; ".join(f"{k}: {v}" for k, v in err.items() if k != "rep"))
    if result.has_undefined:
        log.warning("some spread values are undefined (fewer than two usable replications)")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_check(args) -> int:
    if args.suite != "all" and args.suite not in SUITES:
        log.error("unknown suite %r; choose from %s", args.suite, ", ".join([*SUITES, "all"]))
        return EXIT_FATAL
    results = run_suite(args.suite)
    for r in results:
        print(r.row())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FATAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="filtreg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="more diagnostics on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate a regression curve from a CSV sample")
    e.add_argument("--input", required=True, help="CSV with columns x,[entry],exit,event")
    e.add_argument("--method", choices=["lc", "ll", "two-step"], default="lc")
    e.add_argument("--target", choices=["mean", "median"], default="mean")
    e.add_argument("--bandwidth", type=_positive, help="covariate bandwidth (default: Silverman)")
    e.add_argument("--time-bandwidth", type=_positive,
                   help="time bandwidth for two-step (default: Silverman on event times)")
    e.add_argument("--truncation", type=_positive,
                   help="truncation point T; 'inf' allowed (default: 0.95 quantile of exits)")
    e.add_argument("--grid", type=parse_grid, help="lo:hi:n (default: data range, 100 points)")
    e.add_argument("--kernel", default="quartic", choices=["quartic", "epanechnikov", "triweight"])
    e.add_argument("--config", help="JSON file with two-step options")
    e.add_argument("--output", required=True, help="curve CSV; metadata and manifest go alongside")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run the Monte Carlo study")
    s.add_argument("--config", required=True, help="study configuration JSON")
    s.add_argument("--outdir", required=True)
    s.add_argument("--workers", type=int, help="parallel replications (default: FILTREG_THREADS)")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="run self-check suites")
    c.add_argument("--suite", default="all", help=f"one of {', '.join([*SUITES, 'all'])}")
    c.set_defaults(func=cmd_check)
    return p


def _configure_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("filtreg: %(levelname)s: %(message)s"))
    log.handlers = [handler]
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors are fatal errors under the exit-code contract
        return EXIT_OK if exc.code == 0 else EXIT_FATAL
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except (FiltRegError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
