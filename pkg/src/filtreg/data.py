"""Filtered samples stored as exposure intervals plus event flags.

Each subject contributes a covariate ``x``, an at-risk interval
``(entry, exit]`` and a flag telling whether ``exit`` is an observed event.
Right censoring sets ``entry = 0`` and ``exit = min(Y, U)``; left
truncation moves ``entry`` away from zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "EventRecord",
    "Sample",
    "exposure_at",
    "from_right_censored",
    "from_truncated_censored",
    "read_csv",
    "write_csv",
]


@dataclass(frozen=True)
class EventRecord:
    x: float
    entry: float
    exit: float
    event: bool

    def __post_init__(self):
        if not (math.isfinite(self.entry) and self.entry >= 0):
            raise DataError(f"entry must be finite and >= 0, got {self.entry}")
        if not math.isfinite(self.exit):
            raise DataError(f"exit must be finite, got {self.exit}")
        if not self.exit > self.entry:
            raise DataError(f"empty exposure: entry={self.entry} >= exit={self.exit}")
        if not math.isfinite(self.x):
            raise DataError(f"covariate must be finite, got {self.x}")


def exposure_at(record: EventRecord, y: float) -> int:
    """At-risk indicator, 1 exactly for ``entry < y <= exit``."""
    return int(record.entry < y <= record.exit)


class Sample:
    """Immutable collection of :class:`EventRecord` in column form.

    The columns ``x``, ``entry``, ``exit`` and ``event`` are read-only numpy
    arrays, which is what every estimator consumes.
    """

    def __init__(self, records: Iterable[EventRecord]):
        records = tuple(records)
        if not records:
            raise DataError("a sample needs at least one record")
        cols = {
            "x": np.array([r.x for r in records], dtype=float),
            "entry": np.array([r.entry for r in records], dtype=float),
            "exit": np.array([r.exit for r in records], dtype=float),
            "event": np.array([bool(r.event) for r in records], dtype=bool),
        }
        for name, arr in cols.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_records", records)

    def __setattr__(self, name, value):
        raise AttributeError("Sample is immutable")

    @property
    def records(self) -> tuple[EventRecord, ...]:
        return self._records

    @property
    def n(self) -> int:
        return len(self._records)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self._records)

    def __repr__(self) -> str:
        return f"Sample(n={self.n}, events={int(self.event.sum())})"

    @cached_property
    def event_times(self) -> np.ndarray:
        """Distinct exit times carrying at least one event, ascending."""
        t = np.unique(self.exit[self.event])
        t.setflags(write=False)
        return t

    def at_risk(self, times) -> np.ndarray:
        """Matrix ``R[i, k] = 1{entry_i < t_k <= exit_i}``."""
        t = np.asarray(times, dtype=float)
        return (self.entry[:, None] < t[None, :]) & (t[None, :] <= self.exit[:, None])

    def concat(self, other: "Sample") -> "Sample":
        return Sample(self._records + other.records)


def _as_float_array(values, name) -> np.ndarray:
    try:
        return np.asarray(values, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{name}: {exc}") from None


def from_right_censored(xs: Sequence[float], ys: Sequence[float], us: Sequence[float]) -> Sample:
    """Build a sample from latent event times ``ys`` and censoring times ``us``.

    The observed time is ``min(y, u)`` and the record is an event only when
    ``y < u`` strictly, so ``y == u`` counts as censored. ``us`` may hold
    ``inf`` for subjects that are never censored.
    """
    xs = _as_float_array(xs, "xs")
    ys = _as_float_array(ys, "ys")
    us = _as_float_array(us, "us")
    if not len(xs) == len(ys) == len(us):
        raise DataError(f"length mismatch: {len(xs)}, {len(ys)}, {len(us)}")
    if np.any(~(ys > 0)) or np.any(~np.isfinite(ys)):
        raise DataError("event times must be positive and finite")
    if np.any(~(us > 0)):
        raise DataError("censoring times must be positive (or +inf)")
    exits = np.minimum(ys, us)
    events = ys < us
    return Sample(
        EventRecord(float(x), 0.0, float(t), bool(d)) for x, t, d in zip(xs, exits, events)
    )


def from_truncated_censored(xs, entries, exits, flags) -> Sample:
    """Build a sample from explicit ``(entry, exit]`` intervals and event flags."""
    cols = [
        _as_float_array(xs, "xs"),
        _as_float_array(entries, "entries"),
        _as_float_array(exits, "exits"),
    ]
    flags = np.asarray(flags).reshape(-1)
    if len({len(c) for c in cols} | {len(flags)}) != 1:
        raise DataError("length mismatch between columns")
    return Sample(
        EventRecord(float(x), float(a), float(b), bool(d))
        for x, a, b, d in zip(*cols, flags)
    )


_REQUIRED = ("x", "exit", "event")


def read_csv(path) -> Sample:
    """Read ``x,entry,exit,event`` rows; ``entry`` is optional and defaults to 0."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in _REQUIRED if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        records = []
        for row in reader:
            line = reader.line_num
            try:
                event = row["event"].strip()
                if event not in ("0", "1"):
                    raise ValueError(f"event must be 0 or 1, got {event!r}")
                entry = row.get("entry")
                records.append(
                    EventRecord(
                        float(row["x"]),
                        float(entry) if entry not in (None, "") else 0.0,
                        float(row["exit"]),
                        event == "1",
                    )
                )
            except (ValueError, AttributeError, TypeError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
    if not records:
        raise DataError(f"{path}: no data rows")
    return Sample(records)


def write_csv(sample: Sample, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "entry", "exit", "event"])
        for r in sample:
            w.writerow([repr(r.x), repr(r.entry), repr(r.exit), int(r.event)])
