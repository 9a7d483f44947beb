"""Non-parametric survival estimators over integer-year durations.

All curves are right-continuous step functions: the value listed at a time
holds until the next listed time, and the value before the first listed
time is the curve's starting value (1 for survival, 0 for cumulative hazard).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError

HORIZON = 21  # base year plus 20 follow-up years


@dataclass(frozen=True)
class SurvivalCurve:
    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray | None = None
    deaths: np.ndarray | None = None

    def at(self, t) -> np.ndarray | float:
        """Right-continuous evaluation of S at ``t`` (scalar or array)."""
        t_arr = np.asarray(t)
        idx = np.searchsorted(self.times, t_arr, side="right") - 1
        vals = np.where(idx >= 0, self.survival[np.clip(idx, 0, None)] if len(self.times) else 1.0, 1.0)
        return float(vals) if t_arr.ndim == 0 else vals

    def on_grid(self, horizon: int = HORIZON) -> np.ndarray:
        return self.at(np.arange(horizon))


@dataclass(frozen=True)
class CumHazardCurve:
    times: np.ndarray
    cumhazard: np.ndarray
    increments: np.ndarray

    def at(self, t) -> np.ndarray | float:
        t_arr = np.asarray(t)
        idx = np.searchsorted(self.times, t_arr, side="right") - 1
        vals = np.where(idx >= 0, self.cumhazard[np.clip(idx, 0, None)] if len(self.times) else 0.0, 0.0)
        return float(vals) if t_arr.ndim == 0 else vals


class Histogram(NamedTuple):
    values: np.ndarray
    counts: np.ndarray


def _event_table(durations, observed):
    d = np.asarray(durations)
    e = np.asarray(observed)
    if d.ndim != 1 or e.shape != d.shape:
        raise DataError("durations and observed must be 1-D sequences of equal length")
    if d.size == 0:
        raise DataError("empty input")
    if np.any(d < 0):
        raise DataError("negative duration")
    if not np.all(np.isin(e, (0, 1))):
        raise DataError("observed must be binary")
    times, inverse = np.unique(d, return_inverse=True)
    deaths = np.bincount(inverse, weights=e, minlength=len(times)).astype(np.int64)
    leaving = np.bincount(inverse, minlength=len(times))
    # subjects with duration >= t_i
    at_risk = d.size - np.concatenate(([0], np.cumsum(leaving)[:-1]))
    return times, at_risk.astype(np.int64), deaths


def km_fit(durations: Sequence, observed: Sequence) -> SurvivalCurve:
    """Kaplan-Meier product-limit estimate of the survival function."""
    times, n, d = _event_table(durations, observed)
    surv = np.cumprod(1.0 - d / n)
    return SurvivalCurve(times, surv, n, d)


def na_fit(durations: Sequence, observed: Sequence) -> CumHazardCurve:
    """Nelson-Aalen estimate of the cumulative hazard."""
    times, n, d = _event_table(durations, observed)
    inc = d / n
    return CumHazardCurve(times, np.cumsum(inc), inc)


def survival_from_cumhazard(h: CumHazardCurve) -> SurvivalCurve:
    return SurvivalCurve(h.times, np.exp(-h.cumhazard))


def ecdf_survival(ages_at_event: Sequence) -> tuple[Histogram, SurvivalCurve]:
    """Integer histogram and ``S = 1 - F`` for fully observed event ages."""
    a = np.asarray(ages_at_event, dtype=np.int64)
    if a.size == 0:
        raise DataError("empty input")
    values = np.arange(a.min(), a.max() + 1)
    counts = np.bincount(a - a.min())
    times, c = np.unique(a, return_counts=True)
    surv = 1.0 - np.cumsum(c) / a.size
    surv[-1] = 0.0
    return Histogram(values, counts), SurvivalCurve(times, surv, None, c)


def yearly_increments(h: CumHazardCurve, horizon: int = HORIZON) -> np.ndarray:
    """Cumulative-hazard jumps binned by whole year ``0 .. horizon-1``."""
    out = np.zeros(horizon)
    years = np.floor(h.times).astype(np.int64)
    keep = (years >= 0) & (years < horizon)
    np.add.at(out, years[keep], h.increments[keep])
    return out


def normalized_hazard(h: CumHazardCurve, horizon: int = HORIZON) -> np.ndarray:
    """Yearly hazard increments scaled so the largest equals 1 (all zeros stay zero)."""
    inc = yearly_increments(h, horizon)
    top = inc.max()
    return inc / (top if top > 0 else 1.0)


def write_survival_csv(curve: SurvivalCurve, path, horizon: int = HORIZON) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "S"))
        for t, s in zip(range(horizon), curve.on_grid(horizon)):
            w.writerow((t, repr(float(s))))


def write_cumhazard_csv(h: CumHazardCurve, path, horizon: int = HORIZON) -> None:
    inc = yearly_increments(h, horizon)
    norm = normalized_hazard(h, horizon)
    grid = h.at(np.arange(horizon))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "H", "increment", "normalized"))
        for t in range(horizon):
            w.writerow((t, repr(float(grid[t])), repr(float(inc[t])), repr(float(norm[t]))))


def read_curve_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {k: [] for k in reader.fieldnames}
        for rec in reader:
            for k in cols:
                cols[k].append(float(rec[k]))
    return {k: np.asarray(v) for k, v in cols.items()}
