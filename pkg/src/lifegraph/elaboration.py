"""Turn calendars into modelling datasets.

Two products come out of a set of calendars:

* event-pair observations, one row per event-bearing year that has a later
  event-bearing year, used as input to causal discovery;
* time-to-event records for one ``cause -> effect`` pair, with the covariates
  snapshotted in the cause year, used for survival modelling.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .calendar import AGE_GROUPS, EVENTS, MAX_CHILDREN, N_YEARS, PersonCalendar, age_group
from .errors import DataError

PAIR_EVENTS = ("new_car", "moving", "child_birth", "wedding")
PAIR_STATES = ("married", "children")
PAIR_COLUMNS = PAIR_EVENTS + PAIR_STATES + tuple(f"{e}_next" for e in PAIR_EVENTS)

CENSORED_DURATION = N_YEARS
TRANSITION_FLOOR = -(N_YEARS - 1)

GENERAL_KEYS = ("gender", "nationality", "relocations", "city_size")
INDEPENDENT_KEYS = ("age_group", "owns_home", "distance_to_work", "rides_car")
DEPENDENT_KEYS = ("cars", "children", "married")
TRANSITION_KEYS = tuple(f"tr_{e}" for e in EVENTS)
INDICATOR_KEYS = tuple(f"ind_{e}" for e in EVENTS)
COVARIATE_KEYS = GENERAL_KEYS + INDEPENDENT_KEYS + DEPENDENT_KEYS + TRANSITION_KEYS + INDICATOR_KEYS

CATEGORICAL_KEYS = frozenset(
    ("gender", "nationality", "age_group", "owns_home", "rides_car", "cars", "children", "married") + INDICATOR_KEYS
)


@dataclass(frozen=True)
class PairObservation:
    person_id: str
    year_idx: int
    new_car: int
    moving: int
    child_birth: int
    wedding: int
    married: int
    children: int
    new_car_next: int
    moving_next: int
    child_birth_next: int
    wedding_next: int

    def values(self) -> tuple[int, ...]:
        return tuple(getattr(self, c) for c in PAIR_COLUMNS)


@dataclass(frozen=True)
class CovariateSnapshot:
    """Covariates of one person read in the year of a cause event.

    ``transitions[e]`` is minus the number of years since ``e`` last occurred
    at or before that year (0 when it occurs in the same year), floored at -19
    when it never occurred; ``indicators[e]`` says whether it occurred at all.
    """

    gender: int
    nationality: int
    relocations: int
    city_size: int
    age_group: int
    owns_home: int
    distance_to_work: int
    rides_car: int
    cars: int
    children: int
    married: int
    transitions: Mapping[str, int] = field(default_factory=dict)
    indicators: Mapping[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict[str, int]:
        out = {k: getattr(self, k) for k in GENERAL_KEYS + INDEPENDENT_KEYS + DEPENDENT_KEYS}
        for e in EVENTS:
            out[f"tr_{e}"] = self.transitions[e]
        for e in EVENTS:
            out[f"ind_{e}"] = self.indicators[e]
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, int]) -> CovariateSnapshot:
        base = {k: int(d[k]) for k in GENERAL_KEYS + INDEPENDENT_KEYS + DEPENDENT_KEYS}
        return cls(
            **base,
            transitions={e: int(d[f"tr_{e}"]) for e in EVENTS},
            indicators={e: int(d[f"ind_{e}"]) for e in EVENTS},
        )

    def with_value(self, key: str, value: int) -> CovariateSnapshot:
        d = self.as_dict()
        if key not in d:
            raise KeyError(key)
        d[key] = value
        return CovariateSnapshot.from_dict(d)


@dataclass(frozen=True)
class TTERecord:
    person_id: str
    cause: str
    effect: str
    cause_year: int
    duration: int
    observed: int
    covariates: CovariateSnapshot


@dataclass(frozen=True)
class SplitDataset:
    train: list
    test: list
    strata: str = "age_group x nationality"


# ---------------------------------------------------------------------------
# snapshots


def snapshot(cal: PersonCalendar, year: int, groups: Sequence[tuple[int, int]] = AGE_GROUPS) -> CovariateSnapshot:
    """Covariate snapshot of ``cal`` at the 0-based year index ``year``."""
    y = cal.years[year]
    g = cal.general
    transitions, indicators = {}, {}
    for e in EVENTS:
        last = None
        for k in range(year, -1, -1):
            if getattr(cal.years[k], e):
                last = k
                break
        if last is None:
            transitions[e], indicators[e] = TRANSITION_FLOOR, 0
        else:
            transitions[e], indicators[e] = -(year - last), 1
    return CovariateSnapshot(
        gender=g.gender,
        nationality=g.nationality,
        relocations=g.relocations,
        city_size=g.city_size,
        age_group=age_group(y.age, groups),
        owns_home=y.owns_home,
        distance_to_work=y.distance_to_work,
        rides_car=y.rides_car,
        cars=y.cars,
        children=y.children,
        married=y.married,
        transitions=transitions,
        indicators=indicators,
    )


# ---------------------------------------------------------------------------
# event-pair observations


def extract_pair_observations(cals: Iterable[PersonCalendar]) -> list[PairObservation]:
    """One row per event-bearing year paired with the next event-bearing year.

    Only the four pair events count as event-bearing; the state variables are
    read in the current year and ``children`` is capped at 3. The last
    event-bearing year of a person has no successor and yields no row.
    """
    rows = []
    for cal in cals:
        bearing = [i for i, y in enumerate(cal.years) if any(getattr(y, e) for e in PAIR_EVENTS)]
        for cur, nxt in zip(bearing, bearing[1:]):
            y, yn = cal.years[cur], cal.years[nxt]
            rows.append(
                PairObservation(
                    cal.person_id,
                    cur + 1,
                    *(getattr(y, e) for e in PAIR_EVENTS),
                    y.married,
                    min(y.children, MAX_CHILDREN),
                    *(getattr(yn, e) for e in PAIR_EVENTS),
                )
            )
    return rows


def pair_matrix(rows: Sequence[PairObservation]) -> tuple[np.ndarray, list[str]]:
    data = np.array([r.values() for r in rows], dtype=np.int64).reshape(len(rows), len(PAIR_COLUMNS))
    return data, list(PAIR_COLUMNS)


def write_pair_observations(rows: Iterable[PairObservation], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("person_id", "year_idx") + PAIR_COLUMNS)
        for r in rows:
            w.writerow((r.person_id, r.year_idx) + r.values())


def read_pair_observations(path) -> list[PairObservation]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"person_id", "year_idx", *PAIR_COLUMNS} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            try:
                vals = [int(rec[c]) for c in ("year_idx",) + PAIR_COLUMNS]
            except ValueError as exc:
                raise DataError(f"{path}: line {reader.line_num}: {exc}") from None
            out.append(PairObservation(rec["person_id"], *vals))
    return out


# ---------------------------------------------------------------------------
# time-to-event records


def _check_pair(cause: str, effect: str) -> None:
    for e in (cause, effect):
        if e not in EVENTS:
            raise DataError(f"unknown event {e!r}; expected one of {EVENTS}")
    if cause == effect:
        raise DataError(f"cause and effect must differ (got {cause!r} twice)")


def extract_tte(
    cals: Iterable[PersonCalendar],
    cause: str,
    effect: str,
    groups: Sequence[tuple[int, int]] = AGE_GROUPS,
) -> list[TTERecord]:
    """Time-to-event records for ``cause -> effect``.

    Every occurrence of ``cause`` yields one record. The duration is the
    number of years until the first ``effect`` at or after the cause year
    (0 for the same year). When no effect follows within the calendar the
    record is censored: ``observed=0`` and ``duration=20``.
    """
    _check_pair(cause, effect)
    out = []
    for cal in cals:
        effect_years = cal.event_years(effect)
        for tc in cal.event_years(cause):
            te = next((k for k in effect_years if k >= tc), None)
            if te is None:
                duration, observed = CENSORED_DURATION, 0
            else:
                duration, observed = te - tc, 1
            out.append(TTERecord(cal.person_id, cause, effect, tc + 1, duration, observed, snapshot(cal, tc, groups)))
    return out


TTE_PREFIX = ("person_id", "cause", "effect", "duration", "observed", "cause_year")


def write_tte(records: Iterable[TTERecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TTE_PREFIX + COVARIATE_KEYS)
        for r in records:
            d = r.covariates.as_dict()
            w.writerow(
                (r.person_id, r.cause, r.effect, r.duration, r.observed, r.cause_year) + tuple(d[k] for k in COVARIATE_KEYS)
            )


def read_tte(path) -> list[TTERecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TTE_PREFIX + COVARIATE_KEYS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for rec in reader:
            try:
                cov = CovariateSnapshot.from_dict({k: rec[k] for k in COVARIATE_KEYS})
                out.append(
                    TTERecord(
                        rec["person_id"],
                        rec["cause"],
                        rec["effect"],
                        int(rec["cause_year"]),
                        int(rec["duration"]),
                        int(rec["observed"]),
                        cov,
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}: line {reader.line_num}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# splitting


def _stratum(r: TTERecord) -> tuple[int, int]:
    return (r.covariates.age_group, r.covariates.nationality)


def stratified_split(records: Sequence[TTERecord], train_frac: float = 0.6, seed=0, key=_stratum) -> SplitDataset:
    """Split ``records`` into train and test sets stratified by ``key``.

    Within each stratum, visited in sorted key order, the records are
    shuffled with a generator seeded by ``seed`` and the first
    ``round(train_frac * n)`` (halves rounded up) go to the training set.
    Both outputs keep the input order.
    """
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train_frac must lie in (0, 1), got {train_frac}")
    if len(records) == 0:
        raise DataError("cannot split an empty dataset")
    groups: dict = defaultdict(list)
    for i, r in enumerate(records):
        groups[key(r)].append(i)
    rng = np.random.default_rng(seed)
    in_train = np.zeros(len(records), dtype=bool)
    for k in sorted(groups):
        idx = np.asarray(groups[k])
        n_train = int(math.floor(train_frac * len(idx) + 0.5))
        in_train[rng.permutation(idx)[:n_train]] = True
    train = [r for r, t in zip(records, in_train) if t]
    test = [r for r, t in zip(records, in_train) if not t]
    return SplitDataset(train, test)
