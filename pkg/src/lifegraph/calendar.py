"""Person-year life-course calendars: data model, validation, CSV I/O and a
seeded synthetic generator with a known ground-truth event process.

A calendar covers a fixed 20-year window. Each year carries the state
attributes (age, home ownership, cars, distance to work, car commuting,
children, marital status) and five binary life-event flags.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CalendarFormatError, DataError, DataWarning

N_YEARS = 20
EVENTS = ("new_car", "moving", "child_birth", "wedding", "divorce")
STATE_FIELDS = ("age", "owns_home", "cars", "distance_to_work", "rides_car", "children", "married")
GENERAL_FIELDS = ("gender", "nationality", "relocations", "city_size")
MAX_CARS = 2
MAX_CHILDREN = 3
MAX_DISTANCE = 100

# inclusive age bounds of the conditioning groups; the two middle cut points are configurable
AGE_GROUPS = ((18, 21), (22, 27), (28, 35), (36, 45), (46, 55))

CSV_HEADER = (
    "person_id",
    "year_idx",
    "age",
    "owns_home",
    "cars",
    "distance_to_work",
    "rides_car",
    "children",
    "married",
    "new_car",
    "moving",
    "child_birth",
    "wedding",
    "divorce",
    "gender",
    "nationality",
    "relocations",
    "city_size",
)

_BINARY_YEAR = ("owns_home", "rides_car", "married") + EVENTS
_DOMAINS_YEAR = {
    "cars": (0, MAX_CARS),
    "children": (0, MAX_CHILDREN),
    "distance_to_work": (0, MAX_DISTANCE),
}
_DOMAINS_GENERAL = {
    "gender": (0, 1),
    "nationality": (0, 1),
    "relocations": (0, 9),
    "city_size": (0, 7),
}


@dataclass(frozen=True)
class YearRecord:
    age: int
    owns_home: int = 0
    cars: int = 0
    distance_to_work: int = 0
    rides_car: int = 0
    children: int = 0
    married: int = 0
    new_car: int = 0
    moving: int = 0
    child_birth: int = 0
    wedding: int = 0
    divorce: int = 0

    def events(self) -> tuple[str, ...]:
        """Names of the events flagged in this year."""
        return tuple(e for e in EVENTS if getattr(self, e))


@dataclass(frozen=True)
class GeneralAttributes:
    gender: int = 0
    nationality: int = 0
    relocations: int = 0
    city_size: int = 0


@dataclass(frozen=True)
class PersonCalendar:
    person_id: str
    years: tuple[YearRecord, ...]
    general: GeneralAttributes = field(default_factory=GeneralAttributes)

    def __post_init__(self):
        object.__setattr__(self, "person_id", str(self.person_id))
        object.__setattr__(self, "years", tuple(self.years))

    def event_years(self, event: str) -> list[int]:
        """0-based indices of the years in which ``event`` is flagged."""
        return [i for i, y in enumerate(self.years) if getattr(y, event)]


@dataclass(frozen=True)
class Violation:
    rule: str
    year_idx: int | None
    message: str

    def __str__(self):
        where = "" if self.year_idx is None else f" (year {self.year_idx})"
        return f"{self.rule}{where}: {self.message}"


def age_group(age: int, groups: Sequence[tuple[int, int]] = AGE_GROUPS) -> int:
    """Index of the age group containing ``age``.

    Ages below the first group map to group 0 and ages above the last group
    map to the last one.
    """
    for i, (lo, hi) in enumerate(groups):
        if lo <= age <= hi:
            return i
    return 0 if age < groups[0][0] else len(groups) - 1


def age_group_label(index: int, groups: Sequence[tuple[int, int]] = AGE_GROUPS) -> str:
    lo, hi = groups[index]
    return f"[{lo},{hi}]"


# ---------------------------------------------------------------------------
# validation


def validate_calendar(cal: PersonCalendar) -> list[Violation]:
    """Check every calendar invariant; return one violation per broken rule instance.

    Year indices in the returned violations are 1-based, as in the CSV.
    """
    out: list[Violation] = []
    years = cal.years
    if len(years) != N_YEARS:
        out.append(Violation("length", None, f"expected {N_YEARS} year records, got {len(years)}"))

    for name, (lo, hi) in _DOMAINS_GENERAL.items():
        v = getattr(cal.general, name)
        if not lo <= v <= hi:
            out.append(Violation("domain", None, f"{name}={v} outside [{lo}, {hi}]"))

    for i, y in enumerate(years, start=1):
        for name in _BINARY_YEAR:
            v = getattr(y, name)
            if v not in (0, 1):
                out.append(Violation("domain", i, f"{name}={v} is not binary"))
        for name, (lo, hi) in _DOMAINS_YEAR.items():
            v = getattr(y, name)
            if not lo <= v <= hi:
                out.append(Violation("domain", i, f"{name}={v} outside [{lo}, {hi}]"))

    for i in range(1, len(years)):
        prev, cur = years[i - 1], years[i]
        idx = i + 1
        if cur.age != prev.age + 1:
            out.append(Violation("age_step", idx, f"age {prev.age} -> {cur.age}"))
        if cur.cars < prev.cars:
            out.append(Violation("cars_monotone", idx, f"cars {prev.cars} -> {cur.cars}"))
        elif cur.cars > prev.cars and not cur.new_car:
            out.append(Violation("cars_change", idx, "cars increased without new_car"))
        if cur.children < prev.children:
            out.append(Violation("children_monotone", idx, f"children {prev.children} -> {cur.children}"))
        elif cur.children > prev.children and not cur.child_birth:
            out.append(Violation("children_change", idx, "children increased without child_birth"))
        if cur.child_birth and cur.children != min(prev.children + 1, MAX_CHILDREN):
            out.append(
                Violation("child_birth_increment", idx, f"child_birth but children {prev.children} -> {cur.children}")
            )
        if prev.married == 0 and cur.married == 1 and not cur.wedding:
            out.append(Violation("married_transition", idx, "married 0 -> 1 without wedding"))
        if prev.married == 1 and cur.married == 0 and not cur.divorce:
            out.append(Violation("married_transition", idx, "married 1 -> 0 without divorce"))
    return out


# ---------------------------------------------------------------------------
# CSV I/O


def write_calendars(cals: Iterable[PersonCalendar], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for cal in cals:
            g = cal.general
            for idx, y in enumerate(cal.years, start=1):
                writer.writerow(
                    [cal.person_id, idx]
                    + [getattr(y, f) for f in STATE_FIELDS]
                    + [getattr(y, e) for e in EVENTS]
                    + [g.gender, g.nationality, g.relocations, g.city_size]
                )


def _parse_int(raw: str, column: str, line: int) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise CalendarFormatError(f"column {column!r}: expected integer, got {raw!r}", line) from None


def read_calendars(path) -> list[PersonCalendar]:
    """Read calendars from the long person-year CSV format.

    Rows are grouped by ``person_id`` in order of first appearance and
    ordered by ``year_idx`` within a person. ``cars`` and ``children`` above
    their category caps are clamped with a :class:`DataWarning`.
    """
    rows: dict[str, dict[int, YearRecord]] = {}
    generals: dict[str, tuple[GeneralAttributes, int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise CalendarFormatError(f"unexpected header {header!r}", 1)
        for raw in reader:
            line = reader.line_num
            if not raw:
                continue
            if len(raw) != len(CSV_HEADER):
                raise CalendarFormatError(f"expected {len(CSV_HEADER)} fields, got {len(raw)}", line)
            rec = dict(zip(CSV_HEADER, raw))
            pid = rec["person_id"].strip()
            if not pid:
                raise CalendarFormatError("empty person_id", line)
            vals = {k: _parse_int(rec[k], k, line) for k in CSV_HEADER[1:]}
            year_idx = vals.pop("year_idx")
            if not 1 <= year_idx <= N_YEARS:
                raise CalendarFormatError(f"year_idx {year_idx} outside [1, {N_YEARS}]", line)
            for name, cap in (("cars", MAX_CARS), ("children", MAX_CHILDREN)):
                if vals[name] > cap:
                    warnings.warn(
                        f"line {line}: {name}={vals[name]} clamped to {cap}", DataWarning, stacklevel=2
                    )
                    vals[name] = cap
            general = GeneralAttributes(**{k: vals.pop(k) for k in GENERAL_FIELDS})
            person = rows.setdefault(pid, {})
            if year_idx in person:
                raise CalendarFormatError(f"duplicate row for person {pid!r}, year {year_idx}", line)
            if pid in generals:
                if generals[pid][0] != general:
                    raise CalendarFormatError(
                        f"general attributes of person {pid!r} differ from line {generals[pid][1]}", line
                    )
            else:
                generals[pid] = (general, line)
            person[year_idx] = YearRecord(**vals)
    return [
        PersonCalendar(pid, tuple(years[k] for k in sorted(years)), generals[pid][0])
        for pid, years in rows.items()
    ]


# ---------------------------------------------------------------------------
# synthetic generation

SNAPSHOT_STATE_KEYS = (
    "gender",
    "nationality",
    "relocations",
    "city_size",
    "age_group",
    "owns_home",
    "distance_to_work",
    "rides_car",
    "cars",
    "children",
    "married",
)

DEFAULT_COVARIATES = {
    "gender": 0.5,
    "nationality": 0.85,
    "owns_home": 0.4,
    "rides_car": 0.5,
    "married": 0.0,
    "start_age": [18, 36],
    "cars": [0.5, 0.35, 0.15],
    "children": [0.85, 0.1, 0.04, 0.01],
    "relocations": None,
    "city_size": None,
    "distance_to_work_mean": 15.0,
}
DEFAULT_ROOT_P = 0.2


@dataclass(frozen=True)
class EdgeSpec:
    """Ground-truth transition ``cause -> effect``.

    The waiting time in whole years after the cause year is geometric with
    support starting at 0: ``P(G > k) = (1 - p) ** ((k + 1) * exp(beta . x))``,
    i.e. proportional hazards on a geometric baseline with success
    probability ``geometric_p``. ``beta`` maps snapshot attribute names (see
    ``SNAPSHOT_STATE_KEYS``) to log-hazard ratios applied to the raw values.
    ``min_gap`` shifts the support so the effect never follows sooner than
    that many years.
    """

    cause: str
    effect: str
    geometric_p: float
    beta: Mapping[str, float] = field(default_factory=dict)
    min_gap: int = 0


@dataclass(frozen=True)
class GroundTruthSpec:
    events: tuple[str, ...]
    edges: tuple[EdgeSpec, ...]
    covariates: Mapping = field(default_factory=dict)
    roots: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: Mapping) -> GroundTruthSpec:
        try:
            edges = tuple(
                EdgeSpec(e["from"], e["to"], float(e["geometric_p"]), dict(e.get("beta", {})), int(e.get("min_gap", 0)))
                for e in doc["edges"]
            )
            return cls(
                events=tuple(doc["events"]),
                edges=edges,
                covariates=dict(doc.get("covariates", {})),
                roots={k: float(v) for k, v in doc.get("roots", {}).items()},
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed ground-truth spec: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> GroundTruthSpec:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "events": list(self.events),
            "edges": [
                {"from": e.cause, "to": e.effect, "geometric_p": e.geometric_p, "beta": dict(e.beta), "min_gap": e.min_gap}
                for e in self.edges
            ],
            "covariates": dict(self.covariates),
            "roots": dict(self.roots),
            "seed": self.seed,
        }

    def parents(self, event: str) -> list[str]:
        return [e.cause for e in self.edges if e.effect == event]

    def topological_order(self) -> list[str]:
        """Events in a deterministic topological order; raises on cycles."""
        indeg = {e: 0 for e in self.events}
        for edge in self.edges:
            indeg[edge.effect] += 1
        order = []
        ready = sorted(e for e, d in indeg.items() if d == 0)
        while ready:
            e = ready.pop(0)
            order.append(e)
            for edge in self.edges:
                if edge.cause == e:
                    indeg[edge.effect] -= 1
                    if indeg[edge.effect] == 0:
                        ready.append(edge.effect)
                        ready.sort()
        if len(order) != len(self.events):
            raise DataError(f"ground-truth event graph is cyclic: {sorted(set(self.events) - set(order))}")
        return order

    def check(self) -> None:
        for e in self.events:
            if e not in EVENTS:
                raise DataError(f"unknown event {e!r}; expected one of {EVENTS}")
        for edge in self.edges:
            for end in (edge.cause, edge.effect):
                if end not in self.events:
                    raise DataError(f"edge {edge.cause}->{edge.effect} references undeclared event {end!r}")
            if edge.cause == edge.effect:
                raise DataError(f"self-loop on {edge.cause!r}")
            if not 0.0 < edge.geometric_p <= 1.0:
                raise DataError(f"geometric_p of {edge.cause}->{edge.effect} must lie in (0, 1]")
            if edge.min_gap < 0:
                raise DataError(f"min_gap of {edge.cause}->{edge.effect} must be >= 0")
            for k, v in edge.beta.items():
                if k not in SNAPSHOT_STATE_KEYS:
                    raise DataError(f"edge {edge.cause}->{edge.effect}: unknown covariate {k!r}")
                if not math.isfinite(v):
                    raise DataError(f"edge {edge.cause}->{edge.effect}: non-finite log-hazard ratio for {k!r}")
        for k, p in self.roots.items():
            if k not in self.events:
                raise DataError(f"root probability for undeclared event {k!r}")
            if not 0.0 < p <= 1.0:
                raise DataError(f"root probability of {k!r} must lie in (0, 1]")
        self.topological_order()


def _draw_level(rng, probs, n_levels):
    if probs is None:
        return int(rng.integers(0, n_levels))
    p = np.asarray(probs, dtype=float)
    return int(rng.choice(len(p), p=p / p.sum()))


def _snapshot_values(general: GeneralAttributes, state: dict) -> dict:
    return {
        "gender": general.gender,
        "nationality": general.nationality,
        "relocations": general.relocations,
        "city_size": general.city_size,
        "age_group": age_group(state["age"]),
        "owns_home": state["owns_home"],
        "distance_to_work": state["distance_to_work"],
        "rides_car": state["rides_car"],
        "cars": state["cars"],
        "children": state["children"],
        "married": state["married"],
    }


def _draw_distance(rng, mean):
    return int(min(MAX_DISTANCE, round(rng.exponential(mean))))


def _simulate_person(spec: GroundTruthSpec, order, cov, rng, person_id) -> PersonCalendar:
    general = GeneralAttributes(
        gender=int(rng.random() < cov["gender"]),
        nationality=int(rng.random() < cov["nationality"]),
        relocations=_draw_level(rng, cov["relocations"], 10),
        city_size=_draw_level(rng, cov["city_size"], 8),
    )
    lo, hi = cov["start_age"]
    state = {
        "age": int(rng.integers(lo, hi + 1)),
        "owns_home": int(rng.random() < cov["owns_home"]),
        "cars": _draw_level(rng, cov["cars"], MAX_CARS + 1),
        "distance_to_work": _draw_distance(rng, cov["distance_to_work_mean"]),
        "rides_car": int(rng.random() < cov["rides_car"]),
        "children": _draw_level(rng, cov["children"], MAX_CHILDREN + 1),
        "married": int(rng.random() < cov["married"]),
    }
    pending: dict[int, set[str]] = {}
    for e in order:
        if not spec.parents(e):
            t = int(rng.geometric(spec.roots.get(e, DEFAULT_ROOT_P)))
            if t <= N_YEARS:
                pending.setdefault(t, set()).add(e)

    out_edges = {e: [edge for edge in spec.edges if edge.cause == e] for e in order}
    years = []
    for t in range(1, N_YEARS + 1):
        if t > 1:
            state["age"] += 1
        flags = dict.fromkeys(EVENTS, 0)
        todo = pending.pop(t, set())
        # topological order lets same-year (zero-gap) effects fire after their cause
        for e in order:
            if e not in todo:
                continue
            if e == "wedding" and state["married"]:
                continue
            if e == "divorce" and not state["married"]:
                continue
            flags[e] = 1
            if e == "new_car":
                state["cars"] = min(state["cars"] + 1, MAX_CARS)
                state["rides_car"] = int(rng.random() < cov["rides_car"])
            elif e == "moving":
                state["distance_to_work"] = _draw_distance(rng, cov["distance_to_work_mean"])
                state["owns_home"] = int(rng.random() < cov["owns_home"])
            elif e == "child_birth":
                state["children"] = min(state["children"] + 1, MAX_CHILDREN)
            elif e == "wedding":
                state["married"] = 1
            elif e == "divorce":
                state["married"] = 0
            x = _snapshot_values(general, state)
            for edge in out_edges[e]:
                lin = sum(b * x[k] for k, b in edge.beta.items())
                p_x = 1.0 - (1.0 - edge.geometric_p) ** math.exp(lin)
                gap = edge.min_gap + int(rng.geometric(p_x)) - 1 if p_x > 0 else N_YEARS + 1
                te = t + gap
                if te == t:
                    todo.add(edge.effect)
                elif te <= N_YEARS:
                    pending.setdefault(te, set()).add(edge.effect)
        years.append(YearRecord(**state, **flags))
    return PersonCalendar(person_id, tuple(years), general)


def generate_synthetic(spec: GroundTruthSpec, n_persons: int) -> list[PersonCalendar]:
    """Draw ``n_persons`` calendars from the ground-truth process in ``spec``.

    Root events (no parents) occur once at a geometric year drawn with
    ``spec.roots[event]`` (default 0.2). Every occurrence of a cause schedules
    one occurrence of each of its effects after a proportional-hazards
    geometric gap, evaluated on the calendar state of the cause year.
    Weddings while married and divorces while unmarried are skipped.
    Output is a pure function of ``spec`` (including its seed) and ``n_persons``.
    """
    if n_persons < 1:
        raise DataError("n_persons must be >= 1")
    spec.check()
    order = spec.topological_order()
    cov = {**DEFAULT_COVARIATES, **spec.covariates}
    rng = np.random.default_rng(spec.seed)
    width = max(5, len(str(n_persons)))
    return [_simulate_person(spec, order, cov, rng, f"p{i:0{width}d}") for i in range(n_persons)]

