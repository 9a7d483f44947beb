"""Cox proportional hazards regression for time-to-event records.

Fitting minimises the Efron-corrected negative log partial likelihood plus
an L2 penalty ``(l2_scale / 2) * ||beta||^2`` with damped Newton-Raphson.
The baseline cumulative hazard is the Breslow estimate at the fitted
coefficients. Covariates are encoded against a :class:`CovariateSchema`:
categorical attributes one-hot with the lowest observed level as
reference, discrete attributes standardised by their sample mean and sd.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .elaboration import CATEGORICAL_KEYS, COVARIATE_KEYS, CovariateSnapshot, TTERecord
from .errors import ConvergenceError, DataError, DataWarning, NumericalError, SeparationError
from .univariate import HORIZON, CumHazardCurve, SurvivalCurve

DEFAULT_L2 = 0.1
GRAD_TOL = 1e-7
REL_TOL = 1e-9
MAX_ITER = 100
STEP_TOL = 1e-6
MAX_ABS_BETA = 20.0


# ---------------------------------------------------------------------------
# encoding


@dataclass(frozen=True)
class Column:
    name: str
    source: str
    level: int | None = None


@dataclass
class CovariateSchema:
    """How snapshot attributes map to design-matrix columns."""

    categorical: dict[str, tuple[int, ...]] = field(default_factory=dict)
    numeric: dict[str, tuple[float, float]] = field(default_factory=dict)
    dropped: dict[str, float] = field(default_factory=dict)
    sources: tuple[str, ...] = ()

    @property
    def columns(self) -> list[Column]:
        cols = []
        for src in self.sources:
            if src in self.categorical:
                cols.extend(Column(f"{src}={lvl}", src, lvl) for lvl in self.categorical[src][1:])
            elif src in self.numeric:
                cols.append(Column(src, src))
        return cols

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def knows(self, source: str) -> bool:
        return source in self.categorical or source in self.numeric or source in self.dropped

    def levels(self, source: str) -> tuple:
        if source in self.categorical:
            return self.categorical[source]
        if source in self.dropped:
            return (self.dropped[source],)
        raise DataError(f"{source!r} is not a categorical covariate of this model")

    def encode_rows(self, rows: Sequence[Mapping[str, float]]) -> np.ndarray:
        cols = self.columns
        out = np.zeros((len(rows), len(cols)))
        for j, c in enumerate(cols):
            vals = np.fromiter((r[c.source] for r in rows), dtype=np.float64, count=len(rows))
            if c.level is None:
                mean, sd = self.numeric[c.source]
                out[:, j] = (vals - mean) / sd
            else:
                out[:, j] = vals == c.level
        for src, levels in self.categorical.items():
            seen = {r[src] for r in rows}
            unseen = seen - set(levels)
            if unseen:
                raise DataError(f"unseen level(s) {sorted(unseen)} for categorical covariate {src!r}")
        return out

    def encode_row(self, row: Mapping[str, float]) -> np.ndarray:
        return self.encode_rows([row])[0]

    def decode_row(self, x: Sequence[float]) -> dict[str, float]:
        """Invert :meth:`encode_row` back to attribute values (dropped ones included)."""
        out = dict(self.dropped)
        x = np.asarray(x, dtype=float)
        by_source: dict[str, list[tuple[Column, float]]] = {}
        for c, v in zip(self.columns, x):
            by_source.setdefault(c.source, []).append((c, v))
        for src, levels in self.categorical.items():
            hot = [c.level for c, v in by_source.get(src, []) if v > 0.5]
            out[src] = hot[0] if hot else levels[0]
        for src, (mean, sd) in self.numeric.items():
            (c, v), = by_source[src]
            out[src] = v * sd + mean
        return out

    def to_dict(self) -> dict:
        return {
            "sources": list(self.sources),
            "categorical": {k: list(v) for k, v in self.categorical.items()},
            "numeric": {k: {"mean": m, "sd": s} for k, (m, s) in self.numeric.items()},
            "dropped": dict(self.dropped),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> CovariateSchema:
        return cls(
            categorical={k: tuple(v) for k, v in d["categorical"].items()},
            numeric={k: (v["mean"], v["sd"]) for k, v in d["numeric"].items()},
            dropped=dict(d["dropped"]),
            sources=tuple(d["sources"]),
        )


@dataclass
class DesignMatrix:
    X: np.ndarray
    schema: CovariateSchema
    durations: np.ndarray
    observed: np.ndarray

    @property
    def columns(self) -> list[str]:
        return self.schema.column_names


def _as_row(obj) -> Mapping[str, float]:
    if isinstance(obj, TTERecord):
        return obj.covariates.as_dict()
    if isinstance(obj, CovariateSnapshot):
        return obj.as_dict()
    return obj


def build_schema(rows: Sequence[Mapping[str, float]], sources: Sequence[str] = COVARIATE_KEYS) -> CovariateSchema:
    """Derive an encoding schema from observed rows; constant attributes are dropped with a warning."""
    schema = CovariateSchema(sources=tuple(sources))
    for src in sources:
        vals = np.array([r[src] for r in rows], dtype=np.float64)
        uniq = np.unique(vals)
        if len(uniq) < 2:
            schema.dropped[src] = float(uniq[0]) if len(uniq) else 0.0
            warnings.warn(f"covariate {src!r} is constant and was dropped", DataWarning, stacklevel=3)
            continue
        if src in CATEGORICAL_KEYS:
            schema.categorical[src] = tuple(int(u) for u in uniq)
        else:
            schema.numeric[src] = (float(vals.mean()), float(vals.std(ddof=1)))
    return schema


def encode(records: Sequence, schema: CovariateSchema | None = None) -> DesignMatrix:
    """Encode TTE records into a design matrix.

    When ``schema`` is omitted it is derived from ``records`` (see
    :func:`build_schema`); pass a fitted model's schema to encode new data
    consistently.
    """
    if len(records) == 0:
        raise DataError("cannot encode an empty record set")
    rows = [_as_row(r) for r in records]
    if schema is None:
        schema = build_schema(rows)
    X = schema.encode_rows(rows)
    durations = np.array([getattr(r, "duration", np.nan) for r in records], dtype=np.float64)
    observed = np.array([getattr(r, "observed", 0) for r in records], dtype=np.int64)
    return DesignMatrix(X, schema, durations, observed)


# ---------------------------------------------------------------------------
# objective


def neg_log_partial_likelihood(beta, X, durations, observed, l2_scale: float = DEFAULT_L2):
    """Penalised negative Efron log partial likelihood with gradient and Hessian.

    Returns ``(value, gradient, hessian)``. Only uncensored subjects
    contribute likelihood terms; everyone with ``T_j >= T_i`` is in the risk
    set of subject ``i``.
    """
    if isinstance(X, DesignMatrix):
        X = X.X
    beta = np.asarray(beta, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or beta.shape != (X.shape[1],):
        raise DataError(f"beta of shape {beta.shape} does not match {X.shape[1]} columns")
    if not np.all(np.isfinite(beta)):
        raise NumericalError("non-finite coefficient vector")
    T = np.asarray(durations, dtype=np.float64)
    E = np.asarray(observed, dtype=np.float64)
    order = np.argsort(T, kind="stable")
    ll, g, h = _kernels.efron_terms(np.ascontiguousarray(X[order]), T[order], E[order], beta)
    value = -ll + 0.5 * l2_scale * float(beta @ beta)
    grad = -np.asarray(g) + l2_scale * beta
    hess = -np.asarray(h) + l2_scale * np.eye(len(beta))
    return value, grad, hess


@dataclass
class FitResult:
    beta: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    history: list[float]
    converged_by: str

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.gradient))) if self.gradient.size else 0.0


def newton_fit(
    X,
    durations,
    observed,
    l2_scale: float = DEFAULT_L2,
    max_iter: int = MAX_ITER,
    grad_tol: float = GRAD_TOL,
    rel_tol: float = REL_TOL,
    column_names: Sequence[str] | None = None,
) -> FitResult:
    """Damped Newton-Raphson on the penalised objective.

    Each step is halved until the objective does not increase, so the
    recorded ``history`` is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    names = list(column_names) if column_names is not None else [f"x{j}" for j in range(p)]
    beta = np.zeros(p)
    f, g, H = neg_log_partial_likelihood(beta, X, durations, observed, l2_scale)
    history = [f]
    if p == 0:
        return FitResult(beta, f, g, 0, history, "gradient")
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        # a small gradient alone is not enough: under separation both g and H
        # vanish while the Newton step stays O(1)
        small_step = np.max(np.abs(step)) < STEP_TOL
        if np.max(np.abs(g)) < grad_tol and small_step:
            return FitResult(beta, f, g, it - 1, history, "gradient")
        t = 1.0
        while True:
            cand = beta - t * step
            fc, gc, Hc = neg_log_partial_likelihood(cand, X, durations, observed, l2_scale)
            if np.isfinite(fc) and fc <= f:
                break
            t *= 0.5
            if t < 1e-12:
                # no descent along the Newton direction: numerically at the minimum
                return FitResult(beta, f, g, it, history, "stalled")
        rel = abs(f - fc) / max(abs(f), 1.0)
        beta, f, g, H = cand, fc, gc, Hc
        history.append(f)
        big = np.flatnonzero(np.abs(beta) > MAX_ABS_BETA)
        if big.size:
            col = names[big[0]]
            raise SeparationError(
                f"coefficient of {col!r} diverged (|beta| > {MAX_ABS_BETA}); likely separation",
                column=col,
                diagnostics={"iterations": it, "beta": beta.tolist()},
            )
        if rel < rel_tol and small_step:
            return FitResult(beta, f, g, it, history, "relative_change")
    raise ConvergenceError(
        f"Newton-Raphson did not converge in {max_iter} iterations",
        diagnostics={"iterations": max_iter, "value": f, "grad_norm": float(np.max(np.abs(g)))},
    )


def breslow_baseline(X, durations, observed, beta) -> CumHazardCurve:
    """Breslow cumulative baseline hazard at the distinct event times."""
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(durations, dtype=np.float64)
    E = np.asarray(observed)
    risk = np.exp(X @ np.asarray(beta, dtype=np.float64))
    times = np.unique(T[E > 0])
    deaths = np.array([np.count_nonzero((T == t) & (E > 0)) for t in times], dtype=np.float64)
    denom = np.array([risk[T >= t].sum() for t in times])
    inc = deaths / denom
    return CumHazardCurve(times, np.cumsum(inc), inc)


# ---------------------------------------------------------------------------
# model


@dataclass
class CoxModel:
    beta: np.ndarray
    schema: CovariateSchema
    baseline: CumHazardCurve
    l2_scale: float
    diagnostics: dict

    @property
    def columns(self) -> list[str]:
        return self.schema.column_names

    def linear_predictor(self, items: Sequence) -> np.ndarray:
        rows = [_as_row(r) for r in items]
        if not rows:
            return np.zeros(0)
        return self.schema.encode_rows(rows) @ self.beta

    def baseline_on_grid(self, horizon: int = HORIZON) -> np.ndarray:
        return self.baseline.at(np.arange(horizon))

    def survival_matrix(self, items: Sequence, horizon: int = HORIZON) -> np.ndarray:
        """Predicted ``S(t | x)`` for each item (rows) over years ``0 .. horizon-1``."""
        eta = self.linear_predictor(items)
        return np.exp(-np.outer(np.exp(eta), self.baseline_on_grid(horizon)))

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "beta": {name: float(b) for name, b in zip(self.columns, self.beta)},
            "baseline": {
                "times": [float(t) for t in self.baseline.times],
                "cumhazard": [float(h) for h in self.baseline.cumhazard],
            },
            "l2_scale": self.l2_scale,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> CoxModel:
        schema = CovariateSchema.from_dict(d["schema"])
        beta = np.array([d["beta"][c] for c in schema.column_names], dtype=np.float64)
        times = np.asarray(d["baseline"]["times"], dtype=np.float64)
        cum = np.asarray(d["baseline"]["cumhazard"], dtype=np.float64)
        inc = np.diff(np.r_[0.0, cum])
        return cls(beta, schema, CumHazardCurve(times, cum, inc), d["l2_scale"], dict(d["diagnostics"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> CoxModel:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_cox(records: Sequence[TTERecord], l2_scale: float = DEFAULT_L2, **newton_kw) -> CoxModel:
    if len(records) < 2:
        raise DataError(f"need at least 2 records to fit, got {len(records)}")
    if not any(r.observed for r in records):
        raise DataError("no uncensored records")
    dm = encode(records)
    res = newton_fit(dm.X, dm.durations, dm.observed, l2_scale, column_names=dm.columns, **newton_kw)
    baseline = breslow_baseline(dm.X, dm.durations, dm.observed, res.beta)
    diagnostics = {
        "iterations": res.iterations,
        "neg_log_likelihood": res.value,
        "grad_norm": res.grad_norm,
        "converged_by": res.converged_by,
        "n_records": len(records),
        "n_events": int(dm.observed.sum()),
    }
    return CoxModel(res.beta, dm.schema, baseline, l2_scale, diagnostics)


# ---------------------------------------------------------------------------
# prediction


@dataclass(frozen=True)
class AveragedCurve:
    times: np.ndarray
    mean: np.ndarray
    sd: np.ndarray


def predict_survival(model: CoxModel, snapshot, horizon: int = HORIZON) -> SurvivalCurve:
    """``S(t | x) = exp(-H0(t) * exp(beta . x))`` over years ``0 .. horizon-1``."""
    return SurvivalCurve(np.arange(horizon), model.survival_matrix([snapshot], horizon)[0])


def average_survival(model: CoxModel, records: Sequence, horizon: int = HORIZON) -> AveragedCurve:
    """Pointwise mean and population sd of the predicted curves of ``records``."""
    if len(records) == 0:
        raise DataError("no records to average")
    S = model.survival_matrix(records, horizon)
    return AveragedCurve(np.arange(horizon), S.mean(axis=0), S.std(axis=0))


def conditioned_curves(model: CoxModel, records: Sequence, covariate: str, horizon: int = HORIZON) -> dict:
    """Marginal survival curve per level of ``covariate``.

    For each level every record's snapshot has ``covariate`` overridden with
    that level, the other attributes keep their observed values, and the
    predicted curves are averaged.
    """
    if not model.schema.knows(covariate):
        raise DataError(f"unknown covariate {covariate!r}")
    rows = [dict(_as_row(r)) for r in records]
    if covariate in model.schema.numeric:
        levels = sorted({r[covariate] for r in rows})
    else:
        levels = model.schema.levels(covariate)
    out = {}
    for lvl in levels:
        for r in rows:
            r[covariate] = lvl
        S = model.survival_matrix(rows, horizon)
        out[lvl] = SurvivalCurve(np.arange(horizon), S.mean(axis=0))
    return out


def c_index(scores, durations, observed) -> float:
    """Concordance of risk ``scores`` with observed durations.

    Admissible ordered pairs have an uncensored first member ``i`` and a
    second member ``j != i`` with ``T_j >= T_i``. A pair is concordant when
    ``i`` has the higher risk score; score ties count one half.
    """
    s = np.asarray(scores, dtype=np.float64)
    T = np.asarray(durations, dtype=np.float64)
    E = np.asarray(observed, dtype=np.float64)
    if not (s.shape == T.shape == E.shape) or s.ndim != 1:
        raise DataError("scores, durations and observed must be 1-D and of equal length")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(T))):
        raise DataError("scores and durations must be finite")
    num, count = _kernels.concordance_counts(s, T, E)
    if count == 0:
        raise DataError("no admissible pairs for the concordance index")
    return num / count
