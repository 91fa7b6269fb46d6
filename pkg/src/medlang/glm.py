"""Nuisance models: categorical GLMs materialized as finite lookup tables.

The mediator model is a multinomial logistic regression of the mediator on
treatment and confounder dummies; the outcome model is a logistic
regression of the outcome on mediator dummies, treatment, confounder
dummies, and a treatment-by-mediator interaction. All covariates are
categorical, so fitted values are materialized over the full finite grid,
which keeps the estimator's explicit sums exact and auditable.

Fitting runs on cell-aggregated sufficient statistics (counts are integers,
so results are bit-identical under any record permutation). Grid cells with
no training observations are filled with the Laplace pseudo-count default
(uniform over levels, 0.5 per class) and logged, never silently defaulted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np
from scipy.special import softmax, xlogy

from .errors import ConfigError, DataError, NumericalError
from .measure import CausalRecord, Domains
from .seeding import assign_folds

MAX_ITERATIONS = 100
CONVERGENCE_TOL = 1e-8
RIDGE = 1e-6


@dataclass(frozen=True)
class CrossFitPlan:
    """Seeded balanced partition of unit ids into test folds.

    Units in fold f are scored by models trained on every other fold, so
    the assignment is keyed by unit id, never by record position.
    """

    n_folds: int
    fold_of: Mapping[str, int]

    def test_ids(self, fold: int) -> frozenset[str]:
        return frozenset(uid for uid, f in self.fold_of.items() if f == fold)

    def train_ids(self, fold: int) -> frozenset[str]:
        return frozenset(uid for uid, f in self.fold_of.items() if f != fold)

    def validate(self) -> None:
        folds = set(self.fold_of.values())
        if folds != set(range(self.n_folds)):
            raise ConfigError(f"plan folds {sorted(folds)} do not cover 0..{self.n_folds - 1}")


def make_plan(unit_ids: Sequence[str], n_folds: int, seed: int) -> CrossFitPlan:
    plan = CrossFitPlan(n_folds=n_folds, fold_of=assign_folds(unit_ids, n_folds, seed))
    plan.validate()
    return plan


@dataclass(frozen=True)
class FoldDiagnostics:
    log_likelihood: float
    n_iterations: int
    smoothed_cells: tuple[tuple, ...]
    coefficients: np.ndarray


@dataclass(frozen=True)
class FittedMediatorModel:
    """Per-fold tables P(M = m | T = t, X = x) over the full finite grid."""

    mediator_name: str
    domains: Domains
    n_folds: int
    table: np.ndarray  # (n_folds, 2, n_x, K)
    diagnostics: tuple[FoldDiagnostics, ...]

    @property
    def n_levels(self) -> int:
        return self.table.shape[3]

    def validate(self) -> None:
        if not np.isfinite(self.table).all():
            raise NumericalError(f"mediator table for {self.mediator_name!r} has non-finite cells")
        if (self.table < 0).any() or (self.table > 1).any():
            raise NumericalError(f"mediator table for {self.mediator_name!r} outside [0, 1]")
        sums = self.table.sum(axis=3)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise NumericalError(
                f"mediator table for {self.mediator_name!r} rows do not sum to 1"
            )


@dataclass(frozen=True)
class FittedOutcomeModel:
    """Per-fold tables E[Y | M = m, T = t, X = x] over the full finite grid."""

    mediator_name: str
    domains: Domains
    n_folds: int
    table: np.ndarray  # (n_folds, K, 2, n_x)
    diagnostics: tuple[FoldDiagnostics, ...]

    def validate(self) -> None:
        if not np.isfinite(self.table).all():
            raise NumericalError(f"outcome table for {self.mediator_name!r} has non-finite cells")
        if (self.table < 0).any() or (self.table > 1).any():
            raise NumericalError(f"outcome table for {self.mediator_name!r} outside [0, 1]")


# ---------------------------------------------------------------------------
# Record encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CodedRecords:
    """Integer-coded view of a record sequence for fast aggregation."""

    unit_ids: tuple[str, ...]
    t: np.ndarray
    x: np.ndarray  # mixed-radix confounder index
    x_levels: Mapping[str, np.ndarray]  # per-confounder level positions
    m: Mapping[str, np.ndarray]
    y: np.ndarray
    fold: np.ndarray
    domains: Domains

    @property
    def n_records(self) -> int:
        return len(self.unit_ids)

    @property
    def n_folds(self) -> int:
        return int(self.fold.max()) + 1 if self.n_records else 0


def infer_domains(records: Sequence[CausalRecord]) -> Domains:
    """Fallback domain inference from observed levels.

    Prefer passing declared domains: inference cannot see levels that never
    occur, and mediator sizes are taken as max observed level + 1 (at least
    two).
    """
    if not records:
        raise DataError("cannot infer domains from an empty record sequence")
    names = tuple(sorted(records[0].x))
    mediators = tuple(sorted(records[0].m))
    levels: dict[str, set[str]] = {n: set() for n in names}
    sizes: dict[str, int] = {m: 2 for m in mediators}
    for rec in records:
        if tuple(sorted(rec.x)) != names or tuple(sorted(rec.m)) != mediators:
            raise DataError(f"record {rec.unit_id}: inconsistent variable names")
        for n in names:
            levels[n].add(str(rec.x[n]))
        for m in mediators:
            sizes[m] = max(sizes[m], rec.m[m] + 1)
    return Domains(
        confounders=tuple((n, tuple(sorted(levels[n]))) for n in names),
        mediators=tuple((m, sizes[m]) for m in mediators),
    )


def encode_records(records: Sequence[CausalRecord], domains: Domains) -> CodedRecords:
    n = len(records)
    t = np.empty(n, dtype=np.int64)
    y = np.empty(n, dtype=np.int64)
    fold = np.empty(n, dtype=np.int64)
    x = np.zeros(n, dtype=np.int64)
    x_levels = {name: np.empty(n, dtype=np.int64) for name, _ in domains.confounders}
    m = {name: np.empty(n, dtype=np.int64) for name, _ in domains.mediators}
    for i, rec in enumerate(records):
        if rec.t not in (0, 1) or rec.y not in (0, 1):
            raise DataError(f"record {rec.unit_id}: t and y must be binary")
        t[i] = rec.t
        y[i] = rec.y
        fold[i] = rec.fold
        idx = 0
        for name, levels in domains.confounders:
            value = str(rec.x[name])
            try:
                pos = levels.index(value)
            except ValueError:
                raise DataError(
                    f"record {rec.unit_id}: confounder {name!r} level {value!r} not in domain"
                )
            x_levels[name][i] = pos
            idx = idx * len(levels) + pos
        x[i] = idx
        for name, size in domains.mediators:
            level = rec.m.get(name)
            if level is None or not 0 <= level < size:
                raise DataError(
                    f"record {rec.unit_id}: mediator {name!r} level {level!r} outside domain"
                )
            m[name][i] = level
    return CodedRecords(
        unit_ids=tuple(rec.unit_id for rec in records),
        t=t,
        x=x,
        x_levels=x_levels,
        m=m,
        y=y,
        fold=fold,
        domains=domains,
    )


# ---------------------------------------------------------------------------
# Weighted categorical GLM on aggregated cells
# ---------------------------------------------------------------------------


def fit_categorical_glm(
    design: np.ndarray,
    counts: np.ndarray,
    ridge: float = RIDGE,
    max_iterations: int = MAX_ITERATIONS,
    tol: float = CONVERGENCE_TOL,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Newton/IRLS fit of a multinomial logit on aggregated rows.

    design: (R, d) covariate rows; counts: (R, K) observation counts per
    response level. Level 0 is the reference. Returns (probs (R, K),
    coefficients (K-1, d), iterations, penalized log-likelihood). A ridge
    term keeps the step well defined under separation or collinearity.
    """
    n_rows, d = design.shape
    n_levels = counts.shape[1]
    if n_levels < 2:
        raise ConfigError("response needs at least two levels")
    totals = counts.sum(axis=1).astype(float)
    coef = np.zeros((n_levels - 1, d))
    n_params = (n_levels - 1) * d
    identity = np.eye(n_params)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        scores = np.hstack([np.zeros((n_rows, 1)), design @ coef.T])
        probs = softmax(scores, axis=1)
        grad = (counts[:, 1:] - totals[:, None] * probs[:, 1:]).T @ design - ridge * coef
        hessian = np.empty((n_params, n_params))
        for a in range(n_levels - 1):
            for b in range(n_levels - 1):
                w = totals * probs[:, a + 1] * ((1.0 if a == b else 0.0) - probs[:, b + 1])
                hessian[a * d : (a + 1) * d, b * d : (b + 1) * d] = (design * w[:, None]).T @ design
        hessian += ridge * identity
        try:
            step = np.linalg.solve(hessian, grad.ravel()).reshape(n_levels - 1, d)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"IRLS step failed at iteration {iterations}: {exc}") from exc
        coef = coef + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    if not converged:
        raise NumericalError(
            f"IRLS did not converge in {max_iterations} iterations "
            f"(last max step {np.max(np.abs(step)):.3e})"
        )
    scores = np.hstack([np.zeros((n_rows, 1)), design @ coef.T])
    probs = softmax(scores, axis=1)
    loglik = float(xlogy(counts, probs).sum() - 0.5 * ridge * (coef ** 2).sum())
    return probs, coef, iterations, loglik


def _x_dummy_columns(domains: Domains) -> np.ndarray:
    """Dummy block for the enumerated confounder grid, reference level 0."""
    n_x = domains.n_x
    widths = [len(levels) for _, levels in domains.confounders]
    n_cols = sum(w - 1 for w in widths)
    block = np.zeros((n_x, n_cols))
    for idx in range(n_x):
        rest = idx
        positions = []
        for width in reversed(widths):
            rest, pos = divmod(rest, width)
            positions.append(pos)
        positions.reverse()
        col = 0
        for width, pos in zip(widths, positions):
            if pos > 0:
                block[idx, col + pos - 1] = 1.0
            col += width - 1
    return block


def _mediator_design(domains: Domains) -> np.ndarray:
    """Rows over cells (t, x) in cell order t * n_x + x."""
    n_x = domains.n_x
    xblock = _x_dummy_columns(domains)
    rows = []
    for t in (0, 1):
        for ix in range(n_x):
            rows.append(np.concatenate([[1.0, float(t)], xblock[ix]]))
    return np.asarray(rows)


def _outcome_design(domains: Domains, n_levels: int) -> np.ndarray:
    """Rows over cells (m, t, x) in cell order (m * 2 + t) * n_x + x.

    Includes the treatment-by-mediator interaction columns.
    """
    n_x = domains.n_x
    xblock = _x_dummy_columns(domains)
    rows = []
    for m in range(n_levels):
        m_dummies = np.zeros(n_levels - 1)
        if m > 0:
            m_dummies[m - 1] = 1.0
        for t in (0, 1):
            for ix in range(n_x):
                rows.append(
                    np.concatenate(
                        [[1.0], m_dummies, [float(t)], xblock[ix], float(t) * m_dummies]
                    )
                )
    return np.asarray(rows)


def _resolve(records_or_coded, domains: Domains | None) -> CodedRecords:
    if isinstance(records_or_coded, CodedRecords):
        return records_or_coded
    records = list(records_or_coded)
    if domains is None:
        domains = infer_domains(records)
    return encode_records(records, domains)


def _apply_plan(coded: CodedRecords, plan: CrossFitPlan | None) -> tuple[np.ndarray, int]:
    if plan is None:
        if coded.n_records == 0:
            raise DataError("no records to fit")
        n_folds = coded.n_folds
        if n_folds < 2:
            raise ConfigError("records carry fewer than 2 folds and no plan was given")
        return coded.fold, n_folds
    plan.validate()
    try:
        fold = np.asarray([plan.fold_of[uid] for uid in coded.unit_ids], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"unit {exc.args[0]!r} missing from cross-fit plan") from exc
    return fold, plan.n_folds


def _default_mediator(domains: Domains, mediator_name: str | None) -> str:
    sizes = domains.mediator_sizes
    if mediator_name is None:
        if len(sizes) == 1:
            return next(iter(sizes))
        raise DataError(f"records carry mediators {sorted(sizes)}; name the one to fit")
    if mediator_name not in sizes:
        raise DataError(f"unknown mediator {mediator_name!r}")
    return mediator_name


def fit_mediator_model(
    records: Sequence[CausalRecord] | CodedRecords,
    mediator_name: str | None = None,
    plan: CrossFitPlan | None = None,
    domains: Domains | None = None,
    rows: np.ndarray | None = None,
) -> FittedMediatorModel:
    """Fit P(M | T, X) per fold and materialize the full (t, x) grid.

    ``rows`` restricts fitting to a row subset (bootstrap resamples pass
    resampled index arrays); by default all records participate.
    """
    coded = _resolve(records, domains)
    domains = coded.domains
    mediator_name = _default_mediator(domains, mediator_name)
    sizes = domains.mediator_sizes
    n_levels = sizes[mediator_name]
    fold, n_folds = _apply_plan(coded, plan)
    idx = np.arange(coded.n_records) if rows is None else rows
    n_x = domains.n_x
    design = _mediator_design(domains)
    n_cells = 2 * n_x

    table = np.empty((n_folds, 2, n_x, n_levels))
    diagnostics = []
    m_all = coded.m[mediator_name]
    for f in range(n_folds):
        train = idx[fold[idx] != f]
        if train.size == 0:
            raise DataError(f"fold {f}: empty training set")
        cell = coded.t[train] * n_x + coded.x[train]
        counts = np.bincount(cell * n_levels + m_all[train], minlength=n_cells * n_levels)
        counts = counts.reshape(n_cells, n_levels).astype(float)
        probs, coef, iters, loglik = fit_categorical_glm(design, counts)
        empty = counts.sum(axis=1) == 0
        probs[empty] = 1.0 / n_levels
        table[f] = probs.reshape(2, n_x, n_levels)
        smoothed = tuple(
            (int(c // n_x), domains.x_assignment(int(c % n_x))) for c in np.nonzero(empty)[0]
        )
        diagnostics.append(
            FoldDiagnostics(
                log_likelihood=loglik,
                n_iterations=iters,
                smoothed_cells=smoothed,
                coefficients=coef,
            )
        )
    model = FittedMediatorModel(
        mediator_name=mediator_name,
        domains=domains,
        n_folds=n_folds,
        table=table,
        diagnostics=tuple(diagnostics),
    )
    model.validate()
    return model


def fit_outcome_model(
    records: Sequence[CausalRecord] | CodedRecords,
    mediator_name: str | None = None,
    plan: CrossFitPlan | None = None,
    domains: Domains | None = None,
    rows: np.ndarray | None = None,
    interaction: bool = True,
) -> FittedOutcomeModel:
    """Fit E[Y | M, T, X] per fold and materialize the full (m, t, x) grid.

    The treatment-by-mediator interaction is included by default because
    the direct/indirect decomposition is only additive without it.
    """
    coded = _resolve(records, domains)
    domains = coded.domains
    mediator_name = _default_mediator(domains, mediator_name)
    sizes = domains.mediator_sizes
    n_levels = sizes[mediator_name]
    fold, n_folds = _apply_plan(coded, plan)
    idx = np.arange(coded.n_records) if rows is None else rows
    n_x = domains.n_x
    design = _outcome_design(domains, n_levels)
    if not interaction:
        design = design[:, : design.shape[1] - (n_levels - 1)]
    n_cells = n_levels * 2 * n_x

    table = np.empty((n_folds, n_levels, 2, n_x))
    diagnostics = []
    m_all = coded.m[mediator_name]
    for f in range(n_folds):
        train = idx[fold[idx] != f]
        if train.size == 0:
            raise DataError(f"fold {f}: empty training set")
        cell = (m_all[train] * 2 + coded.t[train]) * n_x + coded.x[train]
        n_cell = np.bincount(cell, minlength=n_cells).astype(float)
        y_cell = np.bincount(cell, weights=coded.y[train].astype(float), minlength=n_cells)
        counts = np.stack([n_cell - y_cell, y_cell], axis=1)
        probs, coef, iters, loglik = fit_categorical_glm(design, counts)
        expected = probs[:, 1].copy()
        empty = n_cell == 0
        expected[empty] = 0.5
        table[f] = expected.reshape(n_levels, 2, n_x)
        smoothed = tuple(
            (int(c // (2 * n_x)), int((c // n_x) % 2), domains.x_assignment(int(c % n_x)))
            for c in np.nonzero(empty)[0]
        )
        diagnostics.append(
            FoldDiagnostics(
                log_likelihood=loglik,
                n_iterations=iters,
                smoothed_cells=smoothed,
                coefficients=coef,
            )
        )
    model = FittedOutcomeModel(
        mediator_name=mediator_name,
        domains=domains,
        n_folds=n_folds,
        table=table,
        diagnostics=tuple(diagnostics),
    )
    model.validate()
    return model


# ---------------------------------------------------------------------------
# CSV export for audit
# ---------------------------------------------------------------------------


def _as_model_list(models) -> list:
    return list(models) if isinstance(models, (list, tuple)) else [models]


def write_mediator_table_csv(
    models: FittedMediatorModel | Sequence[FittedMediatorModel], stream: IO[str]
) -> None:
    models = _as_model_list(models)
    names = list(models[0].domains.confounder_names)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["fold", "mediator", "m", "t"] + names + ["value"])
    for model in models:
        if list(model.domains.confounder_names) != names:
            raise DataError("models in one export must share confounder domains")
        n_folds, _, n_x, n_levels = model.table.shape
        for f in range(n_folds):
            for m in range(n_levels):
                for t in (0, 1):
                    for ix in range(n_x):
                        x = model.domains.x_assignment(ix)
                        writer.writerow(
                            [f, model.mediator_name, m, t]
                            + [x[n] for n in names]
                            + [repr(float(model.table[f, t, ix, m]))]
                        )


def write_outcome_table_csv(
    models: FittedOutcomeModel | Sequence[FittedOutcomeModel], stream: IO[str]
) -> None:
    models = _as_model_list(models)
    names = list(models[0].domains.confounder_names)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["fold", "mediator", "m", "t"] + names + ["value"])
    for model in models:
        if list(model.domains.confounder_names) != names:
            raise DataError("models in one export must share confounder domains")
        n_folds, n_levels, _, n_x = model.table.shape
        for f in range(n_folds):
            for m in range(n_levels):
                for t in (0, 1):
                    for ix in range(n_x):
                        x = model.domains.x_assignment(ix)
                        writer.writerow(
                            [f, model.mediator_name, m, t]
                            + [x[n] for n in names]
                            + [repr(float(model.table[f, m, t, ix]))]
                        )
