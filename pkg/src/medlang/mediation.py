"""Sample-average natural direct and indirect effect estimators.

For one mediator with fitted per-fold tables g(m | t, x) and
f(y | m, t, x), each unit i contributes the inner sums

    nde_i = sum_m (f(m, 1, X_i) - f(m, 0, X_i)) * g(m | 0, X_i)
    nie_i = sum_m f(m, 0, X_i) * (g(m | 1, X_i) - g(m | 0, X_i))
    te_i  = sum_m (f(m, 1, X_i) g(m | 1, X_i) - f(m, 0, X_i) g(m | 0, X_i))

evaluated with the tables trained on the opposite fold, and the estimate is
the average over units. The reversed indirect effect swaps the reference
arm of f; per unit, te_i = nde_i + nie_reversed_i is an algebraic identity.

By default the inner sum is evaluated at each unit's own X_i; the
alternative reading that weights by the empirical marginal distribution of
X, independent of i, is available via x_weighting="marginal".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .glm import (
    CodedRecords,
    FittedMediatorModel,
    FittedOutcomeModel,
    _resolve,
    fit_mediator_model,
    fit_outcome_model,
)
from .measure import CausalRecord, Domains
from .seeding import derive_seed

X_WEIGHTINGS = ("unit", "marginal")

#: Attached to every estimate: the direct effect is only interpretable as
#: the full direct causal effect if every relevant mediator is included.
INTERPRETATION_CAVEAT = (
    "unless all relevant mediators are measured and included, one cannot "
    "interpret the estimand of the natural direct effect as the actual "
    "direct causal effect; read these estimates relative to the mediator "
    "set analyzed"
)

IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimates and percentile bootstrap intervals for one mediator."""

    mediator_name: str
    nde: float
    nie: float
    nie_reversed: float
    total_effect: float
    ci_level: float
    nde_ci: tuple[float, float]
    nie_ci: tuple[float, float]
    n_units: int
    n_bootstrap: int
    n_dropped_replicates: int = 0
    caveat: str = INTERPRETATION_CAVEAT

    def validate(self) -> None:
        for name, value in (
            ("nde", self.nde),
            ("nie", self.nie),
            ("nie_reversed", self.nie_reversed),
            ("total_effect", self.total_effect),
        ):
            if not -1.0 <= value <= 1.0:
                raise NumericalError(f"{name} = {value} outside [-1, 1] for a binary outcome")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if abs(self.total_effect - self.nde - self.nie_reversed) > IDENTITY_TOL:
            raise NumericalError(
                "decomposition identity violated: "
                f"te - nde - nie_reversed = {self.total_effect - self.nde - self.nie_reversed:.3e}"
            )
        for label, (lo, hi), point in (
            ("nde_ci", self.nde_ci, self.nde),
            ("nie_ci", self.nie_ci, self.nie),
        ):
            if not lo <= point <= hi:
                raise NumericalError(f"{label} [{lo}, {hi}] does not contain {point}")

    def to_dict(self) -> dict:
        return {
            "mediator": self.mediator_name,
            "nde": self.nde,
            "nie": self.nie,
            "nie_reversed": self.nie_reversed,
            "total_effect": self.total_effect,
            "ci_level": self.ci_level,
            "nde_ci": list(self.nde_ci),
            "nie_ci": list(self.nie_ci),
            "n_units": self.n_units,
            "n_bootstrap": self.n_bootstrap,
            "n_dropped_replicates": self.n_dropped_replicates,
            "caveat": self.caveat,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class EstimatorConfig:
    n_bootstrap: int = 1000
    seed: int = 0
    ci_level: float = 0.90
    x_weighting: str = "unit"
    domains: Domains | None = None

    def validate(self) -> None:
        if self.n_bootstrap != 0 and self.n_bootstrap < 100:
            raise ConfigError(
                f"n_bootstrap must be 0 (disabled) or >= 100, got {self.n_bootstrap}"
            )
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if self.x_weighting not in X_WEIGHTINGS:
            raise ConfigError(f"x_weighting must be one of {X_WEIGHTINGS}")


# ---------------------------------------------------------------------------
# Core sums
# ---------------------------------------------------------------------------


def _check_table(name: str, table: np.ndarray, layout: str) -> None:
    if np.isfinite(table).all():
        return
    bad = np.argwhere(~np.isfinite(table))[0]
    raise DataError(f"{name} table has a missing cell at {layout} = {tuple(int(v) for v in bad)}")


def _cell_effects(g_table: np.ndarray, f_table: np.ndarray):
    """Inner mediator sums per (fold, x) cell.

    g_table: (F, 2, n_x, K); f_table: (F, K, 2, n_x). Returns four
    (F, n_x) arrays: nde, nie, nie_reversed, te.
    """
    g0 = g_table[:, 0, :, :]
    g1 = g_table[:, 1, :, :]
    f0 = np.moveaxis(f_table[:, :, 0, :], 1, 2)
    f1 = np.moveaxis(f_table[:, :, 1, :], 1, 2)
    nde = ((f1 - f0) * g0).sum(axis=2)
    nie = (f0 * (g1 - g0)).sum(axis=2)
    nie_rev = (f1 * (g1 - g0)).sum(axis=2)
    te = (f1 * g1 - f0 * g0).sum(axis=2)
    return nde, nie, nie_rev, te


def _weights(
    coded: CodedRecords, rows: np.ndarray, n_folds: int, x_weighting: str
) -> tuple[np.ndarray, float]:
    """(fold, x) evaluation weights summing to the number of scored units."""
    n_x = coded.domains.n_x
    fold = coded.fold[rows]
    if fold.size == 0:
        raise DataError("no records to score")
    if int(fold.max()) >= n_folds:
        raise DataError(
            f"record fold {int(fold.max())} outside the fitted models' {n_folds} folds"
        )
    x = coded.x[rows]
    n = float(rows.size)
    if x_weighting == "unit":
        w = np.bincount(fold * n_x + x, minlength=n_folds * n_x).astype(float)
        return w.reshape(n_folds, n_x), n
    if x_weighting == "marginal":
        fold_counts = np.bincount(fold, minlength=n_folds).astype(float)
        x_counts = np.bincount(x, minlength=n_x).astype(float)
        return np.outer(fold_counts, x_counts / n), n
    raise ConfigError(f"x_weighting must be one of {X_WEIGHTINGS}")


def _models_effects(
    coded: CodedRecords,
    g: FittedMediatorModel,
    f: FittedOutcomeModel,
    rows: np.ndarray,
    x_weighting: str,
) -> tuple[float, float, float, float]:
    if g.mediator_name != f.mediator_name:
        raise DataError(
            f"model mediators differ: {g.mediator_name!r} vs {f.mediator_name!r}"
        )
    if g.domains != f.domains:
        raise DataError("mediator and outcome models were fitted over different domains")
    if g.n_folds != f.n_folds:
        raise DataError("mediator and outcome models carry different fold counts")
    _check_table("mediator", g.table, "(fold, t, x, m)")
    _check_table("outcome", f.table, "(fold, m, t, x)")
    nde_c, nie_c, nie_rev_c, te_c = _cell_effects(g.table, f.table)
    w, n = _weights(coded, rows, g.n_folds, x_weighting)
    return (
        float((w * nde_c).sum() / n),
        float((w * nie_c).sum() / n),
        float((w * nie_rev_c).sum() / n),
        float((w * te_c).sum() / n),
    )


def _as_rows(coded: CodedRecords) -> np.ndarray:
    return np.arange(coded.n_records)


def sa_nde(
    records: Sequence[CausalRecord] | CodedRecords,
    g: FittedMediatorModel,
    f: FittedOutcomeModel,
    x_weighting: str = "unit",
) -> float:
    """Cross-fitted sample-average natural direct effect."""
    coded = _resolve(records, g.domains)
    return _models_effects(coded, g, f, _as_rows(coded), x_weighting)[0]


def sa_nie(
    records: Sequence[CausalRecord] | CodedRecords,
    g: FittedMediatorModel,
    f: FittedOutcomeModel,
    x_weighting: str = "unit",
) -> float:
    """Cross-fitted sample-average natural indirect effect."""
    coded = _resolve(records, g.domains)
    return _models_effects(coded, g, f, _as_rows(coded), x_weighting)[1]


def sa_nie_reversed(
    records: Sequence[CausalRecord] | CodedRecords,
    g: FittedMediatorModel,
    f: FittedOutcomeModel,
    x_weighting: str = "unit",
) -> float:
    """Indirect effect evaluated under the treated arm (te - nde)."""
    coded = _resolve(records, g.domains)
    return _models_effects(coded, g, f, _as_rows(coded), x_weighting)[2]


def total_effect(
    records: Sequence[CausalRecord] | CodedRecords,
    g: FittedMediatorModel,
    f: FittedOutcomeModel,
    x_weighting: str = "unit",
) -> float:
    """Plug-in total effect; equals nde + nie_reversed up to rounding."""
    coded = _resolve(records, g.domains)
    return _models_effects(coded, g, f, _as_rows(coded), x_weighting)[3]


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


def _fit_and_estimate(
    coded: CodedRecords, mediator_name: str, rows: np.ndarray, x_weighting: str
) -> tuple[float, float, float, float]:
    g = fit_mediator_model(coded, mediator_name, rows=rows)
    f = fit_outcome_model(coded, mediator_name, rows=rows)
    return _models_effects(coded, g, f, rows, x_weighting)


def _present_levels(values: np.ndarray, size: int) -> np.ndarray:
    return np.bincount(values, minlength=size) > 0


def _collapsed(coded: CodedRecords, rows: np.ndarray, mediator_name: str,
               original: dict[str, np.ndarray]) -> bool:
    for name, base in original.items():
        if name == "__t__":
            now = _present_levels(coded.t[rows], 2)
        elif name == "__m__":
            now = _present_levels(
                coded.m[mediator_name][rows], coded.domains.mediator_sizes[mediator_name]
            )
        else:
            now = _present_levels(
                coded.x_levels[name][rows],
                len(dict(coded.domains.confounders)[name]),
            )
        if (base & ~now).any():
            return True
    return False


def bootstrap_effects(
    records: Sequence[CausalRecord] | CodedRecords,
    mediator_name: str,
    n_bootstrap: int,
    seed: int,
    ci_level: float = 0.90,
    x_weighting: str = "unit",
    domains: Domains | None = None,
    max_dropped_fraction: float = 0.10,
) -> EffectEstimate:
    """Point estimates plus percentile intervals from unit resampling.

    Every replicate resamples units with replacement within each fold
    (preserving the cross-fit protocol and fold sizes exactly), refits both
    nuisance models, and recomputes the effects. Replicates whose resample
    loses a covariate level present in the original data, or whose refit
    fails, are dropped and counted; more than ``max_dropped_fraction``
    dropped is an error. Replicate seeds are derived independently, so any
    execution order produces identical intervals.
    """
    if n_bootstrap != 0 and n_bootstrap < 100:
        raise ConfigError(f"n_bootstrap must be 0 (disabled) or >= 100, got {n_bootstrap}")
    if not 0.0 < ci_level < 1.0:
        raise ConfigError(f"ci_level must lie in (0, 1), got {ci_level}")
    coded = _resolve(records, domains)
    rows = _as_rows(coded)
    nde, nie, nie_rev, te = _fit_and_estimate(coded, mediator_name, rows, x_weighting)

    dropped = 0
    draws: list[tuple[float, float]] = []
    if n_bootstrap > 0:
        original = {"__t__": _present_levels(coded.t, 2),
                    "__m__": _present_levels(coded.m[mediator_name],
                                             coded.domains.mediator_sizes[mediator_name])}
        for name, levels in coded.domains.confounders:
            original[name] = _present_levels(coded.x_levels[name], len(levels))
        fold_rows = [np.nonzero(coded.fold == f)[0] for f in range(coded.n_folds)]
        for r in range(n_bootstrap):
            rng = np.random.default_rng(derive_seed(seed, f"replicate:{r}"))
            idx = np.concatenate(
                [fr[rng.integers(0, fr.size, size=fr.size)] for fr in fold_rows]
            )
            if _collapsed(coded, idx, mediator_name, original):
                dropped += 1
                continue
            try:
                b_nde, b_nie, _, _ = _fit_and_estimate(coded, mediator_name, idx, x_weighting)
            except NumericalError:
                dropped += 1
                continue
            draws.append((b_nde, b_nie))
        if dropped > max_dropped_fraction * n_bootstrap:
            raise NumericalError(
                f"{dropped}/{n_bootstrap} bootstrap replicates dropped "
                f"(> {max_dropped_fraction:.0%}): data too sparse for resampling"
            )

    if draws:
        arr = np.asarray(draws)
        lo_q, hi_q = (1.0 - ci_level) / 2.0, 1.0 - (1.0 - ci_level) / 2.0
        nde_lo, nde_hi = np.quantile(arr[:, 0], [lo_q, hi_q])
        nie_lo, nie_hi = np.quantile(arr[:, 1], [lo_q, hi_q])
        nde_ci = (min(float(nde_lo), nde), max(float(nde_hi), nde))
        nie_ci = (min(float(nie_lo), nie), max(float(nie_hi), nie))
    else:
        nde_ci = (nde, nde)
        nie_ci = (nie, nie)

    estimate = EffectEstimate(
        mediator_name=mediator_name,
        nde=nde,
        nie=nie,
        nie_reversed=nie_rev,
        total_effect=te,
        ci_level=ci_level,
        nde_ci=nde_ci,
        nie_ci=nie_ci,
        n_units=coded.n_records,
        n_bootstrap=n_bootstrap,
        n_dropped_replicates=dropped,
    )
    estimate.validate()
    return estimate


def estimate_all(
    records: Sequence[CausalRecord] | CodedRecords,
    mediator_names: Sequence[str],
    config: EstimatorConfig = EstimatorConfig(),
) -> list[EffectEstimate]:
    """Run the full pipeline per mediator, each independently.

    Per-mediator seeds are derived from the config seed and the mediator
    name, so an estimate is bit-identical whether the mediator runs alone
    or alongside others.
    """
    config.validate()
    coded = _resolve(records, config.domains)
    sizes = coded.domains.mediator_sizes
    unknown = [m for m in mediator_names if m not in sizes]
    if unknown:
        raise DataError(f"unknown mediators {unknown}; records carry {sorted(sizes)}")
    return [
        bootstrap_effects(
            coded,
            name,
            n_bootstrap=config.n_bootstrap,
            seed=derive_seed(config.seed, f"bootstrap:{name}"),
            ci_level=config.ci_level,
            x_weighting=config.x_weighting,
        )
        for name in mediator_names
    ]
