"""Chained balancing: scores as covariates, subclassification, diagnostics.

The core routine estimates one score per balancing contrast, treats those J
scores as covariates in an ordinary propensity analysis for a target
bifurcation, subclassifies on the chained score, and reports covariate mean
differences between the target's two groups before and after subclassing.

Group means are accumulated in exact rational arithmetic (float64 covariates
are dyadic rationals), so reported differences are invariant to the unit
order and identities between them hold exactly, not merely to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .contrasts import Contrast, assignment_indicators
from .data import Dataset
from .errors import (
    CspsError,
    EmptyGroup,
    OneClassOnly,
    TooFewUnits,
    UndefinedScores,
)
from .estimation import (
    ScoreVector,
    _predict_binary_matrix,
    empirical_csps,
    fit_binary_logistic,
    model_csps,
)

__all__ = [
    "AlgorithmConfig",
    "SubclassAssignment",
    "SubclassBalanceRow",
    "ContrastBalance",
    "BalanceReport",
    "chained_propensity",
    "subclassify",
    "covariate_mean_difference",
    "run_algorithm",
]


def _exact_mean(values) -> Fraction:
    """Exact mean of float64 values (each float is a dyadic rational)."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("mean of empty group")
    ratios = [v.as_integer_ratio() for v in vals]
    common = max(d for _, d in ratios)  # denominators are powers of two
    total = sum(n * (common // d) for n, d in ratios)
    return Fraction(total, common * len(vals))


@dataclass(frozen=True)
class AlgorithmConfig:
    """Settings for the chained balancing routine.

    ``estimator`` picks how the J balancing scores and the chained score are
    estimated: ``"empirical"`` uses exact cells (discrete covariates),
    ``"logistic"`` fits binary logistic models.  Subclassification defaults
    to quintiles; ``"exact"`` makes one subclass per distinct score value.
    """

    estimator: str = "logistic"
    subclass_method: str = "quantile"
    num_subclasses: int = 5
    ridge: float = 0.0
    max_iter: int = 100
    tol: float = 1e-8

    def __post_init__(self):
        if self.estimator not in ("empirical", "logistic"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.subclass_method not in ("exact", "quantile"):
            raise ValueError(f"unknown subclass method {self.subclass_method!r}")
        if self.num_subclasses < 1:
            raise ValueError("num_subclasses must be at least 1")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


class SubclassAssignment:
    """Subclass labels for the units of one bifurcation.

    ``labels[i]`` is a 1-based subclass id for units assigned to either
    group and 0 for everyone else.  After construction every subclass
    contains at least one unit from each group.
    """

    __slots__ = ("labels", "num_subclasses", "method")

    def __init__(self, labels, num_subclasses: int, method: str):
        lab = np.array(labels, dtype=int)
        lab.setflags(write=False)
        self.labels = lab
        self.num_subclasses = int(num_subclasses)
        self.method = method

    def members(self, subclass_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == subclass_id)


def _merge_one_class_groups(groups: list[np.ndarray], d: np.ndarray) -> list[np.ndarray]:
    """Merge groups lacking a +1 or a -1 unit into a neighbour toward the median."""
    groups = [g for g in groups if len(g)]
    while True:
        bad = next(
            (
                k
                for k, g in enumerate(groups)
                if not ((d[g] == 1).any() and (d[g] == -1).any())
            ),
            None,
        )
        if bad is None:
            return groups
        if len(groups) == 1:
            raise TooFewUnits(
                "subclasses cannot all contain both groups, even after merging"
            )
        target = bad + 1 if bad < (len(groups) - 1) / 2 else bad - 1
        groups[target] = np.concatenate([groups[target], groups[bad]])
        del groups[bad]


def subclassify(
    scores: ScoreVector,
    d_indicator,
    method: str = "quantile",
    num_subclasses: int = 5,
) -> SubclassAssignment:
    """Partition the bifurcation's units into subclasses of similar score.

    ``method="exact"`` gives one subclass per distinct score value among the
    eligible units (those with a nonzero indicator); ``method="quantile"``
    cuts at the s/S empirical quantiles, with boundary ties going to the
    lower subclass.  Subclasses missing one of the two groups are merged
    with the neighbouring subclass toward the median until every subclass
    contains both, which collapses degenerate splits instead of failing.
    Subclass ids are 1-based in ascending score order.
    """
    d = np.asarray(d_indicator, dtype=int)
    if len(d) != len(scores):
        raise ValueError("indicator length must match scores")
    eligible = np.flatnonzero(d != 0)
    if eligible.size == 0:
        raise TooFewUnits("no units are assigned to either group")
    if not ((d[eligible] == 1).any() and (d[eligible] == -1).any()):
        raise TooFewUnits("all eligible units fall in a single group")
    if not scores.defined_mask[eligible].all():
        raise UndefinedScores(
            f"{int((~scores.defined_mask[eligible]).sum())} eligible units have "
            "undefined scores"
        )

    if method == "exact":
        distinct = sorted({scores.values[i] for i in eligible})
        groups = [
            np.array([i for i in eligible if scores.values[i] == v], dtype=int)
            for v in distinct
        ]
        tag = "exact-values"
    elif method == "quantile":
        S = int(num_subclasses)
        if S < 1:
            raise ValueError("num_subclasses must be at least 1")
        vals = np.array([float(scores.values[i]) for i in eligible])
        if S == 1:
            groups = [eligible.copy()]
        else:
            bounds = np.quantile(vals, np.arange(1, S) / S)
            # label = number of boundaries strictly below the value, so ties
            # fall into the lower subclass
            which = np.searchsorted(bounds, vals, side="left")
            groups = [eligible[which == s] for s in range(S)]
        tag = f"quantile({S})"
    else:
        raise ValueError(f"unknown subclass method {method!r}")

    groups = _merge_one_class_groups(groups, d)
    labels = np.zeros(len(scores), dtype=int)
    for sid, g in enumerate(groups, start=1):
        labels[g] = sid
    return SubclassAssignment(labels, len(groups), tag)


@dataclass(frozen=True, eq=False)
class SubclassBalanceRow:
    """Group sizes, group means, and mean difference within one subclass."""

    subclass_id: int
    n_positive: int
    n_negative: int
    weight: Fraction  # share of the eligible units
    mean_positive_exact: tuple[Fraction, ...]
    mean_negative_exact: tuple[Fraction, ...]
    difference_exact: tuple[Fraction, ...]

    @property
    def mean_positive(self) -> np.ndarray:
        return np.array([float(v) for v in self.mean_positive_exact])

    @property
    def mean_negative(self) -> np.ndarray:
        return np.array([float(v) for v in self.mean_negative_exact])

    @property
    def difference(self) -> np.ndarray:
        return np.array([float(v) for v in self.difference_exact])


@dataclass(frozen=True, eq=False)
class ContrastBalance:
    """Balance diagnostics for one target contrast."""

    contrast: Contrast
    n_positive: int = 0
    n_negative: int = 0
    before_exact: tuple[Fraction, ...] | None = None
    after_exact: tuple[Fraction, ...] | None = None
    subclass_rows: tuple[SubclassBalanceRow, ...] | None = None
    error: str | None = None

    @property
    def before(self) -> np.ndarray | None:
        if self.before_exact is None:
            return None
        return np.array([float(v) for v in self.before_exact])

    @property
    def after(self) -> np.ndarray | None:
        if self.after_exact is None:
            return None
        return np.array([float(v) for v in self.after_exact])

    @property
    def num_subclasses(self) -> int:
        return len(self.subclass_rows) if self.subclass_rows else 0


@dataclass(frozen=True, eq=False)
class BalanceReport:
    """Per-target balance diagnostics over a shared covariate set."""

    covariate_names: tuple[str, ...]
    entries: tuple[ContrastBalance, ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _group_stats(X: np.ndarray, pos_idx, neg_idx):
    """Exact per-covariate means of the two groups and their difference."""
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        raise EmptyGroup("a comparison group is empty")
    mean_pos = tuple(_exact_mean(X[pos_idx, k]) for k in range(X.shape[1]))
    mean_neg = tuple(_exact_mean(X[neg_idx, k]) for k in range(X.shape[1]))
    diff = tuple(a - b for a, b in zip(mean_pos, mean_neg))
    return mean_pos, mean_neg, diff


def covariate_mean_difference(
    dataset: Dataset,
    target: Contrast,
    subclasses: SubclassAssignment | None = None,
) -> ContrastBalance:
    """Covariate mean differences between the target's two groups.

    Pooled (positive-group mean minus negative-group mean) always; when a
    subclass assignment is supplied, also the within-subclass differences and
    their average weighted by each subclass's share of eligible units.
    """
    d = assignment_indicators(target, dataset.treatments)
    X = dataset.covariates
    pos = np.flatnonzero(d == 1)
    neg = np.flatnonzero(d == -1)
    _, _, before = _group_stats(X, pos, neg)

    after = None
    rows = None
    if subclasses is not None:
        n_eligible = int(np.sum(subclasses.labels > 0))
        row_list = []
        K = dataset.num_covariates
        total = [Fraction(0)] * K
        for sid in range(1, subclasses.num_subclasses + 1):
            members = subclasses.members(sid)
            p = members[d[members] == 1]
            n = members[d[members] == -1]
            mean_p, mean_n, diff = _group_stats(X, p, n)
            weight = Fraction(len(members), n_eligible)
            row_list.append(
                SubclassBalanceRow(
                    subclass_id=sid,
                    n_positive=len(p),
                    n_negative=len(n),
                    weight=weight,
                    mean_positive_exact=mean_p,
                    mean_negative_exact=mean_n,
                    difference_exact=diff,
                )
            )
            for k in range(K):
                total[k] += weight * diff[k]
        after = tuple(total)
        rows = tuple(row_list)

    return ContrastBalance(
        contrast=target,
        n_positive=len(pos),
        n_negative=len(neg),
        before_exact=before,
        after_exact=after,
        subclass_rows=rows,
    )


def chained_propensity(
    dataset: Dataset,
    balancing: Sequence[Contrast],
    target: Contrast,
    estimator: str = "logistic",
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> ScoreVector:
    """Propensity score for the target fitted on the J balancing scores.

    First estimates one score per balancing contrast, then estimates the
    probability of the target's positive group given those J scores, using
    exact cells of the score tuple (``estimator="empirical"``) or a binary
    logistic fit (``estimator="logistic"``).  Scores are predicted for every
    unit.
    """
    balancing = list(balancing)
    if not balancing:
        raise ValueError("at least one balancing contrast is required")
    if estimator not in ("empirical", "logistic"):
        raise ValueError(f"unknown estimator {estimator!r}")

    if estimator == "empirical":
        base = [empirical_csps(dataset, c) for c in balancing]
    else:
        base = [
            model_csps(dataset, c, ridge=ridge, max_iter=max_iter, tol=tol)
            for c in balancing
        ]

    d = assignment_indicators(target, dataset.treatments)
    eligible = np.flatnonzero(d != 0)
    if not (d == 1).any() or not (d == -1).any():
        raise OneClassOnly("target bifurcation has an empty group")
    for j, sv in enumerate(base):
        if not sv.defined_mask[eligible].all():
            raise UndefinedScores(
                f"balancing score {balancing[j].describe()} is undefined on "
                "units of the target bifurcation"
            )

    if estimator == "empirical":
        values: list = [None] * dataset.n_units
        cells: dict[tuple, list[int]] = {}
        for i in range(dataset.n_units):
            if not all(sv.defined_mask[i] for sv in base):
                continue
            key = tuple(sv.values[i] for sv in base)
            cells.setdefault(key, []).append(i)
        for key, idx in cells.items():
            di = d[np.array(idx)]
            n_pos = int(np.sum(di == 1))
            n_neg = int(np.sum(di == -1))
            if n_pos + n_neg == 0:
                continue
            value = Fraction(n_pos, n_pos + n_neg)
            for i in idx:
                values[i] = value
        return ScoreVector(values)

    features = np.column_stack([sv.as_floats() for sv in base])
    model = fit_binary_logistic(
        features[eligible],
        (d[eligible] == 1),
        ridge=ridge,
        max_iter=max_iter,
        tol=tol,
    )
    scores = _predict_binary_matrix(model, features)
    return ScoreVector([float(s) for s in scores])


def run_algorithm(
    dataset: Dataset,
    balancing: Sequence[Contrast],
    targets: Sequence[Contrast],
    config: AlgorithmConfig = AlgorithmConfig(),
) -> BalanceReport:
    """Full chained-balancing pass over a list of target contrasts.

    For each target: chained propensity score, subclassification, and
    before/after covariate mean differences.  A failure for one target is
    recorded in its report entry without aborting the others.
    """
    entries = []
    for target in targets:
        try:
            scores = chained_propensity(
                dataset,
                balancing,
                target,
                estimator=config.estimator,
                ridge=config.ridge,
                max_iter=config.max_iter,
                tol=config.tol,
            )
            d = assignment_indicators(target, dataset.treatments)
            assignment = subclassify(
                scores, d, method=config.subclass_method,
                num_subclasses=config.num_subclasses,
            )
            entries.append(covariate_mean_difference(dataset, target, assignment))
        except CspsError as exc:
            entries.append(
                ContrastBalance(
                    contrast=target,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return BalanceReport(
        covariate_names=dataset.covariate_names, entries=tuple(entries)
    )
