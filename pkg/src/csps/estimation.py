"""Score estimation: exact-cell frequencies and logistic maximum likelihood.

The score of a bifurcation is the conditional probability, given covariates,
of landing in its positive group among units assigned to either group.  Two
estimators are provided: empirical frequencies over exact covariate cells
(kept as exact rationals), and Newton maximum likelihood for binary or
multinomial logistic models.

Scores are predicted for every unit, including units outside the bifurcation:
the score is a function of the covariates alone, and downstream chaining uses
it as a covariate for other contrasts.  Conditioning on membership happens
where the estimand requires it, not here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .contrasts import Contrast, _coerce, assignment_indicators
from .data import Dataset, build_cell_index
from .errors import (
    DimensionMismatch,
    MissingClass,
    OneClassOnly,
    SeparationDetected,
    SingularHessian,
    ZeroDenominator,
)

__all__ = [
    "BinaryLogisticModel",
    "MultinomialLogisticModel",
    "ScoreVector",
    "fit_binary_logistic",
    "fit_multinomial_logistic",
    "predict_binary",
    "predict_multinomial",
    "empirical_csps",
    "model_csps",
    "csps_from_treatment_probs",
    "bernoulli_log_likelihood",
    "bernoulli_gradient",
]

MAX_HALVINGS = 30
SEPARATION_RESIDUAL = 1e-6  # every unit fit this well means no finite optimum
SEPARATION_NORM = 1e6


def _acceptance_slack(value: float) -> float:
    # near the optimum the true gain of a Newton step can fall below the
    # float resolution of the total log-likelihood; accept within a few ulps
    return 8.0 * np.finfo(float).eps * (1.0 + abs(value))


def _sigmoid(z):
    # tanh form is overflow-safe for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _design(features: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(features.shape[0]), features])


def _as_feature_matrix(features) -> np.ndarray:
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if F.ndim != 2:
        raise ValueError("features must be a matrix (or a single column)")
    return F


def _canonical_order(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # Fit results must not depend on unit order; pin the accumulation order
    # by sorting rows lexicographically (identical rows are interchangeable).
    keys = [labels] + [features[:, k] for k in reversed(range(features.shape[1]))]
    return np.lexsort(keys)


def bernoulli_log_likelihood(features, labels, coefficients, ridge: float = 0.0) -> float:
    """Bernoulli log-likelihood, minus the ridge penalty on non-intercept terms."""
    X = _design(_as_feature_matrix(features))
    y = np.asarray(labels, dtype=float)
    w = np.asarray(coefficients, dtype=float)
    z = X @ w
    ll = float(y @ z - np.logaddexp(0.0, z).sum())
    if ridge:
        ll -= 0.5 * ridge * float(w[1:] @ w[1:])
    return ll


def bernoulli_gradient(features, labels, coefficients, ridge: float = 0.0) -> np.ndarray:
    """Gradient of :func:`bernoulli_log_likelihood` in the coefficients."""
    X = _design(_as_feature_matrix(features))
    y = np.asarray(labels, dtype=float)
    w = np.asarray(coefficients, dtype=float)
    g = X.T @ (y - _sigmoid(X @ w))
    if ridge:
        g[1:] -= ridge * w[1:]
    return g


@dataclass(frozen=True, eq=False)
class BinaryLogisticModel:
    """Fitted binary logistic coefficients (intercept first)."""

    coefficients: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    log_likelihood_path: tuple[float, ...]

    @property
    def num_features(self) -> int:
        return len(self.coefficients) - 1


@dataclass(frozen=True, eq=False)
class MultinomialLogisticModel:
    """Fitted multinomial logistic coefficients, baseline class pinned at zero.

    ``coefficients[t - 1]`` is the (P+1)-vector for class ``t`` (intercept
    first); the baseline row is identically zero.
    """

    coefficients: np.ndarray  # (T, P+1)
    baseline: int
    converged: bool
    iterations: int
    final_gradient_norm: float
    log_likelihood_path: tuple[float, ...]

    @property
    def num_classes(self) -> int:
        return self.coefficients.shape[0]

    @property
    def num_features(self) -> int:
        return self.coefficients.shape[1] - 1


def _standardise(F: np.ndarray):
    mu = F.mean(axis=0) if F.shape[0] else np.zeros(F.shape[1])
    sd = F.std(axis=0) if F.shape[0] else np.ones(F.shape[1])
    sd = np.where(sd == 0.0, 1.0, sd)
    return (F - mu) / sd, mu, sd


def _destandardise_row(w: np.ndarray, mu: np.ndarray, sd: np.ndarray) -> np.ndarray:
    out = w.copy()
    out[1:] = w[1:] / sd
    out[0] = w[0] - float((w[1:] * mu / sd).sum())
    return out


def fit_binary_logistic(
    features,
    labels,
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-8,
    standardize: bool = False,
) -> BinaryLogisticModel:
    """Maximise the Bernoulli log-likelihood by Newton steps with halving.

    Parameters
    ----------
    features:
        M x P matrix (an intercept column is added internally).
    labels:
        M booleans or 0/1 values; both classes must occur.
    ridge:
        Optional penalty on non-intercept coefficients.  With ridge 0 a
        perfectly separable dataset raises :class:`SeparationDetected`.
    tol:
        Convergence threshold on the (penalized) gradient norm.
    standardize:
        Fit on zero-mean unit-variance columns and map the coefficients back
        to the raw scale.  Convergence diagnostics refer to the scaled fit.
    """
    F = _as_feature_matrix(features)
    y = np.asarray(labels).astype(float)
    if y.ndim != 1 or y.shape[0] != F.shape[0]:
        raise ValueError("labels must be a vector matched to features")
    if y.size == 0:
        raise ValueError("empty dataset")
    if np.all(y == y[0]):
        raise OneClassOnly("labels contain a single class")
    if np.any((y != 0.0) & (y != 1.0)):
        raise ValueError("labels must be boolean or 0/1")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    order = _canonical_order(F, y)
    F, y = F[order], y[order]
    mu = sd = None
    if standardize:
        F, mu, sd = _standardise(F)

    X = _design(F)
    p_dim = X.shape[1]
    pen = np.zeros(p_dim)
    pen[1:] = ridge

    def penalised_ll(w):
        z = X @ w
        ll = float(y @ z - np.logaddexp(0.0, z).sum())
        return ll - 0.5 * float(pen @ (w * w))

    w = np.zeros(p_dim)
    ll_path = [penalised_ll(w)]
    grad_norm = np.inf
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        p = _sigmoid(X @ w)
        resid = y - p
        if ridge == 0.0 and np.max(np.abs(resid)) < SEPARATION_RESIDUAL:
            raise SeparationDetected(
                "every unit is fitted almost perfectly; the likelihood has no "
                "finite maximiser (retry with ridge > 0)"
            )
        g = X.T @ resid - pen * w
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < tol:
            converged = True
            iterations -= 1
            break
        weights = p * (1.0 - p)
        H = (X * weights[:, None]).T @ X + np.diag(pen)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian("Newton system is singular") from exc
        current = ll_path[-1]
        for _ in range(MAX_HALVINGS + 1):
            candidate = w + step
            new_ll = penalised_ll(candidate)
            if new_ll >= current - _acceptance_slack(current):
                break
            step = 0.5 * step
        else:
            raise SingularHessian(
                "step-halving exhausted without improving the log-likelihood"
            )
        w = candidate
        ll_path.append(new_ll)
        if ridge == 0.0 and float(np.linalg.norm(w)) > SEPARATION_NORM:
            raise SeparationDetected(
                "coefficient norm exceeded 1e6 while the likelihood keeps "
                "improving (retry with ridge > 0)"
            )
    else:
        # final gradient at the returned point
        g = X.T @ (y - _sigmoid(X @ w)) - pen * w
        grad_norm = float(np.linalg.norm(g))
        converged = grad_norm < tol

    if standardize:
        w = _destandardise_row(w, mu, sd)
    return BinaryLogisticModel(
        coefficients=w,
        converged=converged,
        iterations=iterations,
        final_gradient_norm=grad_norm,
        log_likelihood_path=tuple(ll_path),
    )


def fit_multinomial_logistic(
    features,
    labels,
    baseline: int = 1,
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-8,
    standardize: bool = False,
) -> MultinomialLogisticModel:
    """Multinomial logistic maximum likelihood with a pinned baseline class.

    Labels are integers in 1..T with T inferred as the largest label; every
    class must occur at least once.  The Newton loop shares the binary fit's
    contract: monotone step-halving, gradient-norm convergence, separation
    and singular-Hessian errors.
    """
    F = _as_feature_matrix(features)
    y = np.asarray(labels, dtype=int)
    if y.ndim != 1 or y.shape[0] != F.shape[0]:
        raise ValueError("labels must be a vector matched to features")
    if y.size == 0:
        raise ValueError("empty dataset")
    if y.min() < 1:
        raise ValueError("labels must be 1-based")
    T = int(y.max())
    present = set(np.unique(y).tolist())
    absent = [t for t in range(1, T + 1) if t not in present]
    if T < 2:
        raise MissingClass("labels contain a single class")
    if absent:
        raise MissingClass(f"classes {absent} never occur")
    if not 1 <= baseline <= T:
        raise ValueError(f"baseline must lie in 1..{T}")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    order = _canonical_order(F, y.astype(float))
    F, y = F[order], y[order]
    mu = sd = None
    if standardize:
        F, mu, sd = _standardise(F)

    X = _design(F)
    M, p_dim = X.shape
    free = [t for t in range(1, T + 1) if t != baseline]
    n_free = len(free)
    Y = np.zeros((M, T))
    Y[np.arange(M), y - 1] = 1.0
    pen_row = np.zeros(p_dim)
    pen_row[1:] = ridge
    pen = np.tile(pen_row, n_free)

    def probabilities(theta):
        B = np.zeros((T, p_dim))
        B[[t - 1 for t in free]] = theta.reshape(n_free, p_dim)
        Z = X @ B.T
        Z -= Z.max(axis=1, keepdims=True)
        E = np.exp(Z)
        return E / E.sum(axis=1, keepdims=True)

    def penalised_ll(theta):
        P = probabilities(theta)
        own = P[np.arange(M), y - 1]
        ll = float(np.log(np.maximum(own, 1e-300)).sum())
        return ll - 0.5 * float(pen @ (theta * theta))

    def gradient(theta, P):
        R = Y[:, [t - 1 for t in free]] - P[:, [t - 1 for t in free]]
        g = (X.T @ R).T.reshape(-1)
        return g - pen * theta

    theta = np.zeros(n_free * p_dim)
    ll_path = [penalised_ll(theta)]
    grad_norm = np.inf
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        P = probabilities(theta)
        own = P[np.arange(M), y - 1]
        if ridge == 0.0 and np.min(own) > 1.0 - SEPARATION_RESIDUAL:
            raise SeparationDetected(
                "every unit's own class is fitted almost perfectly; no finite "
                "maximiser (retry with ridge > 0)"
            )
        g = gradient(theta, P)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < tol:
            converged = True
            iterations -= 1
            break
        H = np.empty((n_free * p_dim, n_free * p_dim))
        for a, t in enumerate(free):
            for b, u in enumerate(free):
                pa = P[:, t - 1]
                wab = pa * ((1.0 if t == u else 0.0) - P[:, u - 1])
                block = (X * wab[:, None]).T @ X
                H[a * p_dim:(a + 1) * p_dim, b * p_dim:(b + 1) * p_dim] = block
        H += np.diag(pen)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian("Newton system is singular") from exc
        current = ll_path[-1]
        for _ in range(MAX_HALVINGS + 1):
            candidate = theta + step
            new_ll = penalised_ll(candidate)
            if new_ll >= current - _acceptance_slack(current):
                break
            step = 0.5 * step
        else:
            raise SingularHessian(
                "step-halving exhausted without improving the log-likelihood"
            )
        theta = candidate
        ll_path.append(new_ll)
        if ridge == 0.0 and float(np.linalg.norm(theta)) > SEPARATION_NORM:
            raise SeparationDetected(
                "coefficient norm exceeded 1e6 while the likelihood keeps "
                "improving (retry with ridge > 0)"
            )
    else:
        P = probabilities(theta)
        grad_norm = float(np.linalg.norm(gradient(theta, P)))
        converged = grad_norm < tol

    B = np.zeros((T, p_dim))
    B[[t - 1 for t in free]] = theta.reshape(n_free, p_dim)
    if standardize:
        for t in free:
            B[t - 1] = _destandardise_row(B[t - 1], mu, sd)
    return MultinomialLogisticModel(
        coefficients=B,
        baseline=baseline,
        converged=converged,
        iterations=iterations,
        final_gradient_norm=grad_norm,
        log_likelihood_path=tuple(ll_path),
    )


def predict_binary(model: BinaryLogisticModel, x) -> float:
    """Inverse-logit of the linear predictor at one covariate vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.num_features:
        raise DimensionMismatch(
            f"expected {model.num_features} features, got {x.shape[0]}"
        )
    z = model.coefficients[0] + float(model.coefficients[1:] @ x)
    return float(_sigmoid(z))


def _predict_binary_matrix(model: BinaryLogisticModel, F: np.ndarray) -> np.ndarray:
    if F.shape[1] != model.num_features:
        raise DimensionMismatch(
            f"expected {model.num_features} features, got {F.shape[1]}"
        )
    return _sigmoid(_design(F) @ model.coefficients)


def predict_multinomial(model: MultinomialLogisticModel, x) -> np.ndarray:
    """Softmax class probabilities at one covariate vector (sums to 1)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.num_features:
        raise DimensionMismatch(
            f"expected {model.num_features} features, got {x.shape[0]}"
        )
    z = model.coefficients @ np.concatenate([[1.0], x])
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


# ---------------------------------------------------------------------------
# score vectors


class ScoreVector:
    """Per-unit scores in [0, 1] with an explicit defined/undefined mask.

    Values are exact :class:`~fractions.Fraction` objects when produced by
    the empirical estimator and floats when produced by a model.  Undefined
    entries (cells without any group member) hold ``None``.
    """

    __slots__ = ("values", "defined_mask")

    def __init__(self, values: Sequence, defined_mask=None):
        vals = tuple(values)
        if defined_mask is None:
            mask = np.array([v is not None for v in vals], dtype=bool)
        else:
            mask = np.array(defined_mask, dtype=bool)
            if mask.shape != (len(vals),):
                raise ValueError("defined_mask length must match values")
        for v, ok in zip(vals, mask):
            if not ok:
                continue
            if v is None or not 0 <= v <= 1:
                raise ValueError(f"defined score {v!r} outside [0, 1]")
        self.values = vals
        self.defined_mask = mask
        self.defined_mask.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_exact(self) -> bool:
        return all(
            isinstance(v, (Fraction, int)) for v, ok in zip(self.values, self.defined_mask) if ok
        )

    def as_floats(self, fill: float = np.nan) -> np.ndarray:
        return np.array(
            [float(v) if ok else fill for v, ok in zip(self.values, self.defined_mask)]
        )


def empirical_csps(dataset: Dataset, contrast: Contrast) -> ScoreVector:
    """Score by exact-cell frequencies: share of the positive group per cell.

    Every unit in a cell receives the cell's value, an exact rational.
    Cells containing no group member at all are left undefined (masked).
    """
    if dataset.n_units == 0:
        raise ValueError("dataset is empty")
    if contrast.num_treatments != dataset.num_treatments:
        raise DimensionMismatch(
            f"contrast has {contrast.num_treatments} treatments, "
            f"dataset has {dataset.num_treatments}"
        )
    d = assignment_indicators(contrast, dataset.treatments)
    values: list = [None] * dataset.n_units
    for _, idx in build_cell_index(dataset):
        n_pos = int(np.sum(d[idx] == 1))
        n_neg = int(np.sum(d[idx] == -1))
        if n_pos + n_neg == 0:
            continue
        value = Fraction(n_pos, n_pos + n_neg)
        for i in idx:
            values[i] = value
    return ScoreVector(values)


def model_csps(
    dataset: Dataset,
    contrast: Contrast,
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-8,
    standardize: bool = False,
) -> ScoreVector:
    """Score by a binary logistic model fitted on the bifurcation's units.

    The fit uses only units assigned to one of the two groups, but predicts
    for all units, so the result is always fully defined.
    """
    if contrast.num_treatments != dataset.num_treatments:
        raise DimensionMismatch(
            f"contrast has {contrast.num_treatments} treatments, "
            f"dataset has {dataset.num_treatments}"
        )
    d = assignment_indicators(contrast, dataset.treatments)
    eligible = d != 0
    model = fit_binary_logistic(
        dataset.covariates[eligible],
        (d[eligible] == 1),
        ridge=ridge,
        max_iter=max_iter,
        tol=tol,
        standardize=standardize,
    )
    scores = _predict_binary_matrix(model, dataset.covariates)
    return ScoreVector([float(s) for s in scores])


def csps_from_treatment_probs(probs, contrast: Contrast):
    """Score implied by per-treatment assignment probabilities.

    Returns the probability mass on positive-coefficient treatments divided
    by the mass on all nonzero-coefficient treatments.  Exact inputs give an
    exact rational result.
    """
    p = [_coerce(v) for v in probs]
    if len(p) != contrast.num_treatments:
        raise DimensionMismatch(
            f"expected {contrast.num_treatments} probabilities, got {len(p)}"
        )
    if any(v < -1e-12 for v in p):
        raise ValueError("probabilities must be nonnegative")
    total = sum(p)
    if abs(float(total) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {float(total)!r}, expected 1")
    signs = contrast.sign()
    numerator = sum(v for v, s in zip(p, signs) if s > 0)
    denominator = sum(v for v, s in zip(p, signs) if s != 0)
    if denominator == 0:
        raise ZeroDenominator(
            "no probability mass on the treatments the contrast uses"
        )
    result = numerator / denominator
    return result if isinstance(result, Fraction) else float(result)
