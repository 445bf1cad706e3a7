"""Label distribution learning over texture features.

Implements the consensus distribution (the exact minimizer of the summed
KL objective is the normalized geometric mean), a maximum-entropy
conditional model p(y|x) ~ exp(theta_y . x) trained by BFGS, and the
four-distance evaluation of predicted against true distributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_EPSILON,
    Distribution,
    InvalidInputError,
    VOCABULARY,
)
from .optim import NumericError, OptimProblem, bfgs_minimize

DEFAULT_PENALTY_C = 100.0


@dataclass(frozen=True)
class MaxEntModel:
    """theta is (c, q + intercept): one weight row per attribute.

    l2_penalty is the divisor C of the (1/2C)||theta||^2 regularizer;
    larger C means weaker regularization. feature_mean/std standardize
    query features to the scale seen in training; when intercept is set,
    a constant 1 column is appended after standardization (per-label bias).
    """

    theta: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    l2_penalty: float
    intercept: bool = False

    def __post_init__(self):
        theta = np.ascontiguousarray(np.asarray(self.theta, dtype=float))
        if theta.ndim != 2:
            raise InvalidInputError(f"theta must be 2-D, got shape {theta.shape}")
        if not np.isfinite(theta).all():
            raise InvalidInputError("theta must be finite")
        mean = np.asarray(self.feature_mean, dtype=float)
        std = np.asarray(self.feature_std, dtype=float)
        q = theta.shape[1] - (1 if self.intercept else 0)
        if mean.shape != (q,) or std.shape != (q,):
            raise InvalidInputError(
                "feature stats must match theta's feature dimension"
            )
        for arr in (theta, mean, std):
            arr.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_std", std)

    @property
    def n_labels(self) -> int:
        return self.theta.shape[0]

    @property
    def n_features(self) -> int:
        return self.feature_mean.shape[0]

    @classmethod
    def with_identity_stats(cls, theta, l2_penalty=DEFAULT_PENALTY_C) -> "MaxEntModel":
        theta = np.asarray(theta, dtype=float)
        q = theta.shape[1]
        return cls(theta, np.zeros(q), np.ones(q), l2_penalty)


@dataclass(frozen=True)
class TrainingSet:
    features: np.ndarray  # (n, q)
    targets: tuple[Distribution, ...]

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=float))
        if feats.ndim != 2:
            raise InvalidInputError("features must be an (n, q) matrix")
        targets = tuple(self.targets)
        if feats.shape[0] != len(targets):
            raise InvalidInputError(
                f"{feats.shape[0]} feature rows but {len(targets)} targets"
            )
        widths = {len(t.values) for t in targets}
        if len(widths) > 1:
            raise InvalidInputError("all targets must have the same length")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targets)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def q(self) -> int:
        return self.features.shape[1]

    def target_matrix(self) -> np.ndarray:
        return np.asarray([t.values for t in self.targets], dtype=float)


def kl_divergence(p: Distribution, q: Distribution,
                  epsilon: float = DEFAULT_EPSILON) -> float:
    """sum_j p_j ln(p_j / q_j) with 0 ln 0 = 0 and q floored at epsilon."""
    pa = p.as_array()
    qa = np.maximum(q.as_array(), epsilon)
    mask = pa > 0.0
    value = float(np.sum(pa[mask] * np.log(pa[mask] / qa[mask])))
    return max(value, 0.0)


def consensus_distribution(targets: Sequence[Distribution],
                           epsilon: float = DEFAULT_EPSILON) -> Distribution:
    """The distribution minimizing the summed KL divergence to all targets.

    The exact minimizer of sum_i KL(P || P_i) over the simplex is the
    normalized geometric mean: P_j proportional to exp(mean_i ln P_i,j).
    """
    if not targets:
        raise InvalidInputError("need at least one target distribution")
    matrix = np.maximum(np.asarray([t.values for t in targets], dtype=float), epsilon)
    mean_log = np.log(matrix).mean(axis=0)
    w = np.exp(mean_log - mean_log.max())
    return Distribution.from_array(w / w.sum())


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def predict(model: MaxEntModel, x) -> Distribution:
    """p(y_j | x) = exp(theta_j . x) / Z, with overflow-safe normalization."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise InvalidInputError(
            f"feature vector has shape {x.shape}, model expects ({model.n_features},)"
        )
    return Distribution.from_array(predict_many(model, x[None, :])[0])


def predict_many(model: MaxEntModel, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    z = (xs - model.feature_mean) / model.feature_std
    if model.intercept:
        z = np.hstack([z, np.ones((z.shape[0], 1))])
    return _softmax_rows(z @ model.theta.T)


def target_and_gradient(theta: np.ndarray, ts: TrainingSet,
                        c_penalty: float = DEFAULT_PENALTY_C):
    """Objective -T(theta) + ||theta||^2/(2C) and its gradient.

    T(theta) = sum_{i,j} v_ij (theta_j . x_i) - sum_i ln sum_j exp(theta_j . x_i).
    Gradient entry (j, k) of the objective:
    sum_i x_ik (p(y_j|x_i) - v_ij) + theta_jk / C.
    """
    theta = np.asarray(theta, dtype=float)
    X = ts.features
    V = ts.target_matrix()
    if theta.shape != (V.shape[1], X.shape[1]):
        raise InvalidInputError(
            f"theta shape {theta.shape} does not match (c={V.shape[1]}, q={X.shape[1]})"
        )
    logits = X @ theta.T  # (n, c)
    m = logits.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))).ravel()
    t_value = float((V * logits).sum() - lse.sum())
    objective = -t_value + 0.5 * float((theta * theta).sum()) / c_penalty
    probs = _softmax_rows(logits)
    grad = (probs - V).T @ X + theta / c_penalty
    if not np.isfinite(objective) or not np.isfinite(grad).all():
        raise NumericError("non-finite value in maxent objective", last_x=theta)
    return objective, grad


def train(ts: TrainingSet, c_penalty: float = DEFAULT_PENALTY_C,
          tol: float = 1e-5, max_iter: int = 500,
          intercept: bool = True) -> MaxEntModel:
    """Fit theta by BFGS from zero on standardized features.

    An intercept column (constant 1) is appended by default: without it the
    standardized mean sample is pinned to the uniform distribution, which
    the skewed targets here never are.
    """
    if ts.n < 2:
        raise InvalidInputError(f"training needs at least 2 samples, got {ts.n}")
    mean = ts.features.mean(axis=0)
    std = ts.features.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    z = (ts.features - mean) / std
    if intercept:
        z = np.hstack([z, np.ones((z.shape[0], 1))])
    std_ts = TrainingSet(z, ts.targets)

    c = len(ts.targets[0].values)
    q = z.shape[1]

    memo: dict = {}

    def _value_and_grad(flat):
        key = flat.tobytes()
        if key not in memo:
            memo.clear()
            memo[key] = target_and_gradient(flat.reshape(c, q), std_ts, c_penalty)
        return memo[key]

    problem = OptimProblem(
        dim=c * q,
        objective=lambda flat: _value_and_grad(flat)[0],
        gradient=lambda flat: _value_and_grad(flat)[1].ravel(),
    )
    result = bfgs_minimize(problem, np.zeros(c * q), tol=tol, max_iter=max_iter)
    model = MaxEntModel(result.x_star.reshape(c, q), mean, std, c_penalty,
                        intercept=intercept)

    baseline = MaxEntModel(np.zeros((c, q)), mean, std, c_penalty,
                           intercept=intercept)
    if mean_training_kl(model, ts) >= mean_training_kl(baseline, ts):
        raise NumericError(
            "training failed to improve on the uniform model",
            last_x=result.x_star,
        )
    return model


def mean_training_kl(model: MaxEntModel, ts: TrainingSet) -> float:
    preds = predict_many(model, ts.features)
    return float(
        np.mean(
            [
                kl_divergence(t, Distribution.from_array(p))
                for t, p in zip(ts.targets, preds)
            ]
        )
    )


@dataclass(frozen=True)
class EvaluationReport:
    kl: float
    euclidean: float
    sorensen: float
    chi_squared: float

    def as_dict(self) -> dict:
        return {
            "kl": self.kl,
            "euclidean": self.euclidean,
            "sorensen": self.sorensen,
            "chi_squared": self.chi_squared,
        }


def evaluate(pred: Sequence[Distribution], truth: Sequence[Distribution]) -> EvaluationReport:
    """Average KL(truth||pred), Euclidean, Sorensen, and chi^2 distances."""
    if len(pred) != len(truth):
        raise InvalidInputError(
            f"prediction/truth length mismatch: {len(pred)} vs {len(truth)}"
        )
    if not pred:
        raise InvalidInputError("nothing to evaluate")
    kls, eucs, sors, chis = [], [], [], []
    for p, t in zip(pred, truth):
        pa = p.as_array()
        ta = t.as_array()
        kls.append(kl_divergence(t, p))
        eucs.append(float(np.sqrt(((pa - ta) ** 2).sum())))
        denom = pa + ta
        sors.append(float(np.abs(pa - ta).sum() / denom.sum()))
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(denom > 0.0, (pa - ta) ** 2 / denom, 0.0)
        chis.append(float(terms.sum()))
    return EvaluationReport(
        kl=float(np.mean(kls)),
        euclidean=float(np.mean(eucs)),
        sorensen=float(np.mean(sors)),
        chi_squared=float(np.mean(chis)),
    )


def write_report_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kl,euclidean,sorensen,chi_squared\n")
        fh.write(
            f"{report.kl!r},{report.euclidean!r},{report.sorensen!r},"
            f"{report.chi_squared!r}\n"
        )


def save_model(model: MaxEntModel, path) -> None:
    payload = {
        "theta": [[float(v) for v in row] for row in model.theta],
        "feature_mean": [float(v) for v in model.feature_mean],
        "feature_std": [float(v) for v in model.feature_std],
        "l2_penalty": model.l2_penalty,
        "intercept": model.intercept,
        "vocabulary_sha256": VOCABULARY.checksum(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path) -> MaxEntModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("vocabulary_sha256") != VOCABULARY.checksum():
        raise InvalidInputError(
            f"model at {path} was trained against a different attribute vocabulary"
        )
    return MaxEntModel(
        np.asarray(payload["theta"], dtype=float),
        np.asarray(payload["feature_mean"], dtype=float),
        np.asarray(payload["feature_std"], dtype=float),
        float(payload["l2_penalty"]),
        intercept=bool(payload.get("intercept", False)),
    )
