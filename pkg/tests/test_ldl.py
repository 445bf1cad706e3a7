import math

import numpy as np
import pytest

from texsem import ldl
from texsem.core import Distribution, InvalidInputError
from texsem.optim import OptimProblem, bfgs_minimize, finite_diff_gradient


def _random_training_set(rng, n, c, q):
    X = rng.normal(size=(n, q))
    V = rng.dirichlet(np.ones(c), size=n)
    return ldl.TrainingSet(X, tuple(Distribution.from_array(v) for v in V))


def test_kl_identity_zero():
    p = Distribution((0.2, 0.3, 0.5))
    assert ldl.kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


def test_kl_reference_value():
    got = ldl.kl_divergence(Distribution((0.5, 0.5)), Distribution((0.9, 0.1)))
    expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(0.5108, abs=5e-5)


def test_kl_nonnegative_on_random_simplex_pairs():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        c = int(rng.integers(2, 10))
        p = Distribution.from_array(rng.dirichlet(np.ones(c)))
        q = Distribution.from_array(rng.dirichlet(np.ones(c)))
        assert ldl.kl_divergence(p, q) >= 0.0


def test_consensus_identical_targets():
    p = Distribution((0.3, 0.7))
    c = ldl.consensus_distribution([p, p, p])
    assert np.allclose(c.values, p.values, atol=1e-9)


def test_consensus_single_target():
    p = Distribution((0.25, 0.75))
    assert np.allclose(ldl.consensus_distribution([p]).values, p.values, atol=1e-12)


def test_consensus_geometric_mean_value():
    c = ldl.consensus_distribution(
        [Distribution((0.5, 0.5)), Distribution((0.9, 0.1))]
    )
    g1, g2 = math.sqrt(0.5 * 0.9), math.sqrt(0.5 * 0.1)
    assert c.values[0] == pytest.approx(g1 / (g1 + g2), rel=1e-9)
    assert c.values[1] == pytest.approx(g2 / (g1 + g2), rel=1e-9)
    assert c.values[0] == pytest.approx(0.750, abs=5e-4)


def _consensus_numeric(targets, epsilon=1e-6):
    """Numeric minimizer of sum_i KL(softmax(z) || P_i) via BFGS."""
    matrix = np.maximum(np.asarray([t.values for t in targets]), epsilon)
    logm = np.log(matrix)
    n, c = matrix.shape
    mean_log = logm.mean(axis=0)

    def softmax(z):
        e = np.exp(z - z.max())
        return e / e.sum()

    def objective(z):
        p = softmax(z)
        return float(n * (p * (np.log(np.maximum(p, 1e-300)) - mean_log)).sum())

    def gradient(z):
        p = softmax(z)
        inner = np.log(np.maximum(p, 1e-300)) - mean_log
        return n * p * (inner - float((p * inner).sum()))

    res = bfgs_minimize(OptimProblem(c, objective, gradient), np.zeros(c),
                        tol=1e-12, max_iter=300)
    return softmax(res.x_star)


def test_consensus_matches_numeric_minimizer():
    rng = np.random.default_rng(21)
    for _ in range(5):
        c = int(rng.integers(2, 8))
        targets = [
            Distribution.from_array(rng.dirichlet(np.ones(c)))
            for _ in range(int(rng.integers(1, 6)))
        ]
        closed = ldl.consensus_distribution(targets).as_array()
        numeric = _consensus_numeric(targets)
        assert np.max(np.abs(closed - numeric)) < 1e-6


def test_predict_zero_theta_uniform():
    model = ldl.MaxEntModel.with_identity_stats(np.zeros((43, 5)))
    d = ldl.predict(model, np.random.default_rng(0).normal(size=5))
    assert np.allclose(d.values, 1.0 / 43, atol=1e-12)


def test_predict_row_shift_invariance():
    rng = np.random.default_rng(1)
    theta = rng.normal(size=(6, 4))
    delta = rng.normal(size=4)
    x = rng.normal(size=4)
    a = ldl.predict(ldl.MaxEntModel.with_identity_stats(theta), x).as_array()
    b = ldl.predict(
        ldl.MaxEntModel.with_identity_stats(theta + delta[None, :]), x
    ).as_array()
    assert np.max(np.abs(a - b)) < 1e-12


def test_predict_two_attribute_value():
    model = ldl.MaxEntModel.with_identity_stats(np.array([[1.0, 0.0], [0.0, 0.0]]))
    d = ldl.predict(model, np.array([1.0, 0.0]))
    assert d.values[0] == pytest.approx(math.e / (math.e + 1), rel=1e-12)
    assert d.values[1] == pytest.approx(1 / (math.e + 1), rel=1e-12)


def test_predict_always_valid_distribution():
    rng = np.random.default_rng(2)
    for _ in range(20):
        c, q = int(rng.integers(2, 8)), int(rng.integers(1, 6))
        theta = rng.normal(size=(c, q)) * rng.uniform(0.1, 50)
        x = rng.normal(size=q) * rng.uniform(0.1, 50)
        d = ldl.predict(ldl.MaxEntModel.with_identity_stats(theta), x)
        assert abs(sum(d.values) - 1.0) <= 1e-9
        assert min(d.values) >= 0.0


def test_predict_dimension_mismatch():
    model = ldl.MaxEntModel.with_identity_stats(np.zeros((3, 4)))
    with pytest.raises(InvalidInputError):
        ldl.predict(model, np.zeros(5))


def test_gradient_zero_theta_uniform_targets():
    rng = np.random.default_rng(3)
    n, c, q = 4, 5, 3
    X = rng.normal(size=(n, q))
    uniform = Distribution.from_array(np.full(c, 1.0 / c))
    ts = ldl.TrainingSet(X, (uniform,) * n)
    _, grad = ldl.target_and_gradient(np.zeros((c, q)), ts, c_penalty=1e9)
    assert np.max(np.abs(grad)) < 1e-9


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        n, c, q = int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 5))
        ts = _random_training_set(rng, n, c, q)
        theta = rng.normal(size=(c, q)) * 0.7
        cpen = 10.0 ** rng.uniform(0, 2)
        _, grad = ldl.target_and_gradient(theta, ts, cpen)
        fd = finite_diff_gradient(
            lambda flat: ldl.target_and_gradient(flat.reshape(c, q), ts, cpen)[0],
            theta.ravel(),
            h=1e-6,
        )
        rel = np.max(np.abs(grad.ravel() - fd) / np.maximum(np.abs(fd), 1e-8))
        worst = max(worst, rel)
    assert worst < 1e-5


def test_doubling_c_halves_penalty_term():
    rng = np.random.default_rng(5)
    ts = _random_training_set(rng, 3, 3, 2)
    theta = rng.normal(size=(3, 2))
    f1, _ = ldl.target_and_gradient(theta, ts, 10.0)
    f2, _ = ldl.target_and_gradient(theta, ts, 20.0)
    penalty1 = 0.5 * (theta**2).sum() / 10.0
    penalty2 = 0.5 * (theta**2).sum() / 20.0
    assert (f1 - penalty1) == pytest.approx(f2 - penalty2, rel=1e-12)
    assert penalty2 == pytest.approx(penalty1 / 2)


def _hidden_model_targets(rng, n, c, q):
    """Targets realizable by the trained family (stats-matched hidden model)."""
    X = rng.normal(size=(n, q))
    mean = X.mean(axis=0)
    std = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    theta = np.hstack([rng.normal(size=(c, q)), rng.normal(size=(c, 1))])
    hidden = ldl.MaxEntModel(theta, mean, std, 1e9, intercept=True)
    probs = ldl.predict_many(hidden, X)
    return X, tuple(Distribution.from_array(p) for p in probs)


def test_train_recovers_hidden_model():
    rng = np.random.default_rng(6)
    X, targets = _hidden_model_targets(rng, 50, 6, 4)
    ts = ldl.TrainingSet(X, targets)
    model = ldl.train(ts, c_penalty=1e6, tol=1e-8, max_iter=500)
    assert ldl.mean_training_kl(model, ts) <= 1e-3


def test_train_beats_zero_theta_baseline():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(2, 3))
    targets = (
        Distribution((0.8, 0.1, 0.1)),
        Distribution((0.1, 0.1, 0.8)),
    )
    ts = ldl.TrainingSet(X, targets)
    model = ldl.train(ts, c_penalty=100.0, tol=1e-8, max_iter=200)
    baseline = ldl.MaxEntModel(
        np.zeros_like(model.theta), model.feature_mean, model.feature_std,
        100.0, intercept=model.intercept,
    )
    assert ldl.mean_training_kl(model, ts) < ldl.mean_training_kl(baseline, ts)


def test_train_strong_penalty_pushes_uniform():
    rng = np.random.default_rng(8)
    ts = _random_training_set(rng, 10, 4, 3)
    model = ldl.train(ts, c_penalty=1e-6, tol=1e-10, max_iter=200, intercept=False)
    assert float(np.abs(model.theta).max()) < 1e-3
    preds = ldl.predict_many(model, ts.features)
    assert np.max(np.abs(preds - 0.25)) < 1e-2


def test_train_objective_monotone_over_iterations():
    rng = np.random.default_rng(9)
    ts = _random_training_set(rng, 8, 4, 3)
    values = []

    orig = ldl.target_and_gradient

    def spy(theta, tset, cpen):
        out = orig(theta, tset, cpen)
        values.append(out[0])
        return out

    ldl.target_and_gradient, saved = spy, ldl.target_and_gradient
    try:
        ldl.train(ts, c_penalty=100.0, tol=1e-9, max_iter=100)
    finally:
        ldl.target_and_gradient = saved
    # line search may probe upward, but the running best must never regress
    best = np.minimum.accumulate(values)
    assert best[-1] <= best[0]
    assert best[-1] < values[0]


def test_evaluate_identical_is_zero():
    p = [Distribution((0.4, 0.6)), Distribution((0.1, 0.9))]
    r = ldl.evaluate(p, p)
    assert r.kl == r.euclidean == r.sorensen == r.chi_squared == 0.0


def test_evaluate_single_pair_values():
    r = ldl.evaluate([Distribution((0.9, 0.1))], [Distribution((0.5, 0.5))])
    assert r.euclidean == pytest.approx(math.sqrt(0.16 + 0.16), rel=1e-12)
    assert r.sorensen == pytest.approx(0.4, rel=1e-12)
    assert r.euclidean == pytest.approx(0.5657, abs=5e-5)


def test_evaluate_length_mismatch():
    with pytest.raises(InvalidInputError):
        ldl.evaluate([Distribution((1.0,))], [])


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    X, targets = _hidden_model_targets(rng, 20, 43, 4)
    model = ldl.train(ldl.TrainingSet(X, targets), c_penalty=50.0, tol=1e-6,
                      max_iter=200)
    path = tmp_path / "model.json"
    ldl.save_model(model, path)
    loaded = ldl.load_model(path)
    assert np.array_equal(loaded.theta, model.theta)
    assert np.array_equal(loaded.feature_mean, model.feature_mean)
    assert loaded.intercept == model.intercept
    assert loaded.l2_penalty == model.l2_penalty


def test_report_csv(tmp_path):
    r = ldl.EvaluationReport(kl=0.1, euclidean=0.2, sorensen=0.3, chi_squared=0.4)
    ldl.write_report_csv(r, tmp_path / "report.csv")
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == "kl,euclidean,sorensen,chi_squared"
    assert [float(v) for v in lines[1].split(",")] == [0.1, 0.2, 0.3, 0.4]
