import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ConstantModel, FnModel, interval_model
from tsxplain import tsr
from tsxplain.core import BadParams, LabeledDataset, ShapeMismatch
from tsxplain.models import GradientUnavailable, LinearSoftmaxModel, knn_fit
from tsxplain.tsr import TSR, TsrParams, base_saliency, time_relevance


def affine_model(W):
    # small weights keep p inside (0, 1) for the inputs used below
    return FnModel(lambda X: 0.5 + np.einsum("ndt,dt->n", X, W))


def affine_oracle(x, W):
    """Closed form for an affine p(class 1) with a zero baseline."""
    cell = np.abs(W * x)
    delta = cell.sum(axis=0)
    raw = delta[None, :] * cell
    return raw / raw.max()


def test_constant_model_gives_zeros():
    x = np.random.default_rng(0).normal(size=(2, 10))
    exp = TSR(ConstantModel(2)).explain(x, 0)
    assert np.all(exp.scores == 0.0) and exp.range_kind == "unit"


def test_occlusion_of_affine_model():
    rng = np.random.default_rng(1)
    W = rng.uniform(-0.01, 0.01, size=(2, 8))
    x = rng.normal(size=(2, 8))
    np.testing.assert_allclose(base_saliency(x, 1, affine_model(W)), W * x, atol=1e-14)
    np.testing.assert_allclose(time_relevance(x, 1, affine_model(W)), np.abs(W * x).sum(axis=0), atol=1e-14)
    exp = TSR(affine_model(W)).explain(x, 1)
    np.testing.assert_allclose(exp.scores, affine_oracle(x, W), atol=1e-9)


def test_gradient_bases_on_linear_model():
    rng = np.random.default_rng(2)
    m = LinearSoftmaxModel(rng.normal(size=(2, 2, 6)), rng.normal(size=2))
    x = rng.normal(size=(2, 6))
    g = m.grad(x, 1)
    np.testing.assert_allclose(base_saliency(x, 1, m, "gradient"), g)
    np.testing.assert_allclose(base_saliency(x, 1, m, "grad-input"), g * x)


def test_gradient_base_needs_gradient():
    ds = LabeledDataset(np.array([[[0.0, 0.0]], [[1.0, 1.0]]]), [0, 1], 2)
    with pytest.raises(GradientUnavailable):
        TSR(knn_fit(ds, 1), base_method="gradient").explain(np.zeros((1, 2)), 0)


def test_interval_model_mass_in_window():
    rng = np.random.default_rng(3)
    x = rng.normal(scale=0.3, size=(1, 40))
    x[:, 10:20] += 1.0
    exp = TSR(interval_model(10, 20)).explain(x, 1)
    mass = exp.scores.sum()
    assert exp.scores[:, 10:20].sum() / mass >= 0.7
    assert exp.scores.max() == 1.0


def test_baseline_equal_to_input_gives_no_relevance():
    x = np.random.default_rng(4).normal(size=(2, 12))
    m = interval_model(0, 12)
    np.testing.assert_array_equal(time_relevance(x, 1, m, baseline=x), 0.0)
    assert np.all(TSR(m, baseline=x).explain(x, 1).scores == 0.0)


def test_ignored_channel_has_no_relevance():
    rng = np.random.default_rng(5)
    m = FnModel(lambda X: 1 / (1 + np.exp(-X[:, 0].sum(axis=1))))
    x = rng.normal(size=(3, 15))
    exp = TSR(m).explain(x, 1)
    assert np.all(exp.scores[1:] <= 1e-9)
    phi = tsr.feature_relevance(x, 1, m, t=4)
    assert phi[1] <= 1e-9 and phi[2] <= 1e-9 and phi[0] > 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_bounds_and_alpha_monotonicity(seed):
    rng = np.random.default_rng(seed)
    m = LinearSoftmaxModel(rng.normal(size=(2, 2, 10)), rng.normal(size=2))
    x = rng.normal(size=(2, 10))
    counts = []
    for alpha in (0.0, 0.25, 0.5, 0.9):
        exp = TSR(m, alpha=alpha).explain(x, 1)
        assert exp.scores.min() >= 0.0 and exp.scores.max() <= 1.0
        assert exp.scores.max() == 1.0 or np.all(exp.scores == 0)
        counts.append(int((exp.scores.max(axis=0) > 0).sum()))
    assert counts == sorted(counts, reverse=True)


def test_alpha_gate_zeroes_columns():
    rng = np.random.default_rng(6)
    W = rng.uniform(-0.01, 0.01, size=(1, 10))
    x = rng.normal(size=(1, 10))
    exp = TSR(affine_model(W), alpha=0.5).explain(x, 1)
    delta = np.asarray(exp.info["time_relevance"])
    dropped = delta < 0.5 * delta.max()
    assert dropped.any() and np.all(exp.scores[:, dropped] == 0)


def test_channel_permutation_invariance():
    rng = np.random.default_rng(7)
    W = rng.uniform(-0.01, 0.01, size=(3, 9))
    x = rng.normal(size=(3, 9))
    perm = [2, 0, 1]
    a = TSR(affine_model(W)).explain(x, 1).scores
    b = TSR(affine_model(W[perm])).explain(x[perm], 1).scores
    np.testing.assert_allclose(b, a[perm], atol=1e-12)


def test_channel_mean_baseline():
    x = np.array([[1.0, 3.0], [2.0, 2.0]])
    np.testing.assert_array_equal(tsr.baseline_values(x, "channel-mean"), [[2, 2], [2, 2]])
    with pytest.raises(ShapeMismatch):
        tsr.baseline_values(x, np.zeros((1, 2)))


def test_default_class_is_prediction(multi_split, multi_linear):
    _, test = multi_split
    x = test.X[0]
    exp = TSR(multi_linear).explain(x)
    assert exp.info["class"] == multi_linear.predict_one(x)
    assert len(exp.info["time_relevance"]) == x.shape[1]


def test_bad_params():
    with pytest.raises(BadParams):
        TsrParams(base_method="lrp")
    with pytest.raises(BadParams):
        TsrParams(alpha=1.5)
    with pytest.raises(BadParams):
        TsrParams(baseline="noise")
    with pytest.raises(BadParams):
        TSR(ConstantModel(2)).explain(np.zeros((1, 5)), 3)
