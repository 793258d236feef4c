import itertools
import math

import numpy as np
import pytest

from xnids import nn
from xnids.errors import NumericalError
from xnids.shap import (
    Attribution,
    BackgroundSet,
    force_data,
    global_summary,
    kernel_shap,
    sample_background,
    stacked_force,
)


def brute_force_shapley(model_fn, x, bg):
    """Exact Shapley values by enumerating all 2^d masked coalitions."""
    d = x.size
    values = {}
    for r in range(d + 1):
        for subset in itertools.combinations(range(d), r):
            mask = np.zeros(d, dtype=bool)
            mask[list(subset)] = True
            block = np.where(mask[None, :], x[None, :], bg)
            values[subset] = float(np.mean(model_fn(block)))
    phi = np.zeros(d)
    for i in range(d):
        others = [j for j in range(d) if j != i]
        for r in range(d):
            for subset in itertools.combinations(others, r):
                w = math.factorial(r) * math.factorial(d - r - 1) / math.factorial(d)
                with_i = tuple(sorted(subset + (i,)))
                phi[i] += w * (values[with_i] - values[subset])
    return phi


def linear_model(w, b=0.0):
    w = np.asarray(w, dtype=float)
    return lambda X: np.asarray(X, dtype=float) @ w + b


def test_constant_model_gets_zero_phi():
    fn = lambda X: np.full(np.asarray(X).shape[0], 0.7)
    bg = BackgroundSet(values=np.random.default_rng(0).random((10, 6)), seed=0)
    attr = kernel_shap(fn, np.random.default_rng(1).random(6), bg)
    assert np.allclose(attr.phi, 0.0, atol=1e-9)
    assert abs(attr.base_value - 0.7) < 1e-12
    assert attr.efficiency_gap() < 1e-9


def test_linear_model_closed_form_exhaustive():
    rng = np.random.default_rng(3)
    w = rng.normal(size=7)
    fn = linear_model(w, b=0.25)
    bg = BackgroundSet(values=rng.random((25, 7)), seed=0)
    x = rng.random(7)
    attr = kernel_shap(fn, x, bg, n_coalitions="exhaustive")
    expected = w * (x - bg.values.mean(axis=0))
    assert np.max(np.abs(attr.phi - expected)) < 1e-6
    assert attr.efficiency_gap() < 1e-6


def test_mlp_matches_brute_force_shapley():
    model = nn.init_model([8, 6, 2], seed=5)
    fn = lambda X: nn.forward(model, X)[:, 1]
    rng = np.random.default_rng(7)
    bg = BackgroundSet(values=rng.random((12, 8)), seed=0)
    x = rng.random(8)
    attr = kernel_shap(fn, x, bg, n_coalitions="exhaustive")
    expected = brute_force_shapley(fn, x, bg.values)
    assert np.max(np.abs(attr.phi - expected)) < 1e-6
    assert attr.efficiency_gap() < 1e-6


def test_sampled_run_keeps_efficiency_and_determinism():
    model = nn.init_model([20, 10, 2], seed=2)
    fn = lambda X: nn.forward(model, X)[:, 1]
    rng = np.random.default_rng(11)
    bg = BackgroundSet(values=rng.random((15, 20)), seed=0)
    x = rng.random(20)
    a = kernel_shap(fn, x, bg, n_coalitions=150, seed=42)
    b = kernel_shap(fn, x, bg, n_coalitions=150, seed=42)
    assert np.array_equal(a.phi, b.phi)
    assert a.efficiency_gap() < 1e-6
    c = kernel_shap(fn, x, bg, n_coalitions=150, seed=43)
    assert not np.array_equal(a.phi, c.phi)


def test_symmetry_of_identical_features():
    # features 0 and 1 play identical roles and have identical values
    fn = lambda X: X[:, 0] * 0.5 + X[:, 1] * 0.5 + X[:, 2]
    rng = np.random.default_rng(13)
    bg_vals = rng.random((10, 3))
    bg_vals[:, 1] = bg_vals[:, 0]
    bg = BackgroundSet(values=bg_vals, seed=0)
    x = np.array([0.8, 0.8, 0.3])
    attr = kernel_shap(fn, x, bg, n_coalitions="exhaustive")
    assert abs(attr.phi[0] - attr.phi[1]) < 1e-6


def test_dummy_feature_gets_zero():
    fn = lambda X: X[:, 1] * 2.0  # ignores feature 0
    rng = np.random.default_rng(17)
    bg = BackgroundSet(values=rng.random((8, 4)), seed=0)
    attr = kernel_shap(fn, rng.random(4), bg, n_coalitions="exhaustive")
    assert abs(attr.phi[0]) < 1e-6
    assert abs(attr.phi[2]) < 1e-6
    assert abs(attr.phi[3]) < 1e-6


def test_single_feature_instance():
    fn = lambda X: X[:, 0] * 3.0
    bg = BackgroundSet(values=np.array([[0.0], [1.0]]), seed=0)
    attr = kernel_shap(fn, np.array([0.5]), bg, n_coalitions="exhaustive")
    assert abs(attr.phi[0] - (1.5 - 1.5)) < 1e-9
    assert attr.efficiency_gap() < 1e-9


def test_too_few_coalitions_rejected():
    fn = lambda X: X.sum(axis=1)
    bg = BackgroundSet(values=np.random.default_rng(0).random((5, 20)), seed=0)
    with pytest.raises(ValueError, match="d \\+ 2"):
        kernel_shap(fn, np.zeros(20), bg, n_coalitions=10)


def test_nonfinite_model_rejected():
    fn = lambda X: np.full(np.asarray(X).shape[0], np.nan)
    bg = BackgroundSet(values=np.random.default_rng(0).random((5, 4)), seed=0)
    with pytest.raises(NumericalError):
        kernel_shap(fn, np.zeros(4), bg)


def test_sample_background_is_seeded_subset():
    rng = np.random.default_rng(0)
    train = rng.random((50, 6))
    bg1 = sample_background(train, size=10, seed=3)
    bg2 = sample_background(train, size=10, seed=3)
    assert np.array_equal(bg1.values, bg2.values)
    assert bg1.size == 10
    # every row must be an actual training row
    for row in bg1.values:
        assert any(np.array_equal(row, t) for t in train)


# ---------------------------------------------------------------------------
# summary / force data products


def make_attr(phi, base=0.5, names=None, values=None, method="shap"):
    phi = np.asarray(phi, dtype=float)
    names = names or [f"x{i}" for i in range(phi.size)]
    values = np.asarray(values if values is not None else np.zeros(phi.size), dtype=float)
    return Attribution(method=method, feature_names=list(names), phi=phi,
                       base_value=base, model_output=base + phi.sum(),
                       target_class=1, instance=values)


def test_global_summary_single_attribution_ranking():
    attr = make_attr([0.1, -0.5, 0.3])
    s = global_summary([attr])
    assert s.ranking.tolist() == [1, 2, 0]


def test_global_summary_zero_phi_stable_tiebreak():
    s = global_summary([make_attr([0.0, 0.0, 0.0])])
    assert s.ranking.tolist() == [0, 1, 2]


def test_global_summary_rejects_empty_and_mismatched():
    with pytest.raises(ValueError):
        global_summary([])
    a = make_attr([0.1, 0.2])
    b = make_attr([0.1, 0.2], names=["a", "b"])
    with pytest.raises(ValueError, match="feature names"):
        global_summary([a, b])


def test_force_data_arithmetic():
    attr = make_attr([0.3, -0.1], base=0.5)
    f = force_data(attr)
    assert abs(f.model_output - 0.7) < 1e-12
    assert [s.phi for s in f.positive] == [0.3]
    assert [s.phi for s in f.negative] == [-0.1]


def test_force_data_all_positive_has_empty_negative():
    f = force_data(make_attr([0.2, 0.1, 0.05]))
    assert f.negative == []
    assert [s.phi for s in f.positive] == [0.2, 0.1, 0.05]


def test_force_data_rejects_broken_efficiency():
    attr = make_attr([0.3, -0.1], base=0.5)
    attr.model_output = 0.9  # violates base + sum(phi)
    with pytest.raises(ValueError, match="efficiency"):
        force_data(attr)


def test_stacked_force_single_group():
    s = stacked_force([make_attr([0.1, 0.2])], ["normal"])
    assert s.groups == [("normal", [0])]
    assert s.phi_columns.shape == (1, 2)


def test_stacked_force_group_contiguity_and_order():
    attrs = [
        make_attr([0.1], base=0.0),   # output 0.1, group a
        make_attr([0.9], base=0.0),   # output 0.9, group b
        make_attr([0.5], base=0.0),   # output 0.5, group a
        make_attr([0.2], base=0.0),   # output 0.2, group b
    ]
    s = stacked_force(attrs, ["a", "b", "a", "b"])
    assert s.groups == [("a", [0, 1]), ("b", [2, 3])]
    # within-group ordering by model output descending
    assert s.model_outputs.tolist() == [0.5, 0.1, 0.9, 0.2]


def test_stacked_force_four_group_blocks():
    rng = np.random.default_rng(1)
    labels = ["normal"] * 5 + ["neptune"] * 5 + ["smurf"] * 5 + ["satan"] * 5
    attrs = [make_attr(rng.normal(size=3)) for _ in labels]
    s = stacked_force(attrs, labels)
    assert [g[0] for g in s.groups] == ["normal", "neptune", "smurf", "satan"]
    flat = [c for _, cols in s.groups for c in cols]
    assert flat == list(range(20))


def test_stacked_force_length_mismatch():
    with pytest.raises(ValueError):
        stacked_force([make_attr([0.1])], ["a", "b"])
