import numpy as np
import pytest

from railreliability.boosting import TransferMissBooster, grid_search_cv, stratified_fold_indices
from railreliability.boosting.trees import FlatTree, grow_tree
from railreliability.errors import DegenerateLabelsError, SchemaError
from railreliability.synth import SynthConfig, TransferGroundTruth, generate_labeled_transfers


def ptt_only_data(n=4000, seed=0, intercept=2.0, slope=-0.2):
    """Labels from P(miss) = sigmoid(intercept + slope * PTT)."""
    config = SynthConfig(
        transfer_truth=TransferGroundTruth(
            intercept=intercept,
            ptt_slope=slope,
            weekend=0.0,
            arr_intercity_hour=0.0,
            arr_short_train=0.0,
            arr_intercity_winter=0.0,
            dep_intercity_train=0.0,
            prev_present=0.0,
            prev_diff_slope=0.0,
        ),
        seed=seed,
    )
    return generate_labeled_transfers(config, n)


class TestStumpMath:
    def test_hand_computed_split_and_weights(self):
        """One stump, lambda=1, gamma=0: best threshold 2.5, weights -/+ 2/3."""
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        g = np.array([0.5, 0.5, -0.5, -0.5])
        h = np.full(4, 0.25)
        tree = grow_tree(
            X, g, h, np.arange(4), max_depth=1, reg_lambda=1.0, gamma=0.0,
            monotone=np.zeros(1, dtype=np.int8), learning_rate=1.0,
        )
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 2.5
        leaves = sorted(tree.value[tree.feature == -1])
        assert leaves[0] == pytest.approx(-1.0 / 1.5, abs=1e-12)
        assert leaves[1] == pytest.approx(+1.0 / 1.5, abs=1e-12)

    def test_gamma_blocks_weak_split(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        g = np.array([0.5, 0.5, -0.5, -0.5])
        h = np.full(4, 0.25)
        # best achievable gain is 2/3; a larger gamma forces a single leaf
        tree = grow_tree(
            X, g, h, np.arange(4), max_depth=1, reg_lambda=1.0, gamma=0.7,
            monotone=np.zeros(1, dtype=np.int8), learning_rate=1.0,
        )
        assert tree.n_nodes == 1


class TestBoosterBasics:
    def test_zero_rounds_predicts_prevalence(self):
        X, y, _ = ptt_only_data(800, seed=1)
        model = TransferMissBooster(n_rounds=0, subsample=1.0).fit(X, y)
        expected = float(np.mean(y))
        assert np.allclose(model.predict_miss_probability(X[:10]), expected, atol=1e-12)

    def test_empty_ensemble_base_zero_is_half(self):
        model = TransferMissBooster(n_rounds=0)
        model.fit(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
        model.base_score_ = 0.0
        assert model.predict_miss_probability(np.array([[5.0]]))[0] == 0.5

    def test_single_class_raises(self):
        with pytest.raises(DegenerateLabelsError):
            TransferMissBooster(n_rounds=1).fit(np.zeros((10, 2)), np.zeros(10))

    def test_schema_mismatch_on_predict(self):
        X, y, _ = ptt_only_data(200, seed=2)
        model = TransferMissBooster(n_rounds=2, max_depth=2).fit(X, y)
        with pytest.raises(SchemaError):
            model.predict_miss_probability(X[:, :3])

    def test_na_input_predicts_finite(self):
        X, y, _ = ptt_only_data(2000, seed=3)
        model = TransferMissBooster(n_rounds=20, max_depth=3).fit(X, y)
        row = X[0].copy()
        row[1] = np.nan  # prev_ptt_diff NA
        p = model.predict_miss_probability(row.reshape(1, -1))[0]
        assert np.isfinite(p) and 0.0 < p < 1.0

    def test_probabilities_in_open_interval(self):
        X, y, _ = ptt_only_data(2000, seed=4)
        model = TransferMissBooster(n_rounds=30, max_depth=4).fit(X, y)
        p = model.predict_miss_probability(X)
        assert np.all((p > 0) & (p < 1))

    def test_predict_proba_layout(self):
        X, y, _ = ptt_only_data(500, seed=5)
        model = TransferMissBooster(n_rounds=5, max_depth=2).fit(X, y)
        proba = model.predict_proba(X[:7])
        assert proba.shape == (7, 2)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert np.allclose(proba[:, 1], model.predict_miss_probability(X[:7]))


@pytest.fixture(scope="module")
def model_and_data():
    X, y, p_true = ptt_only_data(6000, seed=6)
    model = TransferMissBooster(
        n_rounds=60, max_depth=4, learning_rate=0.2, subsample=0.8,
        gamma=0.0, monotone_constraints={"ptt": -1},
        feature_names=("ptt", "prev_ptt_diff", "weekend", "arr_intercity_hour",
                       "arr_short_train", "arr_intercity_winter", "dep_intercity_train"),
    ).fit(X, y)
    return model, X


class TestMonotonicity:

    def test_curve_non_increasing_in_ptt(self, model_and_data):
        model, X = model_and_data
        grid = X[:1].repeat(200, axis=0)
        grid[:, 0] = np.linspace(3, 60, 200)
        p = model.predict_miss_probability(grid)
        assert np.all(np.diff(p) <= 1e-12)

    def test_random_perturbations_never_increase(self, model_and_data):
        model, X = model_and_data
        rng = np.random.default_rng(123)
        rows = X[rng.integers(0, X.shape[0], size=1000)].copy()
        bumped = rows.copy()
        bumped[:, 0] = np.minimum(60.0, bumped[:, 0] + rng.uniform(0.5, 30.0, size=1000))
        p_low = model.predict_miss_probability(rows)
        p_high = model.predict_miss_probability(bumped)
        assert np.all(p_high <= p_low + 1e-12)

    def test_pairwise_example_ptt10_vs_ptt30(self, model_and_data):
        model, X = model_and_data
        a = X[0].copy()
        b = X[0].copy()
        a[0], b[0] = 10.0, 30.0
        assert model.predict_miss_probability(a.reshape(1, -1))[0] >= model.predict_miss_probability(
            b.reshape(1, -1)
        )[0]

    def test_tracks_generating_curve(self, model_and_data):
        """Predicted curve stays near sigmoid(2 - 0.2 PTT) on a PTT grid."""
        model, X = model_and_data
        grid = X[:1].repeat(12, axis=0)
        ptts = np.linspace(5, 40, 12)
        grid[:, 0] = ptts
        truth = 1.0 / (1.0 + np.exp(-(2.0 - 0.2 * ptts)))
        pred = model.predict_miss_probability(grid)
        assert np.max(np.abs(pred - truth)) < 0.08


class TestTrainingDynamics:
    def test_logloss_non_increasing_without_subsampling(self):
        X, y, _ = ptt_only_data(3000, seed=7)
        model = TransferMissBooster(
            n_rounds=40, max_depth=3, learning_rate=0.1, subsample=1.0, gamma=0.0
        ).fit(X, y)
        losses = np.array(model.train_logloss_)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_zero_weight_tree_is_identity(self):
        X, y, _ = ptt_only_data(1000, seed=8)
        model = TransferMissBooster(n_rounds=10, max_depth=3).fit(X, y)
        before = model.predict_miss_probability(X)
        dead = FlatTree([-1], [0.0], [True], [-1], [-1], [0.0])
        model.trees_.append(dead)
        after = model.predict_miss_probability(X)
        assert np.array_equal(before, after)

    def test_deterministic_under_seed(self):
        X, y, _ = ptt_only_data(2000, seed=9)
        a = TransferMissBooster(n_rounds=15, max_depth=3, random_state=5).fit(X, y)
        b = TransferMissBooster(n_rounds=15, max_depth=3, random_state=5).fit(X, y)
        assert np.array_equal(a.predict_miss_probability(X), b.predict_miss_probability(X))

    def test_feature_importances_concentrate_on_signal(self):
        X, y, _ = ptt_only_data(4000, seed=10)
        model = TransferMissBooster(n_rounds=20, max_depth=3).fit(X, y)
        assert int(np.argmax(model.feature_importances_)) == 0  # ptt carries the signal


class TestNaRouting:
    def test_na_follows_stored_default_direction(self):
        """Per split, NA lands exactly where the default direction points,
        so a depth-1 tree must give NA the same leaf as an off-scale
        sentinel pushed to that side."""
        rng = np.random.default_rng(31)
        n = 2000
        x = np.where(rng.random(n) < 0.4, np.nan, rng.uniform(0, 10, n))
        logit = np.where(np.isnan(x), 1.0, -1.0 + 0.2 * np.nan_to_num(x))
        y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(float)
        model = TransferMissBooster(n_rounds=8, max_depth=1, subsample=1.0, gamma=0.0).fit(
            x.reshape(-1, 1), y
        )
        na_pred = model.predict_miss_probability(np.array([[np.nan]]))[0]
        for tree in model.trees_:
            if tree.n_nodes == 1:
                continue
            sentinel = -1e30 if tree.default_left[0] else 1e30
            assert tree.predict(np.array([[np.nan]]))[0] == tree.predict(np.array([[sentinel]]))[0]
        assert np.isfinite(na_pred)


class TestSerialization:
    def test_round_trip_prediction_exact(self, tmp_path):
        X, y, _ = ptt_only_data(1500, seed=11)
        model = TransferMissBooster(
            n_rounds=12, max_depth=4, monotone_constraints={"ptt": -1},
            feature_names=("ptt", "prev_ptt_diff", "weekend", "arr_intercity_hour",
                           "arr_short_train", "arr_intercity_winter", "dep_intercity_train"),
        ).fit(X, y)
        path = tmp_path / "model.json"
        model.save(path, config_hash="cafe")
        loaded = TransferMissBooster.load(path)
        assert np.array_equal(
            model.predict_miss_probability(X), loaded.predict_miss_probability(X)
        )
        assert loaded.feature_names_ == model.feature_names_

    def test_sklearn_get_params_round_trip(self):
        from sklearn.base import clone

        model = TransferMissBooster(n_rounds=3, max_depth=2, random_state=9)
        twin = clone(model)
        assert twin.get_params() == model.get_params()


class TestGridSearch:
    def test_single_entry_returned(self):
        X, y, _ = ptt_only_data(600, seed=12)
        result = grid_search_cv(X, y, [{"n_rounds": 3, "max_depth": 2}], k=3)
        assert result.best_params == {"n_rounds": 3, "max_depth": 2}

    def test_constant_model_loses_to_learner(self):
        X, y, _ = ptt_only_data(1200, seed=13, intercept=6.0, slope=-0.5)  # separable-ish
        grid = [
            {"n_rounds": 10, "max_depth": 3, "learning_rate": 0.0},
            {"n_rounds": 10, "max_depth": 3, "learning_rate": 0.3},
        ]
        result = grid_search_cv(X, y, grid, k=3)
        assert result.best_params["learning_rate"] == 0.3
        constant_score = dict((tuple(sorted(p.items())), s) for p, s in result.scores)[
            tuple(sorted(grid[0].items()))
        ]
        assert constant_score == pytest.approx(0.5)

    def test_tie_breaks_lexicographically(self):
        # fully separable in PTT: several configs reach AUROC 1.0
        x = np.concatenate([np.linspace(3, 20, 60), np.linspace(40, 60, 60)])
        X = np.column_stack([x] + [np.zeros(120)] * 6)
        y = np.concatenate([np.ones(60), np.zeros(60)])
        grid = [
            {"n_rounds": 20, "max_depth": 3},
            {"n_rounds": 10, "max_depth": 2},
            {"n_rounds": 10, "max_depth": 4},
        ]
        result = grid_search_cv(X, y, grid, k=2, base_params={"subsample": 1.0})
        assert result.best_params == {"n_rounds": 10, "max_depth": 2}
        assert result.best_score == 1.0

    def test_folds_deterministic_and_stratified(self):
        y = np.array([0] * 80 + [1] * 20)
        a = stratified_fold_indices(y, 5, random_state=3)
        b = stratified_fold_indices(y, 5, random_state=3)
        assert np.array_equal(a, b)
        for fold in range(5):
            assert np.sum((a == fold) & (y == 1)) == 4
