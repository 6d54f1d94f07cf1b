import numpy as np
import pytest

from ideation_stream.classifiers import (ModelKind, cross_validate,
                                         grid_search)
from ideation_stream.classifiers.selection import fold_indices
from ideation_stream.errors import TooFewRows

from conftest import random_sparse_dataset


class TestFolds:
    def test_ten_of_ten_singletons(self):
        folds = fold_indices(10, 10, seed=0)
        assert [len(f) for f in folds] == [1] * 10

    def test_partition_properties_random(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(5, 200))
            k = int(rng.integers(2, min(n, 12) + 1))
            folds = fold_indices(n, k, seed=int(rng.integers(0, 2**31)))
            sizes = [len(f) for f in folds]
            assert max(sizes) - min(sizes) <= 1
            joined = np.concatenate(folds)
            assert len(joined) == n
            assert sorted(joined.tolist()) == list(range(n))

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            fold_indices(5, 6, seed=0)
        with pytest.raises(TooFewRows):
            fold_indices(5, 1, seed=0)


class TestCrossValidate:
    def test_report_shape_and_determinism(self):
        rng = np.random.default_rng(1)
        data = random_sparse_dataset(rng, n=30, dim=5)
        a = cross_validate(ModelKind.NB, {"alpha": 1.0}, data, k=5, seed=3)
        b = cross_validate(ModelKind.NB, {"alpha": 1.0}, data, k=5, seed=3)
        assert len(a.folds) == 5
        assert sum(f.n_validate for f in a.folds) == 30
        assert [f.accuracy for f in a.folds] == [f.accuracy for f in b.folds]
        assert 0.0 <= a.mean_accuracy <= 1.0 and a.std_accuracy >= 0.0

    def test_default_k_is_ten(self):
        rng = np.random.default_rng(2)
        data = random_sparse_dataset(rng, n=40, dim=4)
        report = cross_validate(ModelKind.NB, {}, data)
        assert len(report.folds) == 10


class TestGridSearch:
    def test_singleton_grid_wins(self):
        rng = np.random.default_rng(4)
        data = random_sparse_dataset(rng, n=20, dim=4)
        best, reports = grid_search(ModelKind.NB, {"alpha": [0.7]}, data, k=4)
        assert best == {"alpha": 0.7}
        assert len(reports) == 1

    def test_two_by_three_runs_six(self):
        rng = np.random.default_rng(5)
        data = random_sparse_dataset(rng, n=24, dim=4)
        grid = {"l2": [0.0, 0.1], "max_iter": [5, 10, 20]}
        best, reports = grid_search(ModelKind.LR, grid, data, k=3)
        assert len(reports) == 6
        seen = [(r.params["l2"], r.params["max_iter"]) for r in reports]
        assert seen == [(0.0, 5), (0.0, 10), (0.0, 20), (0.1, 5), (0.1, 10), (0.1, 20)]
        assert best in [r.params for r in reports]

    def test_dominant_config_beats_crippled_one(self):
        from conftest import make_vec
        from ideation_stream.classifiers import LabeledDataset

        # separable by the sign of feature 0, but the class-mean
        # difference points along feature 1 — so a single gradient step
        # (max_iter=1) lands on a non-separating direction
        pts = [((0.2, 10), 1), ((1.8, -6), 1), ((0.3, 9), 1), ((1.7, -5), 1),
               ((-0.2, 6), 0), ((-1.8, -10), 0), ((-0.3, 5), 0), ((-1.7, -9), 0)]
        data = LabeledDataset([make_vec(2, [(0, x0), (1, x1)]) for (x0, x1), _ in pts],
                              [y for _, y in pts])
        best, reports = grid_search(ModelKind.LR, {"max_iter": [200, 1]}, data,
                                    k=4, seed=1)
        assert best == {"max_iter": 200}
        accs = {r.params["max_iter"]: r.mean_accuracy for r in reports}
        assert accs[200] > accs[1]

    def test_empty_grid_rejected(self, separable_toy):
        with pytest.raises(ValueError):
            grid_search(ModelKind.LR, {}, separable_toy, k=2)

    def test_tie_goes_to_first_point(self):
        rng = np.random.default_rng(6)
        data = random_sparse_dataset(rng, n=16, dim=3)
        # identical alpha values -> identical accuracy -> first listed wins
        best, reports = grid_search(ModelKind.NB, {"alpha": [1.0, 1.0]}, data, k=4)
        assert reports[0].mean_accuracy == reports[1].mean_accuracy
        assert best == reports[0].params
