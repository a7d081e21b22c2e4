import numpy as np
import pytest

from lidarclf import synth
from lidarclf.classifiers import KnnClassifier
from lidarclf.evaluation import cross_validate, kfold_plan
from lidarclf.features import to_feature_matrix


class TestSynthSpec:
    def test_counts_echo_exactly(self):
        spec = synth.SynthSpec(n_ground=120, n_deck=80, n_scatter=50,
                               n_outlier=7)
        cloud = synth.generate(spec, seed=0)
        assert cloud.class_counts() == {2: 120, 17: 80, 18: 50, 7: 7}

    def test_preset_scaling(self):
        spec = synth.preset("slabs", n_points=3000)
        assert spec.n_points == 3000

    def test_two_planes_preset(self):
        spec = synth.preset("two-planes", n_points=400)
        cloud = synth.generate(spec, seed=1)
        counts = cloud.class_counts()
        assert set(counts) == {2, 17}
        assert sum(counts.values()) == 400

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            synth.preset("volcano")

    def test_seeded_determinism(self):
        spec = synth.preset("slabs", n_points=500)
        a = synth.generate(spec, seed=42)
        b = synth.generate(spec, seed=42)
        c = synth.generate(spec, seed=43)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.class_code,
                                                           b.class_code)
        assert not np.array_equal(a.x, c.x)

    def test_points_satisfy_invariants(self):
        cloud = synth.generate(synth.preset("slabs", n_points=800), seed=3)
        assert (cloud.return_number >= 1).all()
        assert (cloud.return_number <= cloud.num_returns).all()
        assert (np.abs(cloud.scan_angle) <= 90).all()


class TestSeparability:
    def test_two_planes_one_nn_is_nearly_perfect(self):
        # sigma much smaller than the plane gap: 1-NN on x, y, z alone.
        cloud = synth.generate(synth.preset("two-planes", n_points=600), seed=5)
        fm = to_feature_matrix(cloud)
        xyz = fm.data[:, :3]
        plan = kfold_plan(fm.labels, n_folds=2, seed=0)
        result = cross_validate(lambda: KnnClassifier(k_vote=1), xyz,
                                fm.labels, plan)
        assert result.summary.mean > 0.99
