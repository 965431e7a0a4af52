import numpy as np
import pytest

from ebt import rerank
from ebt.edgebox import Proposal, ProposalConfig, box_objectness, generate_pool
from ebt.geometry import Box, iou
from ebt.rerank import RerankModel, rerank_feature, rerank_features, select_top
from conftest import random_scene_structures


def _pool(rng, n_segments=12):
    s = random_scene_structures(rng, n_segments=n_segments, width=120, height=120)
    pool = generate_pool(s, Box(40, 40, 25, 25), ProposalConfig())
    assert pool
    return s, pool


class TestRerankFeature:
    def test_dimension_and_subwindow_consistency(self, rng):
        s = random_scene_structures(rng, n_segments=8)
        b = Box(20, 20, 30, 24)
        f = rerank_feature(b, s)
        assert f.shape == (10,)
        # first component is the plain objectness of the whole box
        assert f[0] == pytest.approx(box_objectness(b, s), abs=1e-12)
        # each remaining component is the objectness of a fixed sub-window
        for row, val in zip(rerank._partition(b), f):
            sub = Box(*row)
            assert val == pytest.approx(box_objectness(sub, s), abs=1e-12)

    def test_batch_matches_single(self, rng):
        s = random_scene_structures(rng, n_segments=8)
        boxes = [Box(10 + 3 * k, 12 + 2 * k, 20, 18) for k in range(6)]
        batch = rerank_features(boxes, s)
        assert batch.shape == (6, 10)
        for k, b in enumerate(boxes):
            np.testing.assert_allclose(batch[k], rerank_feature(b, s), atol=1e-12)


class TestSelectTop:
    def test_untrained_model_keeps_objectness_order(self, rng):
        s, pool = _pool(rng)
        kept = select_top(RerankModel(), pool, 10, s)
        assert [p.box for p in kept] == [p.box for p in pool[:10]]

    def test_caps_at_h(self, rng):
        s, pool = _pool(rng)
        assert len(select_top(RerankModel(), pool, 5, s)) == min(5, len(pool))
        assert len(select_top(RerankModel(), pool, 10 ** 6, s)) == len(pool)

    def test_fills_rerank_scores(self, rng):
        s, pool = _pool(rng)
        select_top(RerankModel(), pool, len(pool), s)
        assert all(p.rerank_score is not None for p in pool)

    def test_deterministic(self, rng):
        s, pool = _pool(rng)
        m = RerankModel(weights=rng.normal(size=10), bias=0.3, initialized=True)
        a = select_top(m, list(pool), 20, s)
        b = select_top(m, list(pool), 20, s)
        assert [p.box for p in a] == [p.box for p in b]


class TestUpdate:
    def test_skips_off_schedule_frames(self, rng):
        s, pool = _pool(rng)
        m = RerankModel(initialized=True)
        before = m.weights.copy()
        rerank.update(m, pool[0].box, pool, frame_index=7, structures=s)
        np.testing.assert_array_equal(m.weights, before)

    def test_first_update_always_trains(self, rng):
        s, pool = _pool(rng)
        m = rerank.update(RerankModel(), pool[0].box, pool, frame_index=3, structures=s)
        assert m.initialized
        assert np.any(m.weights != 0.0)

    def test_objective_decreases_across_epochs(self, rng):
        s, pool = _pool(rng)
        m = rerank.update(RerankModel(), pool[0].box, pool, frame_index=0, structures=s)
        objs = m.epoch_objectives
        assert len(objs) == rerank.EPOCHS
        assert all(np.isfinite(objs))
        assert objs[-1] <= objs[0] + 1e-9

    def test_positive_scored_above_far_negatives(self, rng):
        s, pool = _pool(rng)
        target = pool[0].box
        m = rerank.update(RerankModel(), target, pool, frame_index=0, structures=s)
        pos = rerank.score(m, rerank_feature(target, s))
        neg_scores = [
            rerank.score(m, rerank_feature(p.box, s))
            for p in pool
            if iou(p.box, target) < rerank.NEGATIVE_IOU
        ]
        assert neg_scores
        assert pos > float(np.mean(neg_scores))

    def test_deterministic_training(self, rng):
        s, pool = _pool(rng)
        m1 = rerank.update(RerankModel(), pool[0].box, pool, 0, s)
        m2 = rerank.update(RerankModel(), pool[0].box, pool, 0, s)
        np.testing.assert_array_equal(m1.weights, m2.weights)
        assert m1.bias == m2.bias
