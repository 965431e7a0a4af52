import numpy as np
import pytest

from ebt.geometry import center_distance
from ebt.synth import SceneSpec, render_scene


class TestRenderScene:
    def test_shapes_and_lengths(self):
        spec = SceneSpec(width=200, height=160, frame_count=4, seed=1)
        frames, gts = render_scene(spec)
        assert len(frames) == len(gts) == 4
        for f in frames:
            assert f.shape == (160, 200, 3) and f.dtype == np.uint8

    def test_deterministic(self):
        spec = SceneSpec(frame_count=3, motion="smooth", seed=9)
        f1, g1 = render_scene(spec)
        f2, g2 = render_scene(spec)
        assert g1 == g2
        for a, b in zip(f1, f2):
            np.testing.assert_array_equal(a, b)

    def test_seed_changes_scene(self):
        f1, _ = render_scene(SceneSpec(frame_count=1, seed=0))
        f2, _ = render_scene(SceneSpec(frame_count=1, seed=1))
        assert not np.array_equal(f1[0], f2[0])

    def test_static_motion_fixed_box(self):
        _, gts = render_scene(SceneSpec(frame_count=5, motion="static", seed=4))
        assert all(g == gts[0] for g in gts)

    def test_boxes_inside_frame(self):
        spec = SceneSpec(frame_count=10, motion="smooth", speed=8.0, seed=2)
        _, gts = render_scene(spec)
        for g in gts:
            assert 0 <= g.x and 0 <= g.y
            assert g.x2 <= spec.width and g.y2 <= spec.height

    def test_teleport_jump_distances(self):
        spec = SceneSpec(
            frame_count=8, motion="teleport", teleport_min=110, teleport_max=160, seed=3
        )
        _, gts = render_scene(spec)
        for a, b in zip(gts, gts[1:]):
            assert 110 <= center_distance(a, b) <= 160

    def test_invalid_spec_raises(self):
        with pytest.raises(ValueError):
            SceneSpec(frame_count=0)
        with pytest.raises(ValueError):
            SceneSpec(motion="drunk")

    def test_target_visible(self):
        # the rendered target differs from the background it replaced
        spec = SceneSpec(frame_count=1, motion="static", clutter=0, seed=6)
        frames, gts = render_scene(spec)
        g = gts[0]
        patch = frames[0][int(g.y) : int(g.y2), int(g.x) : int(g.x2)]
        assert patch.std() > 10  # textured block pattern, not flat background
