import numpy as np
import pytest

from hypoprop.model import BBox
from hypoprop.synth import DetectorConfig, ObjectSpec, SynthConfig, nms, rasterize, simulate_detector, synth_scenario


def cfg(objects, **det):
    return SynthConfig(64, 64, 6, objects, DetectorConfig(**det), seed=1)


def test_rasterize_rect_at_pixel_centres():
    m = rasterize(ObjectSpec("rect", (4, 2), (10, 10)), 0, 32, 32)
    assert m.sum() == 8
    assert BBox.from_mask(m).as_tuple() == (8, 9, 12, 11)


def test_static_square_has_constant_masks_and_zero_flow():
    s = synth_scenario(cfg([ObjectSpec("rect", (10, 10), (20, 20))]))
    first = s.frames[0].gt_masks[1]
    for fr in s.frames:
        assert np.array_equal(fr.gt_masks[1], first)
        if fr.flow is not None:
            assert not fr.flow.any()


def test_zero_noise_proposals_equal_gt_boxes():
    s = synth_scenario(cfg([ObjectSpec("rect", (10, 10), (20, 20), (2, 1))]))
    for fr in s.frames:
        assert len(fr.proposals) == 1
        assert fr.proposals[0].box == BBox.from_mask(fr.gt_masks[1])
        assert fr.proposals[0].proposal_id == 0


def test_flow_carries_velocity_on_silhouette():
    s = synth_scenario(cfg([ObjectSpec("rect", (10, 10), (20, 20), (3, -1))]))
    fl, m = s.frames[0].flow, s.frames[0].gt_masks[1]
    assert (fl[m] == (3, -1)).all() and not fl[~m].any()


def test_all_missed_gives_no_proposals():
    s = synth_scenario(cfg([ObjectSpec()], miss_prob=1.0))
    assert all(not fr.proposals for fr in s.frames)


def test_crossing_objects_overlap_and_front_flow_wins():
    a = ObjectSpec("rect", (10, 10), (20, 32), (2, 0), depth=1)
    b = ObjectSpec("rect", (10, 10), (30, 32), (-2, 0), depth=0)
    s = synth_scenario(SynthConfig(64, 64, 6, [a, b]))
    fr = s.frames[2]  # both centred at x = 24 and 26
    both = fr.gt_masks[1] & fr.gt_masks[2]
    assert both.any()
    assert (fr.flow[both] == (2, 0)).all()


def test_occluded_object_has_empty_mask_and_no_detection():
    ob = ObjectSpec("rect", (8, 8), (20, 20), occlusion=(2, 4))
    s = synth_scenario(cfg([ob]))
    for t in (2, 3):
        assert not s.frames[t].gt_masks[1].any()
        assert not s.frames[t].proposals
    assert s.frames[4].proposals
    with pytest.raises(ValueError):
        synth_scenario(cfg([ObjectSpec(occlusion=(0, 1))]))


def test_nms_example():
    boxes = [BBox(0, 0, 10, 10), BBox(0, 0, 10, 9), BBox(20, 20, 30, 30)]
    assert nms(boxes, [0.9, 0.8, 0.5], 0.6) == [0, 2]
    assert nms(boxes, [0.9, 0.8, 0.5], 0.95) == [0, 1, 2]


def test_detector_threshold_and_determinism():
    c = cfg([ObjectSpec()], jitter=1.5, fp_rate=3.0)
    gt = [{1: BBox(10, 10, 30, 30)} for _ in range(5)]
    a = simulate_detector(gt, c)
    assert a == simulate_detector(gt, c)
    assert all(p.confidence > 0.5 for fr in simulate_detector(gt, c, th_p=0.5) for p in fr)
    c2 = cfg([ObjectSpec()], jitter=1.5, fp_rate=3.0)
    c2.seed = 2
    assert simulate_detector(gt, c2) != a


def test_config_dict_roundtrip_and_yaml(tmp_path):
    c = cfg([ObjectSpec("ellipse", (6, 8), (10, 12), (1, 0), occlusion=(2, 3))], jitter=1.0)
    assert SynthConfig.from_dict(c.to_dict()) == c
    p = tmp_path / "c.yaml"
    p.write_text("width: 32\nheight: 32\nnum_frames: 2\nobjects:\n  - {shape: rect, size: [4, 4], start: [8, 8]}\n")
    assert SynthConfig.load(p).objects[0].size == (4, 4)
    with pytest.raises(ValueError, match="unknown"):
        SynthConfig.from_dict({"objects": [{}], "colour": 1})
