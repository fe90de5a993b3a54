import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypoprop.gating import TrackHistory, estimate_velocity, gate, predict_candidate
from hypoprop.model import BBox
from conftest import prop


def hist(centers, sizes):
    return TrackHistory(np.array(centers, float), np.array(sizes, float))


def test_velocity_examples():
    assert estimate_velocity(hist([(0, 0), (2, 0), (4, 0)], [(10, 10)] * 3), 2).tolist() == [2, 0]
    assert estimate_velocity(hist([(3, 3)] * 4, [(1, 1)] * 4), 3).tolist() == [0, 0]
    assert estimate_velocity(hist([(3, 3)], [(1, 1)]), 3).tolist() == [0, 0]


def test_velocity_window_shrinks():
    h = hist([(0, 0), (1, 0), (5, 0)], [(1, 1)] * 3)
    assert estimate_velocity(h, 10).tolist() == [2.5, 0]
    assert estimate_velocity(h, 1).tolist() == [4, 0]


def test_empty_history_rejected():
    with pytest.raises(ValueError):
        hist([], [])
    with pytest.raises(ValueError):
        TrackHistory.from_boxes([])


def test_predict_examples():
    c = predict_candidate(hist([(0, 0), (2, 0), (4, 0)], [(10, 10)] * 3), 2)
    assert c.center == (6, 0) and (c.width, c.height) == (10, 10)
    b = BBox(3, 4, 9, 10)
    assert predict_candidate(TrackHistory.from_boxes([b]), 3) == b
    c = predict_candidate(hist([(0, 0), (0, 0)], [(8, 8), (12, 12)]), 2)
    assert (c.width, c.height) == (10, 10)


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_predict_translation_equivariant(dx, dy):
    h = hist([(10, 10), (13, 11), (15, 15)], [(6, 8), (7, 8), (6, 9)])
    moved = hist([(10 + dx, 10 + dy), (13 + dx, 11 + dy), (15 + dx, 15 + dy)], [(6, 8), (7, 8), (6, 9)])
    a, b = predict_candidate(h, 3), predict_candidate(moved, 3)
    assert b.x_min == pytest.approx(a.x_min + dx, abs=1e-9)
    assert b.y_max == pytest.approx(a.y_max + dy, abs=1e-9)


def test_gate_examples():
    cand = BBox(0, 0, 10, 10)
    same, far, third = prop(0, 0, 10, 10, pid=0), prop(50, 50, 60, 60, pid=1), prop(5, 0, 15, 10, pid=2)
    inside, outside = gate(cand, [same, far, third], 0.3)
    assert inside == [same, third] and outside == [far]
    assert gate(cand, [same], 0.999)[0] == [same]
    assert gate(cand, [same, third], 1.0)[0] == []


def test_gate_zero_threshold_means_positive_overlap():
    cand = BBox(0, 0, 10, 10)
    touching = prop(10, 0, 20, 10, pid=0)
    sliver = prop(9.9, 0, 20, 10, pid=1)
    inside, _ = gate(cand, [touching, sliver], 0.0)
    assert inside == [sliver]
