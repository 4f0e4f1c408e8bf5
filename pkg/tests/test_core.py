import numpy as np
import pytest
from hypothesis import given, strategies as st
from pytest import approx

from rgbdkit.core import (
    BoundingBox,
    CameraPose,
    ConfidenceMap,
    TargetMask,
    box_iou,
    mask_iou,
    mask_to_box,
)


def test_box_requires_positive_size():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 5)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 5, -1)


def test_box_iou_identity():
    b = BoundingBox(0, 0, 10, 10)
    assert box_iou(b, b) == 1.0


def test_box_iou_disjoint():
    assert box_iou(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 1, 1)) == 0.0


def test_box_iou_partial_overlap():
    # inter = 1, union = 4 + 4 - 1 = 7
    a = BoundingBox(0, 0, 2, 2)
    b = BoundingBox(1, 1, 2, 2)
    assert box_iou(a, b) == approx(1 / 7)
    assert box_iou(b, a) == approx(box_iou(a, b))


boxes = st.builds(
    BoundingBox,
    st.floats(-20, 20),
    st.floats(-20, 20),
    st.floats(0.1, 20),
    st.floats(0.1, 20),
)


@given(boxes, boxes)
def test_box_iou_symmetric_and_bounded(a, b):
    v = box_iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == approx(box_iou(b, a))


def test_mask_to_box_empty():
    assert mask_to_box(TargetMask(np.zeros((4, 4), dtype=bool))) is None


def test_mask_to_box_single_pixel():
    m = np.zeros((8, 8), dtype=bool)
    m[4, 3] = True  # pixel at (x=3, y=4)
    assert mask_to_box(TargetMask(m)) == BoundingBox(3, 4, 1, 1)


def test_mask_to_box_two_pixels():
    m = np.zeros((8, 8), dtype=bool)
    m[1, 1] = True
    m[2, 4] = True
    assert mask_to_box(TargetMask(m)) == BoundingBox(1, 1, 4, 2)


small_masks = st.builds(
    lambda bits, w: TargetMask(np.array(bits[: w * 6]).reshape(6, w)),
    st.lists(st.booleans(), min_size=48, max_size=48),
    st.just(8),
)


@given(small_masks)
def test_mask_to_box_tight(mask):
    box = mask_to_box(mask)
    ys, xs = np.nonzero(mask.data)
    if len(xs) == 0:
        assert box is None
        return
    # contains every set pixel
    assert box.x <= xs.min() and xs.max() < box.x2
    assert box.y <= ys.min() and ys.max() < box.y2
    # shrinking any side loses a set pixel
    assert (xs == box.x).any() and (xs == box.x2 - 1).any()
    assert (ys == box.y).any() and (ys == box.y2 - 1).any()


def test_mask_iou_cases():
    a = np.zeros((4, 4), dtype=bool)
    a[0, 0:2] = True
    a[1, 0:2] = True  # 4 pixels
    b = np.zeros((4, 4), dtype=bool)
    b[1, 0:2] = True
    b[2, 0:2] = True  # 4 pixels, overlap 2
    assert mask_iou(TargetMask(a), TargetMask(a)) == 1.0
    assert mask_iou(TargetMask(a), TargetMask(b)) == approx(2 / 6)
    disjoint = np.zeros((4, 4), dtype=bool)
    disjoint[3, 3] = True
    assert mask_iou(TargetMask(a), TargetMask(disjoint)) == 0.0


def test_mask_iou_both_empty_is_one():
    e = TargetMask(np.zeros((3, 3), dtype=bool))
    assert mask_iou(e, e) == 1.0


def test_mask_iou_dim_mismatch():
    with pytest.raises(ValueError):
        mask_iou(TargetMask(np.zeros((3, 3), dtype=bool)), TargetMask(np.zeros((4, 4), dtype=bool)))


@given(small_masks, small_masks)
def test_mask_iou_one_iff_identical(a, b):
    v = mask_iou(a, b)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == np.array_equal(a.data, b.data)


def test_camera_pose_validation():
    CameraPose(np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        CameraPose(np.eye(3) * 1.001, np.zeros(3))
    reflection = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        CameraPose(reflection, np.zeros(3))


def test_confidence_map_rejects_illegal_level():
    with pytest.raises(ValueError):
        ConfidenceMap(np.array([[0, 1], [2, 3]]))
