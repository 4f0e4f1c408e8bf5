import numpy as np
import pytest
from pytest import approx

from rgbdkit.core import AttributeFlags, BoundingBox, TrackPrediction
from rgbdkit.eval_vot import (
    attribute_report,
    f_score,
    load_predictions,
    precision_at,
    recall_at,
    save_predictions,
    sweep,
)

GT10 = BoundingBox(0, 0, 10, 10)


def boxed(iou_target, conf):
    """A prediction over GT10 with a chosen IoU: shrink the height."""
    # box (0,0,10,h): inter = 10h, union = 100 -> IoU = h/10
    return TrackPrediction(BoundingBox(0, 0, 10, 10 * iou_target), conf)


# Published benchmark rows: (Pr, Re, printed F) across three datasets.
TABLE2 = [
    (0.407, 0.381, 0.393), (0.503, 0.468, 0.485), (0.657, 0.669, 0.663),
    (0.440, 0.440, 0.440), (0.572, 0.563, 0.567), (0.713, 0.686, 0.699),
    (0.449, 0.421, 0.434), (0.490, 0.454, 0.471), (0.692, 0.664, 0.678),
    (0.449, 0.433, 0.441), (0.515, 0.495, 0.505), (0.670, 0.683, 0.676),
    (0.389, 0.292, 0.334), (0.442, 0.363, 0.398), (0.647, 0.543, 0.591),
    (0.389, 0.343, 0.364), (0.473, 0.402, 0.435), (0.709, 0.696, 0.702),
    (0.446, 0.329, 0.378), (0.512, 0.369, 0.429), (0.620, 0.560, 0.589),
    (0.428, 0.352, 0.386), (0.494, 0.424, 0.456), (0.630, 0.596, 0.613),
    (0.428, 0.405, 0.416), (0.560, 0.506, 0.532), (0.674, 0.642, 0.657),
    (0.469, 0.426, 0.446), (0.570, 0.558, 0.564), (0.743, 0.769, 0.755),
    (0.495, 0.413, 0.450), (0.540, 0.475, 0.506), (0.703, 0.689, 0.696),
    (0.488, 0.469, 0.478), (0.617, 0.607, 0.612), (0.711, 0.671, 0.690),
]


def test_f_score_fixed_point():
    assert f_score(0.7, 0.7) == approx(0.7)
    assert f_score(0.0, 0.0) == 0.0


@pytest.mark.parametrize("pr,re,f", TABLE2)
def test_f_score_published_rows(pr, re, f):
    assert f_score(pr, re) == approx(f, abs=1e-3)


def two_frame_fixture():
    # confs [0.9, 0.4], IoUs [0.8, 0.6]
    result = [boxed(0.8, 0.9), boxed(0.6, 0.4)]
    gt = [GT10, GT10]
    return result, gt


def test_precision_threshold_filters():
    result, gt = two_frame_fixture()
    assert precision_at(result, gt, 0.5) == approx(0.8)  # only frame 1 passes
    assert precision_at(result, gt, 0.0) == approx(0.7)


def test_precision_degenerate_all_below():
    result, gt = two_frame_fixture()
    assert precision_at(result, gt, 0.95) == 0.0


def test_recall_values():
    result, gt = two_frame_fixture()
    assert recall_at(result, gt, 0.5) == approx((0.8 + 0.0) / 2)
    assert recall_at(result, gt, 0.0) == approx(0.7)


def test_recall_requires_visible_frames():
    with pytest.raises(ValueError):
        recall_at([TrackPrediction(None, 0.0)], [None], 0.5)


def test_empty_predictions_zero_recall():
    preds = [TrackPrediction(None, 0.0)] * 3
    gt = [GT10] * 3
    assert recall_at(preds, gt, 0.0) == 0.0


def test_perfect_tracker_is_one():
    gt = [GT10, None, GT10]
    preds = [
        TrackPrediction(GT10, 1.0),
        TrackPrediction(None, 0.0),
        TrackPrediction(GT10, 1.0),
    ]
    assert precision_at(preds, gt, 0.5) == 1.0
    assert recall_at(preds, gt, 0.5) == 1.0
    curve = sweep([preds], [gt])
    assert (curve.best.pr, curve.best.re, curve.best.f) == (1.0, 1.0, 1.0)


def test_false_positive_over_absent_gt_penalizes_precision():
    gt = [GT10, None]
    preds = [TrackPrediction(GT10, 0.9), TrackPrediction(GT10, 0.9)]
    assert precision_at(preds, gt, 0.5) == approx(0.5)  # N_p = 2, one scores 0


def random_tracks(rng, n_tracks, max_frames=200):
    results, gts = [], []
    for _ in range(n_tracks):
        n = int(rng.integers(20, max_frames + 1))
        gt, preds = [], []
        for _ in range(n):
            visible = rng.random() < 0.8
            gt.append(GT10 if visible else None)
            r = rng.random()
            if r < 0.15:
                preds.append(TrackPrediction(None, float(rng.random())))
            else:
                iou = float(rng.uniform(0.05, 1.0))
                preds.append(boxed(iou, float(rng.random())))
        results.append(preds)
        gts.append(gt)
    return results, gts


def brute_force_best(results, gts):
    """Independent sweep: recompute pooled Pr/Re at every distinct confidence."""
    taus = sorted({p.confidence for r in results for p in r} | {float("-inf")})
    best = None
    for tau in taus:
        n_p = n_g = 0
        s_p = s_g = 0.0
        for result, gt in zip(results, gts):
            for pred, g in zip(result, gt):
                counted = pred.box is not None and pred.confidence >= tau
                iou = 0.0
                if counted and g is not None:
                    from rgbdkit.core import box_iou

                    iou = box_iou(pred.box, g)
                if counted:
                    n_p += 1
                    s_p += iou
                if g is not None:
                    n_g += 1
                    if counted:
                        s_g += iou
        pr = s_p / n_p if n_p else 0.0
        re = s_g / n_g if n_g else 0.0
        f = 2 * pr * re / (pr + re) if pr + re else 0.0
        if best is None or f > best[0] or (f == best[0] and tau < best[1]):
            best = (f, tau, pr, re)
    return best


def test_sweep_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    results, gts = random_tracks(rng, 10)
    curve = sweep(results, gts)
    f, tau, pr, re = brute_force_best(results, gts)
    assert curve.best.f == f
    assert curve.best.tau == tau
    assert curve.best.pr == pr and curve.best.re == re


def test_sweep_best_dominates_fixed_thresholds():
    rng = np.random.default_rng(3)
    results, gts = random_tracks(rng, 4, max_frames=60)
    curve = sweep(results, gts)
    for p in curve.points:
        assert curve.best.f >= p.f


def test_recall_non_increasing_in_tau():
    rng = np.random.default_rng(4)
    results, gts = random_tracks(rng, 3, max_frames=60)
    curve = sweep(results, gts)
    res = [p.re for p in sorted(curve.points, key=lambda p: p.tau)]
    assert all(b <= a + 1e-12 for a, b in zip(res, res[1:]))


def test_sweep_invariant_to_track_order():
    rng = np.random.default_rng(5)
    results, gts = random_tracks(rng, 5, max_frames=40)
    a = sweep(results, gts)
    b = sweep(results[::-1], gts[::-1])
    assert a.best.tau == b.best.tau
    # summation order differs, so allow float noise
    assert a.best.f == approx(b.best.f, abs=1e-12)
    assert a.best.pr == approx(b.best.pr, abs=1e-12)
    assert a.best.re == approx(b.best.re, abs=1e-12)


def test_adding_worse_duplicate_never_raises_best_f():
    rng = np.random.default_rng(6)
    results, gts = random_tracks(rng, 3, max_frames=40)
    base = sweep(results, gts).best.f
    worse = [[TrackPrediction(None, p.confidence) for p in r] for r in results]
    combined = sweep(results + worse, gts + gts).best.f
    assert combined <= base + 1e-12


def test_attribute_report_single_attribute_covers_all():
    result, gt = two_frame_fixture()
    flags = [[AttributeFlags(PO=True), AttributeFlags(PO=True)]]
    curve = sweep([result], [gt])
    report = attribute_report([result], [gt], flags)
    assert set(report) == {"PO"}
    assert report["PO"].f == approx(curve.best.f)


def test_attribute_absent_when_unflagged():
    result, gt = two_frame_fixture()
    flags = [[AttributeFlags(), AttributeFlags()]]
    assert attribute_report([result], [gt], flags) == {}


def test_attribute_restriction_manual_fixture():
    # 4 frames; PO on frames 1 and 2 only
    preds = [boxed(0.9, 0.8), boxed(0.5, 0.8), boxed(0.7, 0.8), boxed(0.2, 0.8)]
    gt = [GT10] * 4
    flags = [[
        AttributeFlags(),
        AttributeFlags(PO=True),
        AttributeFlags(PO=True),
        AttributeFlags(),
    ]]
    report = attribute_report([preds], [gt], flags)
    best_tau = sweep([preds], [gt]).best.tau
    pr = precision_at(preds[1:3], gt[1:3], best_tau)
    re = recall_at(preds[1:3], gt[1:3], best_tau)
    assert report["PO"].pr == approx(pr)
    assert report["PO"].f == approx(f_score(pr, re))


def test_per_track_mode_averages():
    r1 = [boxed(1.0, 0.9)]
    r2 = [boxed(0.5, 0.9)]
    gt = [GT10]
    curve = sweep([r1, r2], [gt, gt], mode="per-track")
    assert curve.best.pr == approx(0.75)


def test_prediction_csv_round_trip(tmp_path):
    preds = [boxed(0.8, 0.9), TrackPrediction(None, 0.25), boxed(0.33, 0.5)]
    path = tmp_path / "track.csv"
    save_predictions(path, preds)
    back = load_predictions(path)
    assert back == preds


def test_prediction_csv_rejects_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n")
    with pytest.raises(ValueError):
        load_predictions(path)
