import pytest

from drivekit.evaluate import evaluate, gt_box_normalized, parse_box3d_list, predictions_from_answers
from drivekit.model import Box2D, Box3D, Prediction, ScoredBox2D, Task, TaskSample
from drivekit.pipeline import build_dataset
from drivekit.records import dumps_document
from drivekit.synthetic import synthetic_frames


@pytest.fixture
def built(config):
    return build_dataset(synthetic_frames(25, seed=4, caption_every=3), config.pipeline)


def test_copied_answers_score_perfectly(built, config):
    report = evaluate(built.samples, predictions_from_answers(built.samples), config)
    tasks = report["tasks"]
    assert set(tasks) == {t.value for t in Task}
    assert tasks["VG2D"]["map"] == tasks["VG2D"]["f1"] == tasks["VG2D"]["miou"] == 1.0
    v = tasks["VG3D"]
    assert v["pr"] == v["map"] == v["f1"] == 1.0
    assert set(v["pr_at_k"].values()) == {1.0}
    assert tasks["Planning"]["accuracy"] == 1.0
    for name in ("DenseCaption", "RegionDescription", "Prediction"):
        assert tasks[name]["bleu"] == 1.0 and tasks[name]["rouge_l"] == 1.0
    assert report["counts"]["missing"] == 0


def test_empty_predictions_score_zero(built, config):
    report = evaluate(built.samples, [], config)
    assert report["counts"]["missing"] == len(built.samples)
    for section in report["tasks"].values():
        for key, value in section.items():
            if key in ("bleu", "rouge_l", "cider", "map", "f1", "miou", "pr", "accuracy"):
                assert value == 0.0, key


def test_report_echoes_thresholds(built, config):
    report = evaluate(built.samples, [], config)
    echo = report["config"]["eval"]
    assert echo["f1_iou_thresh_3d"] == 0.25 and echo["pr_ks"] == [0.5, 1.0, 2.0, 4.0]
    assert echo["map_dist_thresh"] == 0.5 and echo["cider_sigma"] == 6.0
    assert report["metadata"]["cider_variant"] == "CIDEr-D"


def test_report_is_deterministic(built, config):
    preds = predictions_from_answers(built.samples)
    assert dumps_document(evaluate(built.samples, preds, config)) == \
        dumps_document(evaluate(built.samples, list(reversed(preds)), config))


def test_text_answers_are_parsed(config):
    gt = Box2D(160, 90, 480, 450)  # normalized (100, 100), (300, 500)
    s2 = TaskSample("a", Task.VG2D, "front", "p", "x", target_boxes_2d=(gt,))
    box = Box3D(1.0, 2.0, 0.5, 4.0, 2.0, 1.5, 0.3)
    s3 = TaskSample("b", Task.VG3D, "front", "p", "x", target_boxes_3d=(box,), category="car")
    preds = [Prediction("a", "It is at (100, 100), (300, 500)."),
             Prediction("b", "1 car target(s): (1.00, 2.00, 0.50, 4.00, 2.00, 1.50, 0.30)")]
    tasks = evaluate([s2, s3], preds, config)["tasks"]
    assert tasks["VG2D"]["miou"] == 1.0 and tasks["VG2D"]["unscorable"] == 0
    assert tasks["VG3D"]["pr"] == 1.0 and tasks["VG3D"]["f1"] == 1.0


def test_unscorable_and_unknown(config):
    s2 = TaskSample("a", Task.VG2D, "front", "p", "x", target_boxes_2d=(Box2D(0, 0, 10, 10),))
    report = evaluate([s2], [Prediction("a", "no idea"), Prediction("zzz", "x")], config)
    assert report["tasks"]["VG2D"]["unscorable"] == 1 and report["tasks"]["VG2D"]["miou"] == 0.0
    assert report["unknown_prediction_ids"] == ["zzz"]


def test_explicit_2d_boxes_take_precedence(config):
    s2 = TaskSample("a", Task.VG2D, "front", "p", "x", target_boxes_2d=(Box2D(160, 90, 480, 450),))
    pred = Prediction("a", "garbage", boxes_2d=(ScoredBox2D(Box2D(100, 100, 300, 500), 0.9),))
    assert evaluate([s2], [pred], config)["tasks"]["VG2D"]["miou"] == 1.0


def test_duplicate_predictions_rejected(config):
    s = TaskSample("a", Task.PLANNING, "surround", "p", "turn_left")
    with pytest.raises(ValueError, match="duplicate"):
        evaluate([s], [Prediction("a", "x"), Prediction("a", "y")], config)


def test_helpers():
    assert parse_box3d_list("(1, 2, 3, 1, 1, 1, 0); (0, 0, 0, -1, 1, 1, 0)") == [Box3D(1, 2, 3, 1, 1, 1, 0)]
    assert parse_box3d_list(None) == []
    assert gt_box_normalized(Box2D(0, 0, 0.5, 0.5), 1600, 900) == Box2D(0, 0, 1, 1)
    assert gt_box_normalized(Box2D(1599, 899, 1600, 900), 1600, 900) == Box2D(998, 998, 999, 999)
