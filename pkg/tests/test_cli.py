import csv
import io
import json
import math

import numpy as np
import pytest

from lidarcurate import Box3D, FrameAnnotations, ObjectAnnotation, OcclusionLevel, Point3, PointCloud
from lidarcurate.cli import main
from lidarcurate.geometry import center_distance, count_points_in_box
from lidarcurate.manifest import read_manifest
from synth import constraint_grid_frame, expected_kept, random_dataset, sample_inside, write_dataset


def ped(x, y=0.0, z=0.0, score=None, occ=OcclusionLevel.FULLY_VISIBLE):
    return ObjectAnnotation("Pedestrian", Box3D((x, y, z), 0.8, 0.6, 1.7), occ, score=score)


@pytest.fixture(scope="module")
def grid(tmp_path_factory):
    root = tmp_path_factory.mktemp("grid")
    frames = [constraint_grid_frame(i, background=300) for i in range(3)]
    manifest = write_dataset(root, [(c, a) for c, a, _ in frames])
    kept = {a.frame_id: [o for o, k in zip(a.objects, expected_kept(combos)) if k] for _, a, combos in frames}
    return manifest, kept


def read_stats(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_filter_defaults_keep_the_expected_set(grid, tmp_path):
    manifest, kept = grid
    out = tmp_path / "out"
    assert main(["filter", str(manifest), "-o", str(out), "-j", "1", "--verdicts"]) == 0
    for fid, objs in kept.items():
        got = read_manifest(out / "manifest.tsv").by_frame_id()[fid].load_labels()
        assert [(o.box, o.occlusion) for o in got.objects] == [(o.box, o.occlusion) for o in objs]
    doc = json.loads((out / "report.json").read_text())
    assert doc["report"]["total"] == 300
    assert doc["report"]["kept"] == sum(len(v) for v in kept.values()) == 81
    assert doc["config"]["eta"] == 15.0 and doc["config"]["delta"] == 10
    rows = (out / "verdicts.csv").read_text().splitlines()
    assert len(rows) == 301


def test_disable_all_is_byte_identical(grid, tmp_path):
    manifest, _ = grid
    src = manifest.parent
    # odd spacing on one line must survive untouched
    label = src / "label" / "000000.txt"
    original = label.read_text()
    first, rest = original.split("\n", 1)
    label.write_text("  ".join(first.split()) + "\n" + rest)
    try:
        out = tmp_path / "out"
        assert main(["filter", str(manifest), "-o", str(out), "--disable-all", "-j", "1"]) == 0
        for path in sorted((src / "label").glob("*.txt")):
            assert (out / "label" / path.name).read_bytes() == path.read_bytes()
    finally:
        label.write_text(original)


def test_flags_override_config_file(grid, tmp_path):
    manifest, _ = grid
    cfg = tmp_path / "filter.cfg"
    cfg.write_text("eta=5\ndelta=0\n")
    out = tmp_path / "out"
    assert main(["filter", str(manifest), "-o", str(out), "--config", str(cfg), "--eta", "1000", "-j", "1"]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["config"]["eta"] == 1000.0 and doc["config"]["delta"] == 0
    # only the fully occluded quarter is dropped
    assert doc["report"]["kept"] == 225


def test_missing_cloud_leaves_no_output(tmp_path):
    frames = random_dataset(3, n_frames=3)
    manifest = write_dataset(tmp_path / "data", frames)
    (tmp_path / "data" / "velodyne" / f"{frames[1][1].frame_id}.bin").unlink()
    out = tmp_path / "out"
    assert main(["filter", str(manifest), "-o", str(out), "-j", "1"]) == 3
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["data"]


def test_corrupt_frame_leaves_no_output(tmp_path):
    frames = random_dataset(4, n_frames=3)
    manifest = write_dataset(tmp_path / "data", frames)
    (tmp_path / "data" / "velodyne" / f"{frames[2][1].frame_id}.bin").write_bytes(b"\x00" * 17)
    out = tmp_path / "out"
    assert main(["filter", str(manifest), "-o", str(out), "-j", "2"]) == 3
    assert sorted(p.name for p in tmp_path.iterdir()) == ["data"]


@pytest.mark.parametrize("extra", [["--eta", "-1"], ["--discard-occlusions", "partially"], ["--config", "BAD"]])
def test_bad_config_exits_2(tmp_path, extra):
    manifest = write_dataset(tmp_path / "data", random_dataset(5, n_frames=1))
    bad = tmp_path / "bad.cfg"
    bad.write_text("eta=soon\n")
    extra = [str(bad) if e == "BAD" else e for e in extra]
    assert main(["filter", str(manifest), "-o", str(tmp_path / "out"), *extra]) == 2
    assert not (tmp_path / "out").exists()


def test_stats_distance_and_count(tmp_path, capsys):
    rng = np.random.default_rng(0)
    box = ped(3, 4).box
    cloud = PointCloud.from_points(sample_inside(rng, box, 12), "s")
    ann = FrameAnnotations("s", [ped(3, 4, occ=OcclusionLevel.SEVERELY_OCCLUDED)])
    manifest = write_dataset(tmp_path, [(cloud, ann)])
    assert main(["stats", str(manifest), "-j", "1"]) == 0
    rows = read_stats(capsys.readouterr().out)
    assert rows == [{"frame_id": "s", "class": "Pedestrian", "distance": "5.0", "point_count": "12",
                     "occlusion": "severely_occluded"}]


def test_stats_empty_dataset(tmp_path, capsys):
    cloud = PointCloud.from_points(np.zeros((0, 3)), "e")
    manifest = write_dataset(tmp_path, [(cloud, FrameAnnotations("e"))])
    assert main(["stats", str(manifest)]) == 0
    assert capsys.readouterr().out == "frame_id,class,distance,point_count,occlusion\n"


def test_stats_recompute_and_filter_consistency(tmp_path):
    frames = random_dataset(11, n_frames=4)
    manifest = write_dataset(tmp_path / "data", frames)
    stats = tmp_path / "stats.csv"
    assert main(["stats", str(manifest), "-o", str(stats), "-j", "2"]) == 0
    rows = read_stats(stats.read_text())
    expected = [(cloud, ann, o) for cloud, ann in frames for o in ann.objects]
    assert len(rows) == len(expected)
    for row, (cloud, ann, obj) in zip(rows, expected):
        assert abs(float(row["distance"]) - center_distance(ann.sensor_position, obj.box)) <= 1e-9
        assert int(row["point_count"]) == count_points_in_box(cloud, obj.box)

    out = tmp_path / "out"
    assert main(["filter", str(manifest), "-o", str(out), "-j", "1"]) == 0
    after = tmp_path / "after.csv"
    assert main(["stats", str(out / "manifest.tsv"), "-o", str(after)]) == 0
    survivors = read_stats(after.read_text())
    assert survivors
    violations = [r for r in survivors if float(r["distance"]) > 15.0 or int(r["point_count"]) < 10
                  or r["occlusion"] == "fully_occluded"]
    assert violations == []


def write_labels(root, frames):
    from lidarcurate import write_label_file

    root.mkdir(parents=True, exist_ok=True)
    for ann in frames:
        (root / f"{ann.frame_id}.txt").write_text(write_label_file(ann))
    return root


def test_eval_identity(tmp_path, capsys):
    gt = [FrameAnnotations("a", [ped(2), ped(6, 1)]), FrameAnnotations("b", [ped(-3, 2)])]
    det = [FrameAnnotations(f.frame_id, [ObjectAnnotation(o.class_name, o.box, score=0.9) for o in f.objects])
           for f in gt]
    code = main(["eval", str(write_labels(tmp_path / "gt", gt)), str(write_labels(tmp_path / "det", det)),
                 "-o", str(tmp_path / "res")])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "ap=1.0"
    assert (tmp_path / "res" / "summary.txt").read_text().startswith("ap=1.0\n")


def test_eval_hand_computed_all_point(tmp_path):
    gt = [FrameAnnotations("a", [ped(0), ped(5)])]
    det = [FrameAnnotations("a", [ped(0, score=0.9), ped(20, score=0.8), ped(5, score=0.7)])]
    res = tmp_path / "res"
    code = main(["eval", str(write_labels(tmp_path / "gt", gt)), str(write_labels(tmp_path / "det", det)),
                 "-o", str(res), "--ap-mode", "all_point"])
    assert code == 0
    summary = dict(line.split("=", 1) for line in (res / "summary.txt").read_text().splitlines())
    assert abs(float(summary["ap"]) - 5 / 6) <= 1e-9
    assert (summary["tp"], summary["fp"], summary["fn"]) == ("2", "1", "0")
    recalls = [float(r["recall"]) for r in csv.DictReader(io.StringIO((res / "pr_curve.csv").read_text()))]
    assert recalls == sorted(recalls) and len(recalls) == 3


def test_eval_exit_codes(tmp_path):
    gt = write_labels(tmp_path / "gt", [FrameAnnotations("a", [ped(0)])])
    unscored = write_labels(tmp_path / "unscored", [FrameAnnotations("a", [ped(0)])])
    assert main(["eval", str(gt), str(unscored)]) == 4
    empty_gt = write_labels(tmp_path / "empty", [FrameAnnotations("a")])
    dets = write_labels(tmp_path / "det", [FrameAnnotations("a", [ped(0, score=0.5)])])
    assert main(["eval", str(empty_gt), str(dets)]) == 5
    stray = write_labels(tmp_path / "stray", [FrameAnnotations("zz", [ped(0, score=0.5)])])
    assert main(["eval", str(gt), str(stray)]) == 3
    assert main(["eval", str(gt), str(tmp_path / "missing")]) == 3
    assert main(["eval", str(gt), str(dets), "--iou-threshold", "2"]) == 2


def test_eval_config_file_and_bev(tmp_path):
    gt = write_labels(tmp_path / "gt", [FrameAnnotations("a", [ped(0)])])
    lifted = write_labels(tmp_path / "det", [FrameAnnotations("a", [ped(0, z=5.0, score=0.5)])])
    cfg = tmp_path / "eval.cfg"
    cfg.write_text("iou_kind=bev\n")
    out = tmp_path / "o"
    assert main(["eval", str(gt), str(lifted), "--config", str(cfg), "-o", str(out)]) == 0
    assert (out / "summary.txt").read_text().startswith("ap=1.0\n")
    assert main(["eval", str(gt), str(lifted), "-o", str(out)]) == 0
    assert (out / "summary.txt").read_text().startswith("ap=0.0\n")
