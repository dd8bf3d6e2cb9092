import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import memory_sequence, write_sequence
from lowlight_bench.dataset import (
    Box,
    DatasetError,
    TrackResult,
    ValidationConfig,
    Visibility,
    dataset_stats,
    format_box,
    load_dataset,
    load_results,
    load_sequence,
    parse_box_line,
    validate_sequence,
    write_annotations,
    write_result,
)


def test_minimal_sequence(tmp_path):
    d = write_sequence(tmp_path / "s", [Box(10, 10, 20, 20)] * 5)
    seq = load_sequence(d)
    assert len(seq) == 5
    assert all(f.visibility == Visibility.VISIBLE for f in seq.frames)
    assert seq.init_box == Box(10, 10, 20, 20)
    assert seq.image_size == (100, 100)


def test_gt_line_count_mismatch(tmp_path):
    d = write_sequence(tmp_path / "s", [Box(10, 10, 20, 20)] * 5)
    (d / "groundtruth_rect.txt").write_text("10,10,20,20\n" * 4)
    with pytest.raises(DatasetError, match="GT line count mismatch"):
        load_sequence(d)


def test_foc_frame_has_no_box(tmp_path):
    boxes = [Box(10, 10, 20, 20)] * 2 + [None] + [Box(10, 10, 20, 20)] * 2
    d = write_sequence(tmp_path / "s", boxes, vis=[0, 0, 2, 0, 0])
    assert (d / "groundtruth_rect.txt").read_text().splitlines()[2] == "0,0,0,0"
    f3 = load_sequence(d).frames[2]
    assert f3.visibility == Visibility.FOC and f3.gt is None


def test_first_frame_must_be_visible(tmp_path):
    d = write_sequence(tmp_path / "s", [Box(1, 1, 5, 5)] * 3, vis=[1, 0, 0])
    with pytest.raises(DatasetError, match="first frame not Visible"):
        load_sequence(d)


def test_visible_frame_needs_positive_box(tmp_path):
    d = write_sequence(tmp_path / "s", [Box(1, 1, 5, 5)] * 3)
    (d / "groundtruth_rect.txt").write_text("1,1,5,5\n1,1,0,5\n1,1,5,5\n")
    with pytest.raises(DatasetError, match="non-positive"):
        load_sequence(d)


def test_missing_gt_and_malformed_line(tmp_path):
    d = write_sequence(tmp_path / "s", [Box(1, 1, 5, 5)] * 2)
    (d / "groundtruth_rect.txt").write_text("1,1,5,5\n1,1,five,5\n")
    with pytest.raises(DatasetError):
        load_sequence(d)
    (d / "groundtruth_rect.txt").unlink()
    with pytest.raises(DatasetError, match="missing GT"):
        load_sequence(d)


def test_box_line_formats():
    assert parse_box_line("1.5,2,3,4") == Box(1.5, 2, 3, 4)
    assert parse_box_line("1.5 2\t3 4") == Box(1.5, 2, 3, 4)
    assert format_box(Box(1.0, 2.0, 3.0, 4.0)) == "1,2,3,4"
    assert format_box(Box(0.1, 2.0, 3.0, 4.0)) == "0.1,2,3,4"
    assert format_box(None) == "0,0,0,0"


def test_validation_large_box_warning():
    seq = memory_sequence("s", [Box(10, 10, 80, 80)] + [Box(10, 10, 10, 10)] * 99)
    rep = validate_sequence(seq, ValidationConfig(check_image_sizes=False))
    assert rep.ok
    assert rep.warnings == [(1, "box occupies 0.64 of image")]


def test_validation_clean_and_short():
    clean = memory_sequence("s", [Box(10, 10, 10, 10)] * 100)
    cfg = ValidationConfig(check_image_sizes=False)
    rep = validate_sequence(clean, cfg)
    assert rep.errors == [] and rep.warnings == []
    short = validate_sequence(memory_sequence("s", [Box(10, 10, 10, 10)] * 10), cfg)
    assert short.ok
    assert [m for _, m in short.warnings] == ["length below 30"]


def test_validation_errors():
    cfg = ValidationConfig(check_image_sizes=False)
    assert not validate_sequence(memory_sequence("s", [Box(1, 1, 5, 5)]), cfg).ok
    bad = memory_sequence("s", [Box(1, 1, 5, 5), Box(1, 1, -2, 5)])
    assert any("non-positive" in m for _, m in validate_sequence(bad, cfg).errors)


def test_validation_checks_image_files(tmp_path):
    d = write_sequence(tmp_path / "s", [Box(1, 1, 5, 5)] * 3)
    seq = load_sequence(d)
    assert validate_sequence(seq).ok
    (d / "img" / "00000002.png").unlink()
    assert any("missing" in m for _, m in validate_sequence(seq).errors)


def test_load_results(tmp_path):
    boxes = [Box(10, 10, 20, 20), Box(11, 10, 20, 20), Box(12.5, 10, 20, 20)]
    seq = load_sequence(write_sequence(tmp_path / "s", boxes))
    rdir = tmp_path / "res"
    write_result(rdir, TrackResult("s", boxes))
    assert load_results(rdir, [seq])["s"].boxes == boxes

    write_result(rdir, TrackResult("s", [Box(9, 10, 20, 20)] + boxes[1:]))
    with pytest.raises(DatasetError, match="OPE init violated"):
        load_results(rdir, [seq])

    write_result(rdir, TrackResult("s", boxes[:2]))
    with pytest.raises(DatasetError, match="result count mismatch"):
        load_results(rdir, [seq])

    with pytest.raises(DatasetError, match="missing result"):
        load_results(tmp_path / "nothing", [seq])


def test_result_count_99_of_100(tmp_path):
    seq = memory_sequence("s", [Box(10, 10, 20, 20)] * 100)
    write_result(tmp_path, TrackResult("s", [Box(10, 10, 20, 20)] * 99))
    with pytest.raises(DatasetError, match="result count mismatch"):
        load_results(tmp_path, [seq])


def test_load_dataset_collects_failures(tmp_path):
    write_sequence(tmp_path / "a", [Box(1, 1, 5, 5)] * 2)
    bad = write_sequence(tmp_path / "b", [Box(1, 1, 5, 5)] * 2)
    (bad / "groundtruth_rect.txt").write_text("1,1,5,5\n")
    seqs, failed = load_dataset(tmp_path)
    assert [s.name for s in seqs] == ["a"]
    assert "GT line count mismatch" in failed["b"]
    with pytest.raises(DatasetError):
        load_dataset(tmp_path, strict=True)


def test_stats_constant_intensity(tmp_path):
    write_sequence(tmp_path / "s", [Box(10, 10, 20, 20)] * 10, fill=10)
    seqs, _ = load_dataset(tmp_path)
    st_ = dataset_stats(seqs)
    assert st_.mean_lai == 10.0
    assert st_.n_frames == 10 and st_.n_lai_frames == 10


def test_stats_two_sequences_average(tmp_path):
    write_sequence(tmp_path / "a", [Box(10, 10, 20, 20)] * 6, fill=19)
    write_sequence(tmp_path / "b", [Box(10, 10, 20, 20)] * 6, fill=21)
    seqs, _ = load_dataset(tmp_path)
    assert dataset_stats(seqs).mean_lai == 20.0


def test_stats_empty():
    with pytest.raises(DatasetError):
        dataset_stats([])


boxes_st = st.builds(
    Box,
    st.integers(0, 60).map(float),
    st.integers(0, 60).map(float),
    st.floats(0.5, 39, allow_nan=False).map(lambda v: round(v, 3)),
    st.floats(0.5, 39, allow_nan=False).map(lambda v: round(v, 3)),
)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(boxes_st, st.sampled_from([0, 1, 2, 3])), min_size=2, max_size=6))
def test_annotation_round_trip(tmp_path_factory, frames):
    frames[0] = (frames[0][0], 0)
    vis = [Visibility(v) for _, v in frames]
    boxes = [b for b, _ in frames]
    seq = memory_sequence("rt", boxes, vis)
    d = tmp_path_factory.mktemp("rt")
    write_sequence(d, [None] * len(frames), size=(100, 100))
    write_annotations(seq, d)
    loaded = load_sequence(d)
    assert [f.gt for f in loaded.frames] == [f.gt for f in seq.frames]
    assert [f.visibility for f in loaded.frames] == vis
    assert all(f.gt.w > 0 and f.gt.h > 0 for f in loaded.frames if f.visibility.has_box)

    rdir = d / "res"
    gt_boxes = [f.gt or Box(0, 0, 0, 0) for f in loaded.frames]
    write_result(rdir, TrackResult(loaded.name, gt_boxes))
    got = load_results(rdir, [loaded])[loaded.name].boxes
    assert [g for g, f in zip(got, loaded.frames) if f.gt] == [f.gt for f in loaded.frames if f.gt]
    assert np.array_equal(np.array([b.as_tuple() for b in got]), np.array([b.as_tuple() for b in gt_boxes]))
