import dataclasses

import numpy as np
import pytest

from conftest import memory_sequence
from lowlight_bench.dataset import Box, load_dataset, load_results
from lowlight_bench.enhance import EnhanceOp
from lowlight_bench.ope import RunConfig, TrackerFactory, run_benchmark, run_sequence
from lowlight_bench.synth import generate_dataset, preset
from lowlight_bench.trackers import StaticTracker, Tracker


@pytest.fixture(scope="module")
def synth_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    specs = {
        "easy": preset("easy", frames=12),
        "dark": preset("dark", frames=12, seed=3),
        "occl": preset("occluded", frames=24),
    }
    return generate_dataset(specs, root)


class Recorder(Tracker):
    def __init__(self, nan_at=None):
        super().__init__()
        self.calls = []
        self.nan_at = nan_at

    def init(self, image, box):
        self.calls.append(("init", image.copy(), box))
        self.box = box

    def update(self, image):
        self.calls.append(("update", image.copy()))
        k = len(self.calls)
        if k == self.nan_at:
            return Box(float("nan"), 0, 5, 5)
        self.box = Box(self.box.x + 1, self.box.y, self.box.w, self.box.h)
        return self.box


def test_static_tracker_outputs_init(synth_root):
    seqs, _ = load_dataset(synth_root)
    for seq in seqs:
        res = run_sequence(StaticTracker(), seq)
        assert res.boxes == [seq.init_box] * len(seq)


def test_nan_output_holds_previous_box(synth_root):
    seq = load_dataset(synth_root)[0][0]
    res = run_sequence(Recorder(nan_at=4), seq)
    assert res.boxes[0] == seq.init_box
    assert res.boxes[3] == res.boxes[2]
    assert [i for i, _ in res.warnings] == [4]


def test_no_ground_truth_leakage(synth_root):
    seq = load_dataset(synth_root)[0][0]
    rec = Recorder()
    run_sequence(rec, seq)
    kinds = [c[0] for c in rec.calls]
    assert kinds == ["init"] + ["update"] * (len(seq) - 1)
    assert rec.calls[0][2] == seq.init_box
    assert all(isinstance(c[1], np.ndarray) and len(c) == 2 for c in rec.calls[1:])

    # scrambling every later GT box must not change the tracker's output
    junk = tuple(dataclasses.replace(f, gt=Box(1, 1, 3, 3) if f.gt else None) for f in seq.frames[1:])
    scrambled = dataclasses.replace(seq, frames=seq.frames[:1] + junk)
    assert run_sequence(Recorder(), scrambled).boxes == run_sequence(Recorder(), seq).boxes


def test_enhancement_reaches_tracker(synth_root):
    seq = load_dataset(synth_root)[0][0]
    plain, bright = Recorder(), Recorder()
    run_sequence(plain, seq)
    run_sequence(bright, seq, RunConfig(enhancement=EnhanceOp("gamma", 0.5)))
    assert all(b[1].sum() > p[1].sum() for p, b in zip(plain.calls, bright.calls))


def _file_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("tracker", ["ncc", "mosse"])
def test_workers_do_not_change_results(synth_root, tmp_path, tracker):
    seqs, _ = load_dataset(synth_root)
    factory = TrackerFactory(tracker)
    run_benchmark(factory, seqs, RunConfig(parallel_workers=1, output_dir=tmp_path / "w1"))
    run_benchmark(factory, seqs, RunConfig(parallel_workers=4, output_dir=tmp_path / "w4"))
    a, b = _file_bytes(tmp_path / "w1" / tracker), _file_bytes(tmp_path / "w4" / tracker)
    assert len(a) == 3 and a == b
    loaded = load_results(tmp_path / "w1" / tracker, seqs)
    assert set(loaded) == {s.name for s in seqs}


def test_invalid_sequence_skipped(synth_root, tmp_path):
    seqs, _ = load_dataset(synth_root)
    bad = memory_sequence("bad", [Box(1, 1, 5, 5)])
    out = run_benchmark(TrackerFactory("static"), seqs[:2] + [bad], RunConfig(output_dir=tmp_path))
    assert sorted(out.results) == sorted(s.name for s in seqs[:2])
    assert list(out.skipped) == ["bad"]
    assert len(list((tmp_path / "static").iterdir())) == 2


def test_factory_rejects_bad_options():
    with pytest.raises(TypeError):
        TrackerFactory("ncc", radius=3)
