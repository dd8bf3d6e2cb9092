import json
import math

import numpy as np
import pytest

from lowlight_bench.attributes import compute_attributes, frame_flags
from lowlight_bench.dataset import Visibility, load_sequence, validate_sequence
from lowlight_bench.synth import (
    PRESETS,
    SynthSpec,
    SynthSpecError,
    frame_noise,
    generate,
    iter_frames,
    preset,
    target_patch,
)


def tree_bytes(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_generate_is_deterministic(tmp_path):
    spec = preset("dark", frames=8, seed=42)
    a = tree_bytes(generate(spec, tmp_path / "a"))
    b = tree_bytes(generate(spec, tmp_path / "b"))
    assert a == b and len(a) == 8 + 4
    c = tree_bytes(generate(preset("dark", frames=8, seed=43), tmp_path / "c"))
    assert c["img/00000002.png"] != a["img/00000002.png"]


def test_noise_keyed_per_frame():
    a = frame_noise(7, 3, (4, 5), 2.0)
    assert np.array_equal(a, frame_noise(7, 3, (4, 5), 2.0))
    assert not np.array_equal(a, frame_noise(7, 4, (4, 5), 2.0))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_load_and_validate(tmp_path, name):
    seq = load_sequence(generate(preset(name, frames=12), tmp_path / name))
    rep = validate_sequence(seq)
    assert rep.errors == []
    assert [f.gt for f in seq.frames if f.gt] == [b for _, b, _ in iter_frames(preset(name, frames=12)) if b]


def test_documented_presets():
    easy, dark = preset("easy"), preset("dark")
    assert easy.noise_sigma == 0 and easy.illumination == 1.0 and (easy.vx, easy.vy) == (2.0, 0.0)
    assert dark.illumination == 15 / 255 and dark.noise_sigma == 3
    sc = preset("scaled")
    assert (sc.scale_amp, sc.scale_period) == (0.6, 40.0)
    with pytest.raises(SynthSpecError):
        preset("night")


def test_constant_darkness_lai(tmp_path):
    spec = SynthSpec(illumination=10 / 255, target_high=255.0, target_low=255.0, frames=6)
    seq = load_sequence(generate(spec, tmp_path / "s"))
    flags = frame_flags(seq)
    assert [f.lai_value for f in flags] == [10.0] * 6
    aset, _ = compute_attributes(seq)
    assert "LAI" in aset


def test_no_scale_change_no_sv_arc(tmp_path):
    seq = load_sequence(generate(preset("easy", frames=10), tmp_path / "s"))
    assert not any(f.sv or f.arc for f in frame_flags(seq))


def test_scaled_preset_sv_frames(tmp_path):
    spec = preset("scaled")
    seq = load_sequence(generate(spec, tmp_path / "s"))
    got = [f.index for f in frame_flags(seq) if f.sv]
    # area ratio s(t)^2 leaves [0.5, 2] where sin(2 pi t / T) passes these levels
    hi, lo = (math.sqrt(2) - 1) / 0.6, (math.sqrt(0.5) - 1) / 0.6
    want = [k + 1 for k in range(spec.frames)
            if not lo <= math.sin(2 * math.pi * k / 40) <= hi]
    assert got == want and got[0] == 6


def test_clean_render_matches_patch():
    spec = preset("easy", frames=5, illumination=[1.0, 0.8, 0.5, 0.3, 0.1])
    for k, (img, box, _) in enumerate(iter_frames(spec)):
        x, y, w, h = (int(v) for v in box.as_tuple())
        want = np.floor(target_patch(spec, w, h) * spec.illumination_at()[k] + 0.5)
        assert np.array_equal(img[y:y + h, x:x + w, 0], want.astype(np.uint8))
        assert np.array_equal(img[..., 0], img[..., 2])


def test_occlusion_labels(tmp_path):
    spec = preset("occluded", frames=25)
    seq = load_sequence(generate(spec, tmp_path / "s"))
    foc = [f.index for f in seq.frames if f.visibility == Visibility.FOC]
    assert foc == list(range(15, 20))
    assert all(f.gt is None for f in seq.frames if f.index in foc)
    assert "FOC" in seq.manual_attributes


def test_lai_of_dark_preset_is_low(tmp_path):
    seq = load_sequence(generate(preset("dark", frames=5), tmp_path / "s"))
    assert all(f.lai_value < 20 for f in frame_flags(seq))


@pytest.mark.parametrize("bad", [
    dict(frames=1),
    dict(illumination=0.0),
    dict(illumination=1.5),
    dict(occlusions=[[1, 3]]),
    dict(occlusions=[[5, 2]]),
    dict(start_x=190.0),
    dict(noise_sigma=-1.0),
])
def test_invalid_specs(bad):
    with pytest.raises(SynthSpecError):
        SynthSpec(**bad).validate()


def test_spec_json_round_trip(tmp_path):
    spec = preset("scaled", seed=9)
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec.to_dict()))
    assert SynthSpec.from_json(p) == spec
    with pytest.raises(SynthSpecError):
        SynthSpec.from_dict({"colour": 3})
