import numpy as np
import pytest

from farvox.audio_io import AudioBuffer, read_wav, write_wav
from farvox.errors import DataError
from farvox.noise_extraction import (
    apply_mask,
    build_mask,
    complement_intervals,
    detect_activity,
    extract_noise,
    load_noise_pool,
    mine_noise_pool,
    save_noise_pool,
)
from oracles import mask_runs, naive_activity_mask


def buffer(samples, rate=1000, name="sig"):
    return AudioBuffer(np.asarray(samples, dtype=np.float64), rate, name)


def three_level_signal():
    """100 quiet, 50 loud, 100 quiet samples; the canonical small example."""
    return buffer(
        np.concatenate([np.full(100, 0.001), np.full(50, 0.5), np.full(100, 0.001)])
    )


def test_silence_never_active():
    assert detect_activity(buffer(np.zeros(500)), -40.0, 10, 10) == []


def test_full_scale_always_active():
    sig = buffer(np.ones(500))
    assert detect_activity(sig, -40.0, 10, 10) == [(0, 500)]


def test_three_level_example():
    intervals = detect_activity(three_level_signal(), -40.0, 10, 10)
    assert intervals == [(100, 150)]


def test_detect_matches_naive_oracle():
    rng = np.random.default_rng(21)
    for _ in range(25):
        n = int(rng.integers(200, 3000))
        x = 0.001 * rng.normal(size=n)
        for _ in range(int(rng.integers(0, 4))):
            start = int(rng.integers(0, n))
            length = int(rng.integers(10, 300))
            x[start : start + length] += 0.5 * rng.normal(size=len(x[start : start + length]))
        frame_len = int(rng.integers(8, 60))
        hop = int(rng.integers(1, frame_len + 1))
        got = detect_activity(buffer(x), -40.0, frame_len, hop)
        expected = mask_runs(naive_activity_mask(x, -40.0, frame_len, hop))
        assert got == expected


def test_build_mask():
    assert build_mask([], 5).tolist() == [1, 1, 1, 1, 1]
    assert build_mask([(1, 3)], 5).tolist() == [1, 0, 0, 1, 1]
    mask = build_mask(detect_activity(three_level_signal(), -40.0, 10, 10), 250)
    assert np.all(mask[100:150] == 0)
    assert np.all(mask[:100] == 1) and np.all(mask[150:] == 1)
    with pytest.raises(ValueError):
        build_mask([(3, 7)], 5)


def test_mask_zero_iff_in_interval():
    rng = np.random.default_rng(5)
    for _ in range(30):
        length = int(rng.integers(10, 200))
        intervals = []
        pos = 0
        while pos < length:
            start = pos + int(rng.integers(0, 20))
            end = start + int(rng.integers(1, 20))
            if end > length:
                break
            intervals.append((start, end))
            pos = end + 1
        mask = build_mask(intervals, length)
        inside = np.zeros(length, dtype=bool)
        for a, b in intervals:
            inside[a:b] = True
        np.testing.assert_array_equal(mask == 0, inside)


def test_apply_mask():
    sig = three_level_signal()
    assert np.array_equal(apply_mask(sig, np.ones(250, np.uint8)).samples, sig.samples)
    assert np.all(apply_mask(sig, np.zeros(250, np.uint8)).samples == 0)
    masked = apply_mask(sig, build_mask([(100, 150)], 250))
    assert np.all(masked.samples[100:150] == 0)
    np.testing.assert_array_equal(masked.samples[:100], sig.samples[:100])
    with pytest.raises(ValueError):
        apply_mask(sig, np.ones(10, np.uint8))


def test_extract_noise():
    sig = three_level_signal()
    whole = extract_noise(sig, [], min_segment=1)
    assert len(whole) == 1 and len(whole[0]) == 250
    assert extract_noise(sig, [(0, 250)], min_segment=1) == []
    segments = extract_noise(sig, [(100, 150)], min_segment=1)
    assert [len(s) for s in segments] == [100, 100]
    np.testing.assert_array_equal(segments[0].samples, sig.samples[:100])
    np.testing.assert_array_equal(segments[1].samples, sig.samples[150:])


def test_min_segment_filters_short_gaps():
    segs = complement_intervals([(10, 20), (25, 100)], 110, min_segment=8)
    # the 5-sample gap (20, 25) is dropped, the 10-sample head and tail stay
    assert segs == [(0, 10), (100, 110)]


def test_partition_property():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(100, 2000))
        x = 0.001 * rng.normal(size=n)
        burst_at = int(rng.integers(0, n))
        x[burst_at : burst_at + int(rng.integers(5, 200))] += 0.4
        sig = buffer(x)
        intervals = detect_activity(sig, -40.0, 16, 8)
        segments = complement_intervals(intervals, n, min_segment=1)
        seen = np.zeros(n, dtype=int)
        for a, b in intervals:
            seen[a:b] += 1
        for a, b in segments:
            seen[a:b] += 1
        assert np.all(seen == 1)


def test_idempotent_on_constant_noise_clip():
    clip = buffer(np.full(400, 0.001))  # about -60 dBFS, below threshold
    intervals = detect_activity(clip, -40.0, 10, 10)
    assert intervals == []
    again = extract_noise(clip, intervals, min_segment=1)
    assert len(again) == 1
    np.testing.assert_array_equal(again[0].samples, clip.samples)


def test_threshold_monotonicity():
    rng = np.random.default_rng(9)
    x = 0.001 * rng.normal(size=1500)
    x[400:700] += 0.3 * rng.normal(size=300)
    sig = buffer(x)
    prev = None
    for thr in (-70.0, -50.0, -30.0, -10.0):
        active = sum(b - a for a, b in detect_activity(sig, thr, 20, 10))
        if prev is not None:
            assert active <= prev
        prev = active


def test_detect_validation():
    with pytest.raises(ValueError):
        detect_activity(buffer([]), -40.0, 10, 10)
    with pytest.raises(ValueError):
        detect_activity(buffer([0.0]), 5.0, 10, 10)  # positive dBFS threshold
    with pytest.raises(ValueError):
        detect_activity(buffer([0.0]), -40.0, 10, 20)  # hop > frame


def write_template_wav(path, rate=1000):
    write_wav(three_level_signal(), path)


def test_mine_pool_silent_file(tmp_path):
    write_wav(buffer(np.full(500, 0.001)), tmp_path / "quiet.wav")
    pool = mine_noise_pool(tmp_path, -40.0, 10, 10, min_segment=1)
    assert len(pool.clips) == 1
    assert len(pool.clips[0].samples) == 500
    assert pool.empty_sources == []


def test_mine_pool_always_voiced(tmp_path):
    write_wav(buffer(np.full(500, 0.9)), tmp_path / "loud.wav")
    pool = mine_noise_pool(tmp_path, -40.0, 10, 10, min_segment=1)
    assert pool.clips == []
    assert len(pool.empty_sources) == 1 and pool.empty_sources[0].endswith("loud.wav")


def test_mine_pool_two_template_files(tmp_path):
    write_template_wav(tmp_path / "a.wav")
    write_template_wav(tmp_path / "b.wav")
    pool = mine_noise_pool(tmp_path, -40.0, 10, 10, min_segment=1)
    assert len(pool.clips) == 4
    total = sum(len(c.samples) for c in pool.clips)
    assert total == 400
    assert pool.total_duration_s == pytest.approx(400 / 1000)


def test_mine_pool_errors(tmp_path):
    with pytest.raises(DataError):
        mine_noise_pool(tmp_path, -40.0, 10, 10)
    write_wav(buffer(np.zeros(100), rate=8000), tmp_path / "a.wav")
    write_wav(buffer(np.zeros(100), rate=16000), tmp_path / "b.wav")
    with pytest.raises(DataError, match="mixed sample rates"):
        mine_noise_pool(tmp_path, -40.0, 10, 10)


def test_pool_save_load_round_trip(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    write_template_wav(src / "a.wav")
    write_wav(buffer(np.full(300, 0.9)), src / "voiced.wav")
    pool = mine_noise_pool(src, -40.0, 10, 10, min_segment=1)
    out = tmp_path / "pool"
    save_noise_pool(pool, out)

    manifest = (out / "manifest.tsv").read_text().splitlines()
    assert manifest[0] == "clip_id\tsource_path\tstart_sample\tend_sample\trms_db"
    assert len(manifest) == 1 + 2 + 1  # header, two clips, one empty-source row
    assert manifest[-1].startswith("-\t")

    loaded = load_noise_pool(out)
    assert len(loaded.clips) == len(pool.clips)
    assert loaded.sample_rate_hz == pool.sample_rate_hz
    assert loaded.empty_sources == [str(src / "voiced.wav")]
    for orig, got in zip(pool.clips, loaded.clips):
        assert got.clip_id == orig.clip_id
        assert (got.start_sample, got.end_sample) == (orig.start_sample, orig.end_sample)
        # clips are stored as PCM16
        assert np.max(np.abs(got.samples - orig.samples)) <= 2.0**-15


def test_mine_pool_worker_invariance(tmp_path):
    for i in range(5):
        write_template_wav(tmp_path / f"f{i}.wav")
    one = mine_noise_pool(tmp_path, -40.0, 10, 10, min_segment=1, workers=1)
    many = mine_noise_pool(tmp_path, -40.0, 10, 10, min_segment=1, workers=4)
    assert [c.clip_id for c in one.clips] == [c.clip_id for c in many.clips]
