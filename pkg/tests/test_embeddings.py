import struct

import numpy as np
import pytest

from farvox.audio_io import AudioBuffer
from farvox.embeddings import (
    Embedding,
    EmbeddingSet,
    average_speaker,
    baseline_embed,
    read_embeddings,
    read_exclusion_list,
    write_embeddings,
)
from farvox.errors import InterchangeError
from farvox.features import MelConfig

SR = 16000
MEL = MelConfig()


def random_set(rng, count, dim=16):
    return EmbeddingSet.from_embeddings(
        Embedding(f"utt_{i:03d}", rng.normal(size=dim).astype(np.float32))
        for i in range(count)
    )


def test_baseline_constant_signal_zero_std():
    emb = baseline_embed(AudioBuffer(np.full(SR, 0.25), SR, "c"), MEL)
    assert emb.dim == 2 * MEL.n_mels
    # batched FFT rounding leaves a ~1e-14 residue across rows
    assert np.max(np.abs(emb.values[MEL.n_mels :])) < 1e-10
    # on an exactly constant log-mel matrix the std half is exactly zero
    constant = np.full((30, 4), -2.5)
    np.testing.assert_array_equal(constant.std(axis=0), 0.0)


def test_baseline_dim_contract():
    rng = np.random.default_rng(0)
    for n_mels in (8, 32):
        config = MelConfig(n_mels=n_mels)
        emb = baseline_embed(AudioBuffer(0.1 * rng.normal(size=SR), SR, "x"), config)
        assert emb.dim == 2 * n_mels


def test_baseline_frame_permutation_invariance():
    from farvox.features import log_mel

    rng = np.random.default_rng(1)
    buf = AudioBuffer(0.2 * rng.normal(size=SR), SR, "p")
    mel = log_mel(buf, MEL).values
    perm = rng.permutation(mel.shape[0])
    direct = np.concatenate([mel.mean(axis=0), mel.std(axis=0)])
    shuffled = np.concatenate([mel[perm].mean(axis=0), mel[perm].std(axis=0)])
    np.testing.assert_allclose(direct, shuffled, rtol=0, atol=1e-12)


def test_baseline_time_reversal_invariance():
    # zero margins wider than n_fft/2 and a length divisible by hop make
    # the reversed signal's frame set coincide with the original's
    rng = np.random.default_rng(2)
    n = MEL.hop * 100
    x = 0.2 * rng.normal(size=n)
    margin = MEL.n_fft // 2 + 1
    x[:margin] = 0.0
    x[-margin:] = 0.0
    fwd = baseline_embed(AudioBuffer(x, SR, "fwd"), MEL)
    rev = baseline_embed(AudioBuffer(x[::-1].copy(), SR, "rev"), MEL)
    np.testing.assert_allclose(fwd.values, rev.values, rtol=1e-5, atol=1e-6)


def test_average_speaker():
    e1 = Embedding("u1", np.array([1.0, 0.0], dtype=np.float32))
    e2 = Embedding("u2", np.array([0.0, 1.0], dtype=np.float32))
    emb_set = EmbeddingSet.from_embeddings([e1, e2])
    single = average_speaker(emb_set, ["u1"], "spk")
    np.testing.assert_array_equal(single.centroid.values, e1.values)
    both = average_speaker(emb_set, ["u1", "u2"], "spk")
    np.testing.assert_array_equal(both.centroid.values, np.array([0.5, 0.5], np.float32))
    swapped = average_speaker(emb_set, ["u2", "u1"], "spk")
    np.testing.assert_array_equal(both.centroid.values, swapped.centroid.values)


def test_average_speaker_errors():
    emb_set = random_set(np.random.default_rng(3), 3)
    with pytest.raises(ValueError):
        average_speaker(emb_set, [], "spk")
    with pytest.raises(InterchangeError, match="missing"):
        average_speaker(emb_set, ["nope"], "spk")


def test_interchange_empty_round_trip(tmp_path):
    path = tmp_path / "empty.spkemb"
    write_embeddings(EmbeddingSet(dim=0), path)
    got = read_embeddings(path)
    assert len(got) == 0 and got.dim == 0


def test_interchange_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    emb_set = random_set(rng, 3, dim=7)
    path = tmp_path / "s.spkemb"
    write_embeddings(emb_set, path)
    got = read_embeddings(path)
    assert got.ids() == emb_set.ids()
    for utt in emb_set.ids():
        assert got[utt].values.tobytes() == emb_set[utt].values.tobytes()
    # writing what was read reproduces the file byte for byte
    path2 = tmp_path / "s2.spkemb"
    write_embeddings(got, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_interchange_unicode_ids(tmp_path):
    emb = Embedding("спикер_1-файл", np.array([1.0, 2.0], np.float32))
    path = tmp_path / "u.spkemb"
    write_embeddings(EmbeddingSet.from_embeddings([emb]), path)
    assert read_embeddings(path).ids() == ["спикер_1-файл"]


def test_interchange_corruption(tmp_path):
    rng = np.random.default_rng(5)
    emb_set = random_set(rng, 2, dim=4)
    path = tmp_path / "ok.spkemb"
    write_embeddings(emb_set, path)
    raw = path.read_bytes()

    bad_magic = tmp_path / "magic.spkemb"
    bad_magic.write_bytes(b"XXKEMB01" + raw[8:])
    with pytest.raises(InterchangeError, match="magic"):
        read_embeddings(bad_magic)

    overcount = tmp_path / "count.spkemb"
    overcount.write_bytes(raw[:8] + struct.pack("<II", 4, 3) + raw[16:])
    with pytest.raises(InterchangeError, match="truncated"):
        read_embeddings(overcount)

    undercount = tmp_path / "count2.spkemb"
    undercount.write_bytes(raw[:8] + struct.pack("<II", 4, 1) + raw[16:])
    with pytest.raises(InterchangeError, match="trailing"):
        read_embeddings(undercount)

    truncated = tmp_path / "trunc.spkemb"
    truncated.write_bytes(raw[:-5])
    with pytest.raises(InterchangeError, match="truncated"):
        read_embeddings(truncated)

    dup = tmp_path / "dup.spkemb"
    record = raw[16:]
    half = len(record) // 2
    dup.write_bytes(raw[:8] + struct.pack("<II", 4, 2) + record[:half] + record[:half])
    with pytest.raises(InterchangeError, match="duplicate"):
        read_embeddings(dup)


def test_set_validation():
    e = Embedding("a", np.array([1.0], np.float32))
    emb_set = EmbeddingSet.from_embeddings([e])
    with pytest.raises(InterchangeError, match="duplicate"):
        emb_set.add(Embedding("a", np.array([2.0], np.float32)))
    with pytest.raises(InterchangeError, match="dim"):
        emb_set.add(Embedding("b", np.array([1.0, 2.0], np.float32)))
    with pytest.raises(ValueError):
        Embedding("nan", np.array([np.nan], np.float32))
    with pytest.raises(ValueError):
        Embedding("empty", np.array([], np.float32))


def test_exclusion_list(tmp_path):
    path = tmp_path / "exclude.txt"
    path.write_text(
        "# silent enrollment files\nspk_6-utt_11\n\nspk_21-utt_00  # whole speaker\n"
    )
    assert read_exclusion_list(path) == {"spk_6-utt_11", "spk_21-utt_00"}
