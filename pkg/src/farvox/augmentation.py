"""Mix mined noise into clean enrollment audio at a controlled SNR.

Each file gets its own RNG seeded from the corpus seed and the file stem,
so output is reproducible and independent of processing order. The three
shipped presets follow the ranges the pipeline was designed around:
aug1 = (-10, -4) dB, aug2 = (-7, -4) dB, aug3 = (-7, +3) dB.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer, read_wav, write_wav
from .errors import DataError
from .noise_extraction import NoisePool, load_noise_pool

MANIFEST_NAME = "augment.manifest.tsv"


@dataclass(frozen=True)
class SnrRangeDb:
    low_db: float
    high_db: float

    def __post_init__(self):
        if self.low_db > self.high_db:
            raise ValueError("snr range: low_db must be <= high_db")


PRESETS = {
    "aug1": SnrRangeDb(-10.0, -4.0),
    "aug2": SnrRangeDb(-7.0, -4.0),
    "aug3": SnrRangeDb(-7.0, 3.0),
}


@dataclass
class AugmentationConfig:
    snr_range: SnrRangeDb
    seed: int
    noise_pool_path: str | Path


def measure_power(buffer: AudioBuffer) -> float:
    """Mean-square power of the samples."""
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    x = buffer.samples
    return float(np.mean(x * x))


def file_seed(seed: int, stem: str) -> int:
    """Stable 64-bit per-file seed: blake2b of the stem keyed by the corpus seed."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(stem.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


@dataclass
class NoiseFit:
    samples: np.ndarray
    clip_ids: list[str]
    offset: int


def assemble_noise(clip_arrays, picks, offset, length):
    """Concatenate picked clips and read `length` samples circularly from `offset`."""
    cat = np.concatenate([clip_arrays[i] for i in picks])
    idx = (offset + np.arange(length)) % cat.shape[0]
    return cat[idx]


def fit_noise_to_length(pool: NoisePool, length: int, rng: np.random.Generator) -> NoiseFit:
    """Draw clips with replacement until they cover `length`, then slice circularly."""
    if not pool.clips:
        raise DataError("noise pool is empty")
    picks = []
    total = 0
    while total < length:
        k = int(rng.integers(len(pool.clips)))
        picks.append(k)
        total += pool.clips[k].samples.shape[0]
    offset = int(rng.integers(total))
    samples = assemble_noise([c.samples for c in pool.clips], picks, offset, length)
    return NoiseFit(samples, [pool.clips[k].clip_id for k in picks], offset)


@dataclass
class MixResult:
    buffer: AudioBuffer
    gain: float
    rescale: float


def mix_at_snr(clean: AudioBuffer, noise: AudioBuffer, target_snr_db: float) -> MixResult:
    """clean + g*noise with g chosen so the clean/noise power ratio hits the target.

    If the mix clips, the whole mixture is peak-normalized (shape preserved)
    and the applied factor is reported in `rescale` (1.0 when untouched).
    """
    if len(clean) != len(noise):
        raise DataError("mix: length mismatch")
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise DataError("mix: sample-rate mismatch")
    p_clean = measure_power(clean)
    p_noise = measure_power(noise)
    if p_clean <= 0.0 or p_noise <= 0.0:
        raise DataError("mix: zero-power input")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (target_snr_db / 10.0)))
    mixed = clean.samples + gain * noise.samples
    peak = float(np.max(np.abs(mixed)))
    rescale = 1.0
    if peak > 1.0:
        rescale = 1.0 / peak
        mixed = mixed * rescale
    return MixResult(
        AudioBuffer(mixed, clean.sample_rate_hz, clean.source_id), gain, rescale
    )


def augment_file(clean: AudioBuffer, pool: NoisePool, snr_range: SnrRangeDb, seed: int):
    """Augment one buffer; the per-file RNG draws the SNR first, then the noise fit."""
    if pool.sample_rate_hz != clean.sample_rate_hz:
        raise DataError(
            f"{clean.source_id}: sample rate {clean.sample_rate_hz} does not match "
            f"noise pool rate {pool.sample_rate_hz}"
        )
    rng = np.random.default_rng(file_seed(seed, clean.source_id))
    snr_db = float(rng.uniform(snr_range.low_db, snr_range.high_db))
    fit = fit_noise_to_length(pool, len(clean), rng)
    noise = AudioBuffer(fit.samples, pool.sample_rate_hz, "noise")
    mix = mix_at_snr(clean, noise, snr_db)
    return mix, snr_db, fit


def augment_corpus(enroll_dir, config: AugmentationConfig, out_dir, workers=1):
    """Augment every WAV in enroll_dir; writes WAVs plus augment.manifest.tsv.

    Manifest columns: file, snr_db, clip_ids (comma-joined), offset, rescale.
    Returns the manifest rows in sorted file order.
    """
    enroll_dir = Path(enroll_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(enroll_dir.glob("*.wav"))
    if not paths:
        raise DataError(f"{enroll_dir}: no WAV files found")
    pool = load_noise_pool(config.noise_pool_path)
    if not pool.clips:
        raise DataError(f"{config.noise_pool_path}: noise pool is empty")

    def work(path):
        clean = read_wav(path)
        mix, snr_db, fit = augment_file(clean, pool, config.snr_range, config.seed)
        write_wav(mix.buffer, out_dir / path.name)
        return (
            path.name,
            f"{snr_db:.2f}",
            ",".join(fit.clip_ids),
            str(fit.offset),
            f"{mix.rescale:.6f}",
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as tp:
            rows = list(tp.map(work, paths))
    else:
        rows = [work(p) for p in paths]

    lines = ["file\tsnr_db\tclip_ids\toffset\trescale"]
    lines += ["\t".join(row) for row in rows]
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    return rows
