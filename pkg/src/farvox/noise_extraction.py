"""Mine noise from far-field recordings by threshold-based activity masking.

Voice activity is decided per short frame: a frame is active when its RMS
level in dBFS reaches the threshold. Active frames are merged into maximal
sample intervals; the complement segments are the mined noise. Extraction
is segment-based rather than per-sample non-zero filtering so genuinely
zero-valued noise samples are never dropped.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .audio_io import AudioBuffer, read_wav, write_wav
from .errors import DataError

LOG_EPS = 1e-10
DEFAULT_THRESHOLD_DB = -40.0
DEFAULT_FRAME_MS = 25.0
DEFAULT_HOP_MS = 10.0

MANIFEST_NAME = "manifest.tsv"
# manifest rows with this clip_id mark source files that yielded no noise
EMPTY_MARK = "-"


def frame_levels_db(buffer: AudioBuffer, frame_len: int, hop: int) -> np.ndarray:
    """Per-frame RMS level in dBFS, 20*log10(rms + 1e-10)."""
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    if frame_len < 1 or hop < 1 or hop > frame_len:
        raise ValueError("need frame_len >= 1 and 1 <= hop <= frame_len")
    rms = kernels.frame_rms(np.ascontiguousarray(buffer.samples), frame_len, hop)
    return 20.0 * np.log10(rms + LOG_EPS)


def detect_activity(buffer, threshold_db, frame_len, hop):
    """Maximal (start, end) sample intervals whose frames reach threshold_db.

    Frames start every `hop` samples and span `frame_len` samples (clipped
    at the signal end); overlapping active frame spans are merged.
    """
    if threshold_db > 0:
        raise ValueError("threshold_db is dBFS and must be <= 0")
    levels = frame_levels_db(buffer, frame_len, hop)
    n = len(buffer)
    intervals: list[tuple[int, int]] = []
    for i in np.flatnonzero(levels >= threshold_db):
        start = int(i) * hop
        end = min(start + frame_len, n)
        if intervals and start <= intervals[-1][1]:
            intervals[-1] = (intervals[-1][0], max(intervals[-1][1], end))
        else:
            intervals.append((start, end))
    return intervals


def build_mask(intervals, length):
    """0/1 mask of `length` samples, zero exactly on interval samples."""
    mask = np.ones(length, dtype=np.uint8)
    for start, end in intervals:
        if not 0 <= start <= end <= length:
            raise ValueError(f"interval ({start}, {end}) out of bounds for {length}")
        mask[start:end] = 0
    return mask


def apply_mask(buffer, mask):
    """Element-wise product; voiced regions are nulled."""
    if len(buffer) != len(mask):
        raise ValueError("mask length does not match buffer")
    return AudioBuffer(
        buffer.samples * np.asarray(mask, dtype=np.float64),
        buffer.sample_rate_hz,
        buffer.source_id,
    )


def complement_intervals(intervals, length, min_segment=1):
    """Gaps between intervals, keeping only gaps of at least min_segment samples."""
    segments = []
    pos = 0
    for start, end in intervals:
        if not 0 <= start <= end <= length:
            raise ValueError(f"interval ({start}, {end}) out of bounds for {length}")
        if start - pos >= min_segment and start > pos:
            segments.append((pos, start))
        pos = max(pos, end)
    if length - pos >= min_segment and length > pos:
        segments.append((pos, length))
    return segments


def extract_noise(buffer, intervals, min_segment=1):
    """Complement segments of the activity intervals as separate buffers."""
    return [
        AudioBuffer(buffer.samples[a:b].copy(), buffer.sample_rate_hz, buffer.source_id)
        for a, b in complement_intervals(intervals, len(buffer), min_segment)
    ]


@dataclass
class NoiseClip:
    clip_id: str
    samples: np.ndarray
    sample_rate_hz: int
    source_path: str
    start_sample: int
    end_sample: int

    @property
    def duration_s(self) -> float:
        return self.samples.shape[0] / self.sample_rate_hz

    @property
    def rms_db(self) -> float:
        rms = float(np.sqrt(np.mean(self.samples**2)))
        return 20.0 * np.log10(rms + LOG_EPS)


@dataclass
class NoisePool:
    clips: list[NoiseClip]
    sample_rate_hz: int
    empty_sources: list[str] = field(default_factory=list)

    @property
    def total_duration_s(self) -> float:
        return sum(c.duration_s for c in self.clips)


def _mine_file(path, threshold_db, frame_len, hop, min_segment, channel_select):
    buf = read_wav(path, channel_select)
    intervals = detect_activity(buf, threshold_db, frame_len, hop)
    segments = complement_intervals(intervals, len(buf), min_segment)
    clips = [
        NoiseClip(
            clip_id=f"{Path(path).stem}__{a}_{b}",
            samples=buf.samples[a:b].copy(),
            sample_rate_hz=buf.sample_rate_hz,
            source_path=str(path),
            start_sample=a,
            end_sample=b,
        )
        for a, b in segments
    ]
    return buf.sample_rate_hz, clips


def mine_noise_pool(
    dir_path,
    threshold_db=DEFAULT_THRESHOLD_DB,
    frame_len=400,
    hop=160,
    min_segment=None,
    channel_select=None,
    workers=1,
) -> NoisePool:
    """Run detect -> complement over every WAV in a directory.

    Files are processed in sorted path order so the pool is identical for
    any worker count. min_segment defaults to one frame length; fragments
    shorter than that carry no usable noise statistics.
    """
    dir_path = Path(dir_path)
    paths = sorted(dir_path.glob("*.wav"))
    if not paths:
        raise DataError(f"{dir_path}: no WAV files found")
    if min_segment is None:
        min_segment = frame_len

    def work(p):
        return _mine_file(p, threshold_db, frame_len, hop, min_segment, channel_select)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, paths))
    else:
        results = [work(p) for p in paths]

    rates = {r for r, _ in results}
    if len(rates) > 1:
        raise DataError(f"{dir_path}: mixed sample rates across files: {sorted(rates)}")

    all_clips = []
    empty = []
    for path, (_, clips) in zip(paths, results):
        if clips:
            all_clips.extend(clips)
        else:
            empty.append(str(path))
    return NoisePool(all_clips, rates.pop(), empty)


def save_noise_pool(pool: NoisePool, out_dir) -> None:
    """Write clips as PCM16 WAVs plus manifest.tsv.

    Manifest columns: clip_id, source_path, start_sample, end_sample,
    rms_db. Sources that yielded no clips get a row with clip_id "-".
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["clip_id\tsource_path\tstart_sample\tend_sample\trms_db"]
    for clip in pool.clips:
        write_wav(
            AudioBuffer(clip.samples, clip.sample_rate_hz, clip.clip_id),
            out_dir / f"{clip.clip_id}.wav",
        )
        lines.append(
            f"{clip.clip_id}\t{clip.source_path}\t{clip.start_sample}"
            f"\t{clip.end_sample}\t{clip.rms_db:.6f}"
        )
    for src in pool.empty_sources:
        lines.append(f"{EMPTY_MARK}\t{src}\t0\t0\t{EMPTY_MARK}")
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


def load_noise_pool(dir_path) -> NoisePool:
    """Load a pool written by save_noise_pool."""
    dir_path = Path(dir_path)
    manifest = dir_path / MANIFEST_NAME
    if not manifest.is_file():
        raise DataError(f"{dir_path}: missing {MANIFEST_NAME}")
    clips = []
    empty = []
    rates = set()
    for line in manifest.read_text().splitlines()[1:]:
        if not line.strip():
            continue
        clip_id, source_path, start, end, _rms = line.split("\t")
        if clip_id == EMPTY_MARK:
            empty.append(source_path)
            continue
        buf = read_wav(dir_path / f"{clip_id}.wav")
        rates.add(buf.sample_rate_hz)
        clips.append(
            NoiseClip(clip_id, buf.samples, buf.sample_rate_hz, source_path, int(start), int(end))
        )
    if not clips and not empty:
        raise DataError(f"{manifest}: no entries")
    if len(rates) > 1:
        raise DataError(f"{dir_path}: mixed sample rates in pool")
    rate = rates.pop() if rates else 0
    return NoisePool(clips, rate, empty)
