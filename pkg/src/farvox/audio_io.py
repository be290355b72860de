"""WAV reading/writing and the mono float buffer the rest of the toolkit uses.

Accepts uncompressed PCM 16-bit and IEEE float 32-bit RIFF/WAVE input;
always writes 16-bit PCM mono. Unknown chunks are skipped. There is no
resampling anywhere: mixing signals with different rates is an error.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import WavFormatError

PCM16_SCALE = 32768.0
PCM16_MAX = 1.0 - 1.0 / PCM16_SCALE

_TAG_PCM = 1
_TAG_FLOAT = 3


@dataclass
class AudioBuffer:
    """Mono samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate_hz: int
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer requires a 1-D sample array")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.samples.shape[0] / self.sample_rate_hz


def read_wav(path, channel_select: int | None = None) -> AudioBuffer:
    """Read a PCM16 or float32 WAV file into a mono AudioBuffer.

    Multi-channel files require an explicit 0-based `channel_select`;
    16-bit samples are mapped to [-1, 1) by division by 32768.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavFormatError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        # chunks are word-aligned; odd sizes carry a pad byte
        pos += 8 + size + (size & 1)

    if fmt is None:
        raise WavFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise WavFormatError(f"{path}: missing data chunk")

    tag, n_channels, rate, _byte_rate, _block_align, bits = fmt
    if n_channels < 1:
        raise WavFormatError(f"{path}: invalid channel count {n_channels}")
    if rate <= 0:
        raise WavFormatError(f"{path}: invalid sample rate {rate}")

    if tag == _TAG_PCM and bits == 16:
        sample_bytes = 2
        dtype = "<i2"
    elif tag == _TAG_FLOAT and bits == 32:
        sample_bytes = 4
        dtype = "<f4"
    else:
        raise WavFormatError(
            f"{path}: unsupported codec (format tag {tag}, {bits}-bit); "
            "only PCM16 and IEEE float32 are accepted"
        )

    frame_bytes = sample_bytes * n_channels
    if len(data) % frame_bytes:
        raise WavFormatError(f"{path}: data chunk is not a whole number of frames")
    frames = np.frombuffer(data, dtype=dtype).reshape(-1, n_channels)

    if channel_select is None:
        if n_channels != 1:
            raise WavFormatError(
                f"{path}: {n_channels} channels; pass channel_select to pick one"
            )
        mono = frames[:, 0]
    else:
        if not 0 <= channel_select < n_channels:
            raise WavFormatError(
                f"{path}: channel_select {channel_select} out of range "
                f"for {n_channels} channel(s)"
            )
        mono = frames[:, channel_select]

    if tag == _TAG_PCM:
        samples = mono.astype(np.float64) / PCM16_SCALE
    else:
        samples = mono.astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise WavFormatError(f"{path}: float data contains NaN or Inf")

    return AudioBuffer(samples.copy(), int(rate), path.stem)


def write_wav(buffer: AudioBuffer, path) -> None:
    """Write a buffer as mono 16-bit PCM, clamping to [-1, 1 - 2^-15]."""
    x = buffer.samples
    if not np.all(np.isfinite(x)):
        raise ValueError("refusing to write non-finite samples")
    pcm = np.rint(np.clip(x, -1.0, PCM16_MAX) * PCM16_SCALE).astype("<i2")
    data = pcm.tobytes()
    sr = int(buffer.sample_rate_hz)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(data),
        b"WAVE",
        b"fmt ",
        16,
        _TAG_PCM,
        1,
        sr,
        sr * 2,
        2,
        16,
        b"data",
        len(data),
    )
    Path(path).write_bytes(header + data)
