"""Log-mel-spectrogram front end for the baseline embedder.

Mel scale follows the HTK convention, mel = 2595 * log10(1 + f/700);
filters are unit-peak triangles with centers uniform on the mel scale.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer
from .errors import DataError
from .stft import stft

MEL_MAGIC = b"MELF0001"


@dataclass(frozen=True)
class MelConfig:
    n_fft: int = 512
    hop: int = 160
    n_mels: int = 64
    f_min: float = 20.0
    f_max: float | None = None  # None -> Nyquist at use time
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft % 2:
            raise ValueError("n_fft must be even and >= 2")
        if not 1 <= self.hop <= self.n_fft:
            raise ValueError("hop must lie in [1, n_fft]")
        if self.n_mels < 2:
            raise ValueError("n_mels must be >= 2")
        if self.f_min < 0:
            raise ValueError("f_min must be >= 0")
        if self.f_max is not None and self.f_max <= self.f_min:
            raise ValueError("f_max must exceed f_min")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be > 0")


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("negative frequency")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MelConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular filter matrix of shape (n_mels, n_fft/2 + 1)."""
    nyquist = sample_rate_hz / 2.0
    f_max = config.f_max if config.f_max is not None else nyquist
    if not config.f_min < f_max <= nyquist:
        raise ValueError(
            f"need f_min < f_max <= Nyquist; got [{config.f_min}, {f_max}] at {sample_rate_hz} Hz"
        )
    n_bins = config.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * (sample_rate_hz / config.n_fft)
    mel_pts = np.linspace(
        hz_to_mel(config.f_min), hz_to_mel(f_max), config.n_mels + 2
    )
    hz_pts = mel_to_hz(mel_pts)
    if np.any(np.diff(hz_pts) <= 0):
        raise ValueError("degenerate mel spacing; reduce n_mels")
    fb = np.zeros((config.n_mels, n_bins))
    for k in range(config.n_mels):
        lo, center, hi = hz_pts[k], hz_pts[k + 1], hz_pts[k + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[k] = np.clip(np.minimum(rising, falling), 0.0, None)
    if np.any(fb.max(axis=1) <= 0):
        raise ValueError("filterbank has empty rows; n_mels too large for n_fft")
    return fb


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (frames, n_mels) log10 energies
    config: MelConfig


def log_mel(buffer: AudioBuffer, config: MelConfig = MelConfig()) -> MelSpectrogram:
    """log10 of the mel-projected power spectrogram, floored at log_floor."""
    if len(buffer) < config.n_fft:
        raise DataError(
            f"{buffer.source_id}: buffer shorter than n_fft ({len(buffer)} < {config.n_fft})"
        )
    spec = stft(buffer.samples, config.n_fft, config.hop)
    power = np.abs(spec) ** 2
    fb = mel_filterbank(config, buffer.sample_rate_hz)
    mel_power = power @ fb.T
    return MelSpectrogram(np.log10(np.maximum(mel_power, config.log_floor)), config)


def write_mel_file(mel: MelSpectrogram | np.ndarray, path) -> None:
    """Binary dump: magic, u32 rows, u32 cols, row-major f32 little-endian."""
    values = mel.values if isinstance(mel, MelSpectrogram) else np.asarray(mel)
    rows, cols = values.shape
    payload = values.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(MEL_MAGIC + struct.pack("<II", rows, cols) + payload)


def read_mel_file(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MEL_MAGIC:
        raise DataError(f"{path}: not a mel feature dump")
    rows, cols = struct.unpack_from("<II", raw, 8)
    expected = 16 + 4 * rows * cols
    if len(raw) != expected:
        raise DataError(f"{path}: size mismatch ({len(raw)} vs {expected} bytes)")
    return np.frombuffer(raw, dtype="<f4", offset=16).reshape(rows, cols).copy()
