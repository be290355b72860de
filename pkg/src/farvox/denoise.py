"""Spectral-gating noise reduction.

The noise statistics are estimated from the file itself. Stationary mode
thresholds each frequency at mean + n_std_thresh * std of its magnitude-dB
track; non-stationary mode thresholds each cell at its causal exponential
moving average plus n_std_thresh dB. Cells below threshold are scaled by
(1 - prop_decrease) and the binary-ish mask is smoothed with a small
separable box filter before resynthesis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .audio_io import AudioBuffer
from .errors import DataError
from .stft import istft, stft

_DB_FLOOR = 1e-10


@dataclass(frozen=True)
class GateConfig:
    prop_decrease: float = 1.0
    n_std_thresh: float = 1.0
    stationary: bool = True
    n_fft: int = 1024
    hop: int = 256
    smooth_frames: int = 3
    smooth_bins: int = 3
    ema_coeff: float = 0.95

    def __post_init__(self):
        if not 0.0 <= self.prop_decrease <= 1.0:
            raise ValueError("prop_decrease must lie in [0, 1]")
        if self.n_std_thresh <= 0.0:
            raise ValueError("n_std_thresh must be > 0")
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValueError("n_fft must be a power of two")
        if not 1 <= self.hop <= self.n_fft:
            raise ValueError("hop must lie in [1, n_fft]")
        for width in (self.smooth_frames, self.smooth_bins):
            if width < 0 or (width > 1 and width % 2 == 0):
                raise ValueError("smoothing widths must be 0, 1, or odd")
        if not 0.0 <= self.ema_coeff < 1.0:
            raise ValueError("ema_coeff must lie in [0, 1)")


def spectral_gate(buffer: AudioBuffer, config: GateConfig = GateConfig()) -> AudioBuffer:
    """Attenuate time-frequency cells below the estimated noise threshold."""
    if len(buffer) < config.n_fft:
        raise DataError(
            f"{buffer.source_id}: buffer shorter than n_fft ({len(buffer)} < {config.n_fft})"
        )
    spec = stft(buffer.samples, config.n_fft, config.hop)
    db = 20.0 * np.log10(np.abs(spec) + _DB_FLOOR)

    if config.stationary:
        threshold = db.mean(axis=0) + config.n_std_thresh * db.std(axis=0)
        keep = db > threshold[None, :]
    else:
        ema = kernels.ema_time(np.ascontiguousarray(db), config.ema_coeff)
        keep = db > ema + config.n_std_thresh

    mask = np.where(keep, 1.0, 1.0 - config.prop_decrease)
    if config.smooth_frames > 1 or config.smooth_bins > 1:
        mask = kernels.box_mean(
            np.ascontiguousarray(mask), config.smooth_frames, config.smooth_bins
        )

    out = istft(spec * mask, config.n_fft, config.hop, length=len(buffer))
    return AudioBuffer(out, buffer.sample_rate_hz, buffer.source_id)
