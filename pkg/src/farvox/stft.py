"""Short-time Fourier transform and its overlap-add inverse.

Conventions used throughout the toolkit: symmetric Hann window of length
n_fft, reflect padding of n_fft/2 at both edges, frame starts every `hop`
samples, frame count = ceil(len / hop), bins = n_fft/2 + 1. The inverse
divides by the accumulated squared window, so reconstruction is exact to
float precision wherever frames overlap (hop <= n_fft/2).
"""

import numpy as np

from . import kernels


def _check_params(n_fft, hop):
    if n_fft < 2 or n_fft % 2:
        raise ValueError("n_fft must be even and >= 2")
    if not 1 <= hop <= n_fft:
        raise ValueError("hop must lie in [1, n_fft]")


def num_frames(length, hop):
    return kernels.frame_count(length, hop)


def stft(x, n_fft, hop):
    """Complex spectrogram of shape (ceil(len/hop), n_fft/2 + 1)."""
    _check_params(n_fft, hop)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("stft expects a non-empty 1-D signal")
    pad = n_fft // 2
    padded = np.pad(x, pad, mode="reflect")
    nf = num_frames(x.size, hop)
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[:: hop][:nf]
    return np.fft.rfft(frames * np.hanning(n_fft), axis=1)


def istft(spec, n_fft, hop, length=None):
    """Inverse of `stft`, trimmed to `length` samples (default: frames * hop)."""
    _check_params(n_fft, hop)
    spec = np.asarray(spec, dtype=np.complex128)
    if spec.ndim != 2 or spec.shape[1] != n_fft // 2 + 1:
        raise ValueError("spectrogram shape does not match n_fft")
    nf = spec.shape[0]
    if length is None:
        length = nf * hop
    frames = np.fft.irfft(spec, n=n_fft, axis=1)
    sig, wsum = kernels.overlap_add(
        np.ascontiguousarray(frames), np.hanning(n_fft), hop
    )
    pad = n_fft // 2
    end = pad + length
    if end > sig.shape[0]:
        sig = np.pad(sig, (0, end - sig.shape[0]))
        wsum = np.pad(wsum, (0, end - wsum.shape[0]))
    return sig[pad:end] / np.maximum(wsum[pad:end], 1e-12)
