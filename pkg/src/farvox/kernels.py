"""Hot inner loops, JIT-compiled with numba when available.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
fallback. The numba path is used when the package imports and the
environment variable ``FARVOX_DISABLE_NUMBA`` is unset; set it to ``1``
to force the numpy path. ``benchmarks/bench_kernels.py`` compares both.
"""

import os

import numpy as np

_DISABLED = os.environ.get("FARVOX_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def backend():
    """Name of the kernel path selected at import time."""
    return "numba" if USE_NUMBA else "numpy"


def frame_count(n, hop):
    """Number of frames starting every `hop` samples inside an n-sample signal."""
    return -(-n // hop)


# ---------------------------------------------------------------------------
# numpy implementations (always available; also the benchmark reference)
# ---------------------------------------------------------------------------


def _frame_rms_numpy(x, frame_len, hop):
    n = x.shape[0]
    nf = frame_count(n, hop)
    csum = np.empty(n + 1)
    csum[0] = 0.0
    np.cumsum(x * x, out=csum[1:])
    starts = hop * np.arange(nf)
    ends = np.minimum(starts + frame_len, n)
    return np.sqrt((csum[ends] - csum[starts]) / (ends - starts))


def _overlap_add_numpy(frames, window, hop):
    nf, n_fft = frames.shape
    total = (nf - 1) * hop + n_fft
    sig = np.zeros(total)
    wsum = np.zeros(total)
    wsq = window * window
    for i in range(nf):
        sig[i * hop : i * hop + n_fft] += frames[i] * window
        wsum[i * hop : i * hop + n_fft] += wsq
    return sig, wsum


def _ema_time_numpy(x, coeff):
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, x.shape[0]):
        out[t] = coeff * out[t - 1] + (1.0 - coeff) * x[t]
    return out


def _sliding_mean_axis0(a, width):
    r = (width - 1) // 2
    n = a.shape[0]
    csum = np.zeros((n + 1,) + a.shape[1:])
    np.cumsum(a, axis=0, out=csum[1:])
    lo = np.maximum(np.arange(n) - r, 0)
    hi = np.minimum(np.arange(n) + r + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def _box_mean_numpy(m, width_t, width_f):
    out = m
    if width_t > 1:
        out = _sliding_mean_axis0(out, width_t)
    if width_f > 1:
        out = _sliding_mean_axis0(np.ascontiguousarray(out.T), width_f).T
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _frame_rms_numba(x, frame_len, hop):
        n = x.shape[0]
        nf = -(-n // hop)
        out = np.empty(nf)
        for i in range(nf):
            start = i * hop
            end = min(start + frame_len, n)
            acc = 0.0
            for k in range(start, end):
                acc += x[k] * x[k]
            out[i] = np.sqrt(acc / (end - start))
        return out

    @njit(cache=True)
    def _overlap_add_numba(frames, window, hop):
        nf, n_fft = frames.shape
        total = (nf - 1) * hop + n_fft
        sig = np.zeros(total)
        wsum = np.zeros(total)
        for i in range(nf):
            base = i * hop
            for k in range(n_fft):
                w = window[k]
                sig[base + k] += frames[i, k] * w
                wsum[base + k] += w * w
        return sig, wsum

    @njit(cache=True)
    def _ema_time_numba(x, coeff):
        nt, nb = x.shape
        out = np.empty((nt, nb))
        for b in range(nb):
            out[0, b] = x[0, b]
        for t in range(1, nt):
            for b in range(nb):
                out[t, b] = coeff * out[t - 1, b] + (1.0 - coeff) * x[t, b]
        return out

    @njit(cache=True)
    def _box_mean_numba(m, width_t, width_f):
        nt, nb = m.shape
        rt = (width_t - 1) // 2
        rf = (width_f - 1) // 2
        tmp = np.empty((nt, nb))
        if width_t > 1:
            for t in range(nt):
                lo = max(t - rt, 0)
                hi = min(t + rt + 1, nt)
                for b in range(nb):
                    acc = 0.0
                    for k in range(lo, hi):
                        acc += m[k, b]
                    tmp[t, b] = acc / (hi - lo)
        else:
            tmp[:, :] = m
        out = np.empty((nt, nb))
        if width_f > 1:
            for t in range(nt):
                for b in range(nb):
                    lo = max(b - rf, 0)
                    hi = min(b + rf + 1, nb)
                    acc = 0.0
                    for k in range(lo, hi):
                        acc += tmp[t, k]
                    out[t, b] = acc / (hi - lo)
        else:
            out[:, :] = tmp
        return out


# ---------------------------------------------------------------------------
# public bindings
# ---------------------------------------------------------------------------

if USE_NUMBA:
    frame_rms = _frame_rms_numba
    overlap_add = _overlap_add_numba
    ema_time = _ema_time_numba
    box_mean = _box_mean_numba
else:
    frame_rms = _frame_rms_numpy
    overlap_add = _overlap_add_numpy
    ema_time = _ema_time_numpy
    box_mean = _box_mean_numpy
