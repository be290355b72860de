"""Deterministic synthetic mini-corpus for end-to-end tests and demos.

Two synthetic "speakers" with distinct partial stacks, a clean close-mic
enrollment set, a far-field-style test set buried in colored ambient
noise, and noise-source files (ambient floor plus loud voice bursts) for
the mining stage. Everything derives from a single corpus seed, so the
corpus is byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer, write_wav
from .augmentation import file_seed
from .metrics import NONTARGET, TARGET

SAMPLE_RATE = 16000

SPEAKER_PARTIALS = {
    "spk_1": (350.0, 700.0, 1400.0),
    "spk_2": (520.0, 1040.0, 2400.0),
}
PARTIAL_AMPS = (1.0, 0.55, 0.35)

# ambient floor in the noise-source files sits well under the -40 dBFS
# mining threshold; the inserted voice bursts sit well above it
AMBIENT_RMS = 10.0 ** (-45.0 / 20.0)
BURST_PARTIALS = (700.0, 1400.0, 2800.0)
BURST_WINDOWS_S = ((0.5, 0.9), (1.3, 1.7))


@dataclass
class CorpusPaths:
    root: Path
    enroll_dir: Path
    test_dir: Path
    noise_dir: Path
    trials_path: Path


def _tone_burst(rng: np.random.Generator, partials, n: int, sample_rate: int) -> np.ndarray:
    """Speech-like utterance: partial stack gated by ~3 Hz on/off bursts."""
    t = np.arange(n) / sample_rate
    sig = np.zeros(n)
    for freq, amp in zip(partials, PARTIAL_AMPS):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        sig += amp * np.sin(2.0 * np.pi * freq * t + phase)
    gate_phase = rng.uniform(0.0, 2.0 * np.pi)
    envelope = (np.sin(2.0 * np.pi * 3.0 * t + gate_phase) > -0.2).astype(np.float64)
    level = 0.3 * (1.0 + rng.uniform(-0.2, 0.2))
    sig *= envelope * level / np.max(np.abs(sig))
    return sig


def _ambient(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    """Colored ambient noise: low-passed white noise plus a broadband floor."""
    white = rng.normal(size=n)
    spec = np.fft.rfft(white)
    freq = np.fft.rfftfreq(n, 1.0 / sample_rate)
    shape = 1.0 / np.sqrt(1.0 + (freq / 800.0) ** 2) + 0.15
    colored = np.fft.irfft(spec * shape, n=n)
    return colored / np.sqrt(np.mean(colored**2))


def _scale_to_snr(signal: np.ndarray, noise_unit: np.ndarray, snr_db: float) -> np.ndarray:
    p_sig = np.mean(signal**2)
    return noise_unit * np.sqrt(p_sig / 10.0 ** (snr_db / 10.0))


def make_mini_corpus(
    root,
    seed: int = 0,
    sample_rate: int = SAMPLE_RATE,
    n_enroll: int = 3,
    n_test: int = 4,
    n_noise_files: int = 2,
    utt_seconds: float = 1.0,
    noise_seconds: float = 2.0,
    test_snr_db: float = -5.0,
) -> CorpusPaths:
    root = Path(root)
    enroll_dir = root / "enroll"
    test_dir = root / "test"
    noise_dir = root / "noise_src"
    for d in (enroll_dir, test_dir, noise_dir):
        d.mkdir(parents=True, exist_ok=True)

    n_utt = int(round(utt_seconds * sample_rate))
    n_noise = int(round(noise_seconds * sample_rate))

    for speaker, partials in SPEAKER_PARTIALS.items():
        for i in range(n_enroll):
            stem = f"{speaker}-enr_{i:02d}"
            rng = np.random.default_rng(file_seed(seed, stem))
            sig = _tone_burst(rng, partials, n_utt, sample_rate)
            sig += 3e-4 * rng.normal(size=n_utt)
            write_wav(AudioBuffer(sig, sample_rate, stem), enroll_dir / f"{stem}.wav")
        for i in range(n_test):
            stem = f"{speaker}-test_{i:02d}"
            rng = np.random.default_rng(file_seed(seed, stem))
            sig = _tone_burst(rng, partials, n_utt, sample_rate)
            sig += _scale_to_snr(sig, _ambient(rng, n_utt, sample_rate), test_snr_db)
            peak = np.max(np.abs(sig))
            if peak > 1.0:
                sig /= peak
            write_wav(AudioBuffer(sig, sample_rate, stem), test_dir / f"{stem}.wav")

    t_noise = np.arange(n_noise) / sample_rate
    for i in range(n_noise_files):
        stem = f"farfield_{i:02d}"
        rng = np.random.default_rng(file_seed(seed, stem))
        sig = AMBIENT_RMS * _ambient(rng, n_noise, sample_rate)
        for start_s, end_s in BURST_WINDOWS_S:
            window = (t_noise >= start_s) & (t_noise < end_s)
            burst = np.zeros(n_noise)
            for freq, amp in zip(BURST_PARTIALS, PARTIAL_AMPS):
                phase = rng.uniform(0.0, 2.0 * np.pi)
                burst += amp * np.sin(2.0 * np.pi * freq * t_noise + phase)
            sig += 0.25 * burst * window / np.max(np.abs(burst))
        write_wav(AudioBuffer(sig, sample_rate, stem), noise_dir / f"{stem}.wav")

    lines = []
    for speaker in SPEAKER_PARTIALS:
        for other in SPEAKER_PARTIALS:
            for i in range(n_test):
                label = TARGET if speaker == other else NONTARGET
                lines.append(f"{speaker}\t{other}-test_{i:02d}\t{label}")
    trials_path = root / "trials.tsv"
    trials_path.write_text("\n".join(lines) + "\n")

    return CorpusPaths(root, enroll_dir, test_dir, noise_dir, trials_path)
