"""Command-line pipeline: mine-noise, augment, denoise, embed, evaluate, pipeline.

A run is described by a RunConfig assembled from defaults, an optional
key=value config file, and explicit flags (highest precedence). Every
stage writes a frozen copy of the resolved config beside its outputs;
evaluate additionally writes a run manifest with the config hash, tool
version, and input digests. Exit codes: 0 success, 1 usage/config error,
2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import __version__
from .audio_io import read_wav, write_wav
from .augmentation import PRESETS, AugmentationConfig, SnrRangeDb, augment_corpus
from .denoise import GateConfig, spectral_gate
from .embeddings import (
    EmbeddingSet,
    average_speaker,
    baseline_embed,
    read_embeddings,
    read_exclusion_list,
    write_embeddings,
)
from .errors import DataError
from .features import MelConfig
from .metrics import (
    evaluate,
    format_report_kv,
    format_report_text,
    read_trials,
    score_trials,
    write_det_tsv,
    write_scores_tsv,
)
from .noise_extraction import mine_noise_pool, save_noise_pool

CONFIG_FROZEN_NAME = "config.frozen"


@dataclass
class RunConfig:
    # corpus locations
    enroll_dir: str | None = None
    test_dir: str | None = None
    noise_dir: str | None = None
    work_dir: str | None = None
    trials_path: str | None = None
    # noise mining
    threshold_db: float = -40.0
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    min_segment_ms: float | None = None  # None -> one frame
    channel: int | None = None
    # augmentation
    preset: str = "aug1"
    snr_low: float | None = None
    snr_high: float | None = None
    seed: int = 0
    # denoise
    prop_decrease: float = 1.0
    n_std: float = 1.0
    stationary: bool = True
    gate_n_fft: int = 1024
    gate_hop: int = 256
    # embedding front end
    embedder: str = "baseline"  # baseline | external
    external_enroll: str | None = None
    external_test: str | None = None
    mel_n_fft: int = 512
    mel_hop: int = 160
    n_mels: int = 64
    f_min: float = 20.0
    f_max: float | None = None
    # evaluation
    p_target: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0
    exclusion_list: str | None = None
    speaker_delimiter: str = "-"
    strict: bool = True
    l2_norm: bool = False

    def snr_range(self) -> SnrRangeDb:
        if self.snr_low is not None or self.snr_high is not None:
            if self.snr_low is None or self.snr_high is None:
                raise ValueError("snr_low and snr_high must be given together")
            return SnrRangeDb(self.snr_low, self.snr_high)
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        return PRESETS[self.preset]

    def mel_config(self) -> MelConfig:
        return MelConfig(
            n_fft=self.mel_n_fft,
            hop=self.mel_hop,
            n_mels=self.n_mels,
            f_min=self.f_min,
            f_max=self.f_max,
        )

    def gate_config(self) -> GateConfig:
        return GateConfig(
            prop_decrease=self.prop_decrease,
            n_std_thresh=self.n_std,
            stationary=self.stationary,
            n_fft=self.gate_n_fft,
            hop=self.gate_hop,
        )


_BOOL_KEYS = {"stationary", "strict", "l2_norm"}
_INT_KEYS = {"channel", "seed", "gate_n_fft", "gate_hop", "mel_n_fft", "mel_hop", "n_mels"}
_FLOAT_KEYS = {
    "threshold_db",
    "frame_ms",
    "hop_ms",
    "min_segment_ms",
    "snr_low",
    "snr_high",
    "prop_decrease",
    "n_std",
    "f_min",
    "f_max",
    "p_target",
    "c_miss",
    "c_fa",
}


def parse_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; unknown keys are rejected."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        if "=" not in entry:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, value = entry.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes")
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return values


def render_config(cfg: RunConfig) -> str:
    """Frozen key=value view of the experiment parameters.

    work_dir is excluded: where outputs land is not part of the
    experiment's identity.
    """
    lines = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        if f.name == "work_dir":
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def config_sha256(cfg: RunConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode()).hexdigest()


def _freeze(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_FROZEN_NAME).write_text(render_config(cfg))


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _frame_samples(cfg: RunConfig, sample_rate: int):
    frame = max(1, round(cfg.frame_ms * sample_rate / 1000.0))
    hop = max(1, round(cfg.hop_ms * sample_rate / 1000.0))
    hop = min(hop, frame)
    if cfg.min_segment_ms is None:
        min_seg = frame
    else:
        min_seg = max(1, round(cfg.min_segment_ms * sample_rate / 1000.0))
    return frame, hop, min_seg


# ---------------------------------------------------------------------------
# stage implementations (also the library-level entry points for tests)
# ---------------------------------------------------------------------------


def cmd_mine_noise(cfg: RunConfig, in_dir, out_dir, workers=1) -> None:
    in_dir = Path(in_dir)
    paths = sorted(in_dir.glob("*.wav"))
    if not paths:
        raise DataError(f"{in_dir}: no WAV files found")
    rate = read_wav(paths[0], cfg.channel).sample_rate_hz
    frame, hop, min_seg = _frame_samples(cfg, rate)
    pool = mine_noise_pool(
        in_dir,
        threshold_db=cfg.threshold_db,
        frame_len=frame,
        hop=hop,
        min_segment=min_seg,
        channel_select=cfg.channel,
        workers=workers,
    )
    save_noise_pool(pool, out_dir)
    _freeze(cfg, Path(out_dir))


def cmd_augment(cfg: RunConfig, in_dir, pool_dir, out_dir, workers=1) -> None:
    aug = AugmentationConfig(cfg.snr_range(), cfg.seed, pool_dir)
    augment_corpus(in_dir, aug, out_dir, workers=workers)
    _freeze(cfg, Path(out_dir))


def cmd_denoise(cfg: RunConfig, in_dir, out_dir, workers=1) -> None:
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.wav"))
    if not paths:
        raise DataError(f"{in_dir}: no WAV files found")
    gate = cfg.gate_config()

    def work(path):
        write_wav(spectral_gate(read_wav(path, cfg.channel), gate), out_dir / path.name)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as tp:
            list(tp.map(work, paths))
    else:
        for p in paths:
            work(p)
    _freeze(cfg, out_dir)


def cmd_embed(cfg: RunConfig, in_dir, out_path, workers=1, external=None) -> None:
    in_dir = Path(in_dir)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    paths = sorted(in_dir.glob("*.wav"))
    if not paths:
        raise DataError(f"{in_dir}: no WAV files found")
    stems = [p.stem for p in paths]

    if external is not None:
        source = read_embeddings(external)
        missing = [s for s in stems if s not in source]
        if missing:
            raise DataError(
                f"{external}: missing embeddings for {len(missing)} utterance(s): "
                + ", ".join(missing)
            )
        emb_set = EmbeddingSet.from_embeddings(source[s] for s in stems)
    else:
        mel = cfg.mel_config()

        def work(path):
            return baseline_embed(read_wav(path, cfg.channel), mel)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as tp:
                embs = list(tp.map(work, paths))
        else:
            embs = [work(p) for p in paths]
        emb_set = EmbeddingSet.from_embeddings(embs)

    write_embeddings(emb_set, out_path)
    coverage = (
        f"utterances={len(stems)}\nrecords={len(emb_set)}\nmissing=0\ndim={emb_set.dim}\n"
    )
    Path(str(out_path) + ".coverage.txt").write_text(coverage)
    _freeze(cfg, out_path.parent)


def _drop_excluded(emb_set: EmbeddingSet, excluded: set[str]):
    kept = EmbeddingSet.from_embeddings(
        emb for emb in emb_set if emb.utterance_id not in excluded
    )
    dropped = sorted(u for u in emb_set.ids() if u in excluded)
    return kept, dropped


def cmd_evaluate(cfg: RunConfig, enroll_emb, test_emb, trials_path, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    enroll_set = read_embeddings(enroll_emb)
    test_set = read_embeddings(test_emb)
    excluded = read_exclusion_list(cfg.exclusion_list) if cfg.exclusion_list else set()
    enroll_set, dropped_enroll = _drop_excluded(enroll_set, excluded)
    test_set, dropped_test = _drop_excluded(test_set, excluded)

    by_speaker: dict[str, list[str]] = {}
    for utt in enroll_set.ids():
        speaker = utt.split(cfg.speaker_delimiter, 1)[0]
        by_speaker.setdefault(speaker, []).append(utt)
    if not by_speaker:
        raise DataError("no enrollment utterances left after exclusions")
    models = {
        spk: average_speaker(enroll_set, utts, spk, l2_normalize=cfg.l2_norm)
        for spk, utts in by_speaker.items()
    }

    trials = read_trials(trials_path)
    score_set, skipped = score_trials(trials, models, test_set, strict=cfg.strict)
    write_scores_tsv(score_set, out_dir / "scores.tsv")

    labeled = bool(score_set.trials) and all(
        t.label is not None for t in score_set.trials
    )
    if labeled:
        report = evaluate(score_set, cfg.p_target, cfg.c_miss, cfg.c_fa)
        (out_dir / "report.txt").write_text(format_report_text(report))
        (out_dir / "report.kv").write_text(format_report_kv(report))
        write_det_tsv(report.det_points, out_dir / "det.tsv")
    else:
        note = "unlabeled trials: scores written, metrics skipped\n"
        (out_dir / "report.txt").write_text(note)
        (out_dir / "report.kv").write_text("eer=nan\nmin_dcf=nan\n")

    manifest = [
        f"tool_version={__version__}",
        f"config_sha256={config_sha256(cfg)}",
        f"enroll_embeddings_sha256={_sha256_file(enroll_emb)}",
        f"test_embeddings_sha256={_sha256_file(test_emb)}",
        f"trials_sha256={_sha256_file(trials_path)}",
        f"excluded_enroll={','.join(dropped_enroll) if dropped_enroll else '-'}",
        f"excluded_test={','.join(dropped_test) if dropped_test else '-'}",
        f"skipped_trials={len(skipped)}",
        f"scored_trials={len(score_set)}",
    ]
    (out_dir / "run.manifest").write_text("\n".join(manifest) + "\n")
    _freeze(cfg, out_dir)


def cmd_pipeline(cfg: RunConfig, workers=1) -> None:
    for key in ("enroll_dir", "test_dir", "noise_dir", "work_dir", "trials_path"):
        if getattr(cfg, key) is None:
            raise ValueError(f"pipeline needs {key}")
    work = Path(cfg.work_dir)
    pool_dir = work / "noise_pool"
    aug_dir = work / "augmented"
    emb_dir = work / "embeddings"
    eval_dir = work / "eval"

    cmd_mine_noise(cfg, cfg.noise_dir, pool_dir, workers=workers)
    cmd_augment(cfg, cfg.enroll_dir, pool_dir, aug_dir, workers=workers)
    external_enroll = cfg.external_enroll if cfg.embedder == "external" else None
    external_test = cfg.external_test if cfg.embedder == "external" else None
    cmd_embed(cfg, aug_dir, emb_dir / "enroll.spkemb", workers=workers, external=external_enroll)
    cmd_embed(cfg, cfg.test_dir, emb_dir / "test.spkemb", workers=workers, external=external_test)
    cmd_evaluate(
        cfg, emb_dir / "enroll.spkemb", emb_dir / "test.spkemb", cfg.trials_path, eval_dir
    )


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sub):
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--workers", type=int, default=1)


def build_parser() -> _Parser:
    parser = _Parser(prog="farvox", description=__doc__)
    parser.add_argument("--version", action="version", version=f"farvox {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("mine-noise", help="mine noise clips from far-field WAVs")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--threshold-db", type=float, dest="threshold_db")
    p.add_argument("--frame-ms", type=float, dest="frame_ms")
    p.add_argument("--hop-ms", type=float, dest="hop_ms")
    p.add_argument("--min-segment-ms", type=float, dest="min_segment_ms")
    p.add_argument("--channel", type=int, dest="channel")

    p = subs.add_parser("augment", help="mix mined noise into clean WAVs at target SNR")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--pool", dest="pool_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), dest="preset")
    p.add_argument("--snr-low", type=float, dest="snr_low")
    p.add_argument("--snr-high", type=float, dest="snr_high")
    p.add_argument("--seed", type=int, dest="seed")

    p = subs.add_parser("denoise", help="spectral-gate WAVs")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--stationary", dest="stationary", action="store_true", default=None)
    group.add_argument("--non-stationary", dest="stationary", action="store_false", default=None)
    p.add_argument("--prop-decrease", type=float, dest="prop_decrease")
    p.add_argument("--n-std", type=float, dest="n_std")
    p.add_argument("--n-fft", type=int, dest="gate_n_fft")
    p.add_argument("--hop", type=int, dest="gate_hop")
    p.add_argument("--channel", type=int, dest="channel")

    p = subs.add_parser("embed", help="compute or import utterance embeddings")
    _add_common(p)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_path", required=True)
    p.add_argument("--embedder", choices=["baseline", "external"], dest="embedder")
    p.add_argument("--external", dest="external_file", help="interchange file for --embedder external")
    p.add_argument("--mel-n-fft", type=int, dest="mel_n_fft")
    p.add_argument("--mel-hop", type=int, dest="mel_hop")
    p.add_argument("--n-mels", type=int, dest="n_mels")
    p.add_argument("--f-min", type=float, dest="f_min")
    p.add_argument("--f-max", type=float, dest="f_max")
    p.add_argument("--channel", type=int, dest="channel")

    p = subs.add_parser("evaluate", help="score trials and report EER/minDCF")
    _add_common(p)
    p.add_argument("--enroll-emb", required=True)
    p.add_argument("--test-emb", required=True)
    p.add_argument("--trials", dest="trials_path", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--p-target", type=float, dest="p_target")
    p.add_argument("--c-miss", type=float, dest="c_miss")
    p.add_argument("--c-fa", type=float, dest="c_fa")
    p.add_argument("--exclude", dest="exclusion_list")
    p.add_argument("--speaker-delimiter", dest="speaker_delimiter")
    p.add_argument("--lenient", dest="strict", action="store_false", default=None)
    p.add_argument("--l2-norm", dest="l2_norm", action="store_true", default=None)

    p = subs.add_parser("pipeline", help="run mine-noise, augment, embed, evaluate")
    _add_common(p)
    p.add_argument("--enroll", dest="enroll_dir")
    p.add_argument("--test", dest="test_dir")
    p.add_argument("--noise", dest="noise_dir")
    p.add_argument("--work", dest="work_dir")
    p.add_argument("--trials", dest="trials_path")
    p.add_argument("--preset", choices=sorted(PRESETS), dest="preset")
    p.add_argument("--snr-low", type=float, dest="snr_low")
    p.add_argument("--snr-high", type=float, dest="snr_high")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--threshold-db", type=float, dest="threshold_db")
    p.add_argument("--exclude", dest="exclusion_list")
    p.add_argument("--speaker-delimiter", dest="speaker_delimiter")
    p.add_argument("--p-target", type=float, dest="p_target")
    p.add_argument("--c-miss", type=float, dest="c_miss")
    p.add_argument("--c-fa", type=float, dest="c_fa")
    p.add_argument("--channel", type=int, dest="channel")
    p.add_argument("--l2-norm", dest="l2_norm", action="store_true", default=None)

    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **parse_config_file(args.config))
    overrides = {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        workers = args.workers
        if args.command == "mine-noise":
            cmd_mine_noise(cfg, args.in_dir, args.out_dir, workers)
        elif args.command == "augment":
            cmd_augment(cfg, args.in_dir, args.pool_dir, args.out_dir, workers)
        elif args.command == "denoise":
            cmd_denoise(cfg, args.in_dir, args.out_dir, workers)
        elif args.command == "embed":
            external = None
            if cfg.embedder == "external" or args.external_file:
                external = args.external_file
                if external is None:
                    raise ValueError("--embedder external requires --external FILE")
            cmd_embed(cfg, args.in_dir, args.out_path, workers, external=external)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.enroll_emb, args.test_emb, args.trials_path, args.out_dir)
        elif args.command == "pipeline":
            cmd_pipeline(cfg, workers)
    except (ValueError, OSError) as exc:
        print(f"farvox: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"farvox: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
