"""Cosine trial scoring and EER / minDCF / DET computation.

Threshold convention: a trial is accepted when its similarity score is at
or above the threshold. P_miss is the fraction of targets strictly below
the threshold, P_fa the fraction of nontargets at or above it. EER is
found by linear interpolation between the two operating points that
bracket P_miss = P_fa. Dissimilarity scores are negated internally, so
both conventions give identical metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import Embedding, EmbeddingSet, SpeakerModel
from .errors import DataError, TrialError

TARGET = "target"
NONTARGET = "nontarget"

DEFAULT_P_TARGET = 0.01
DEFAULT_C_MISS = 1.0
DEFAULT_C_FA = 1.0


@dataclass(frozen=True)
class Trial:
    enroll_speaker_id: str
    test_utterance_id: str
    label: str | None = None

    def __post_init__(self):
        if not self.enroll_speaker_id or not self.test_utterance_id:
            raise ValueError("trial ids must be non-empty")
        if self.label not in (None, TARGET, NONTARGET):
            raise ValueError(f"bad trial label {self.label!r}")


@dataclass
class ScoreSet:
    trials: list[Trial]
    scores: np.ndarray
    convention: str = "dissimilarity"  # or "similarity"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.convention not in ("similarity", "dissimilarity"):
            raise ValueError(f"bad score convention {self.convention!r}")
        if len(self.trials) != self.scores.shape[0]:
            raise ValueError("trials/scores length mismatch")
        if self.scores.size and not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    def __len__(self):
        return len(self.trials)


@dataclass
class EvalReport:
    eer: float
    min_dcf: float
    p_target: float
    c_miss: float
    c_fa: float
    n_target: int
    n_nontarget: int
    det_points: list[tuple[float, float]] = field(default_factory=list)


def cosine_dissimilarity(a: Embedding, b: Embedding) -> float:
    """1 - cos(angle) between the two vectors; 0 identical, 2 opposite."""
    if a.dim != b.dim:
        raise DataError(f"dim mismatch: {a.dim} vs {b.dim}")
    va = a.values.astype(np.float64)
    vb = b.values.astype(np.float64)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DataError(
            f"zero-norm embedding ({a.utterance_id!r} or {b.utterance_id!r})"
        )
    return float(1.0 - np.dot(va, vb) / (na * nb))


def score_trials(
    trials,
    speakers: dict[str, SpeakerModel],
    tests: EmbeddingSet,
    strict: bool = True,
):
    """Cosine-dissimilarity score per resolvable trial, in input order.

    Returns (ScoreSet, skipped_trials). Under the strict policy any
    unresolvable trial raises instead of being skipped.
    """
    scored = []
    values = []
    skipped = []
    for trial in trials:
        model = speakers.get(trial.enroll_speaker_id)
        known_test = trial.test_utterance_id in tests
        if model is None or not known_test:
            if strict:
                what = "speaker" if model is None else "test utterance"
                missing = (
                    trial.enroll_speaker_id if model is None else trial.test_utterance_id
                )
                raise TrialError(f"unresolvable trial: unknown {what} {missing!r}")
            skipped.append(trial)
            continue
        scored.append(trial)
        values.append(cosine_dissimilarity(model.centroid, tests[trial.test_utterance_id]))
    return ScoreSet(scored, np.array(values, dtype=np.float64)), skipped


def _similarity_and_labels(score_set: ScoreSet):
    labels = []
    for trial in score_set.trials:
        if trial.label is None:
            raise DataError("metrics need labeled trials")
        labels.append(1 if trial.label == TARGET else 0)
    labels = np.array(labels, dtype=bool)
    if not labels.any() or labels.all():
        raise DataError("metrics need at least one target and one nontarget trial")
    sims = score_set.scores
    if score_set.convention == "dissimilarity":
        sims = -sims
    return sims, labels


def _operating_points(sims, labels):
    """(thresholds, p_fa, p_miss) at each distinct score plus reject-all."""
    target = np.sort(sims[labels])
    nontarget = np.sort(sims[~labels])
    thresholds = np.unique(sims)
    p_miss = np.searchsorted(target, thresholds, side="left") / target.size
    p_fa = (nontarget.size - np.searchsorted(nontarget, thresholds, side="left")) / nontarget.size
    # reject-all endpoint; accept-all coincides with the lowest threshold
    thresholds = np.append(thresholds, np.inf)
    p_miss = np.append(p_miss, 1.0)
    p_fa = np.append(p_fa, 0.0)
    return thresholds, p_fa, p_miss


def det_points(score_set: ScoreSet) -> list[tuple[float, float]]:
    """(P_fa, P_miss) per threshold, ascending; ends at (1,0) ... (0,1)."""
    sims, labels = _similarity_and_labels(score_set)
    _, p_fa, p_miss = _operating_points(sims, labels)
    return list(zip(p_fa.tolist(), p_miss.tolist()))


def _interpolate_eer(p_fa, p_miss):
    diff = p_miss - p_fa
    # diff rises monotonically from -1 to +1; find the sign change
    i = int(np.searchsorted(diff > 0, True)) - 1
    if diff[i] == 0.0:
        return float(p_miss[i])
    alpha = -diff[i] / (diff[i + 1] - diff[i])
    return float(p_miss[i] + alpha * (p_miss[i + 1] - p_miss[i]))


def compute_eer(score_set: ScoreSet) -> float:
    """Equal error rate, interpolated between bracketing operating points."""
    sims, labels = _similarity_and_labels(score_set)
    _, p_fa, p_miss = _operating_points(sims, labels)
    return _interpolate_eer(p_fa, p_miss)


def compute_min_dcf(
    score_set: ScoreSet,
    p_target: float = DEFAULT_P_TARGET,
    c_miss: float = DEFAULT_C_MISS,
    c_fa: float = DEFAULT_C_FA,
) -> float:
    """Minimum normalized detection cost over all thresholds.

    min over thresholds of
    (c_miss * p_target * P_miss + c_fa * (1 - p_target) * P_fa),
    normalized by the better of the accept-all / reject-all systems.
    """
    if not 0.0 < p_target < 1.0:
        raise ValueError("p_target must lie in (0, 1)")
    if c_miss <= 0.0 or c_fa <= 0.0:
        raise ValueError("costs must be > 0")
    sims, labels = _similarity_and_labels(score_set)
    _, p_fa, p_miss = _operating_points(sims, labels)
    cost = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
    return float(cost.min() / min(c_miss * p_target, c_fa * (1.0 - p_target)))


def evaluate(score_set: ScoreSet, p_target=DEFAULT_P_TARGET, c_miss=DEFAULT_C_MISS, c_fa=DEFAULT_C_FA) -> EvalReport:
    sims, labels = _similarity_and_labels(score_set)
    return EvalReport(
        eer=compute_eer(score_set),
        min_dcf=compute_min_dcf(score_set, p_target, c_miss, c_fa),
        p_target=p_target,
        c_miss=c_miss,
        c_fa=c_fa,
        n_target=int(labels.sum()),
        n_nontarget=int((~labels).sum()),
        det_points=det_points(score_set),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def read_trials(path) -> list[Trial]:
    """Whitespace/tab separated: enroll_speaker test_utterance [label]."""
    trials = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 2:
            trials.append(Trial(parts[0], parts[1]))
        elif len(parts) == 3:
            if parts[2] not in (TARGET, NONTARGET):
                raise DataError(f"{path}:{lineno}: bad label {parts[2]!r}")
            trials.append(Trial(parts[0], parts[1], parts[2]))
        else:
            raise DataError(f"{path}:{lineno}: expected 2 or 3 columns")
    return trials


def write_scores_tsv(score_set: ScoreSet, path) -> None:
    labeled = all(t.label is not None for t in score_set.trials)
    header = "enroll_speaker_id\ttest_utterance_id\tscore"
    if labeled and score_set.trials:
        header += "\tlabel"
    lines = [header]
    for trial, score in zip(score_set.trials, score_set.scores):
        row = f"{trial.enroll_speaker_id}\t{trial.test_utterance_id}\t{score:.9g}"
        if labeled and score_set.trials:
            row += f"\t{trial.label}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def read_scores_tsv(path, convention="dissimilarity") -> ScoreSet:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataError(f"{path}: empty scores file")
    columns = lines[0].split("\t")
    labeled = len(columns) == 4
    trials = []
    values = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(columns):
            raise DataError(f"{path}:{lineno}: wrong column count")
        trials.append(Trial(parts[0], parts[1], parts[3] if labeled else None))
        values.append(float(parts[2]))
    return ScoreSet(trials, np.array(values), convention)


def write_det_tsv(points, path) -> None:
    lines = ["p_fa\tp_miss"]
    lines += [f"{fa:.9g}\t{miss:.9g}" for fa, miss in points]
    Path(path).write_text("\n".join(lines) + "\n")


def format_report_text(report: EvalReport) -> str:
    return (
        "evaluation report\n"
        f"  trials: {report.n_target} target, {report.n_nontarget} nontarget\n"
        f"  EER:    {100.0 * report.eer:.4f} %\n"
        f"  minDCF: {report.min_dcf:.6f} "
        f"(p_target={report.p_target:g}, c_miss={report.c_miss:g}, c_fa={report.c_fa:g})\n"
    )


def format_report_kv(report: EvalReport) -> str:
    return (
        f"eer={report.eer:.6f}\n"
        f"min_dcf={report.min_dcf:.6f}\n"
        f"p_target={report.p_target:.6f}\n"
        f"c_miss={report.c_miss:.6f}\n"
        f"c_fa={report.c_fa:.6f}\n"
        f"n_target={report.n_target}\n"
        f"n_nontarget={report.n_nontarget}\n"
    )
