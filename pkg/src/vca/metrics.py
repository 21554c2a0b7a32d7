"""Verification-trial scoring and the EER / minDCF metrics.

Decision rule at threshold t: accept iff score >= t. Sweeping t over the
sorted distinct scores plus -inf/+inf gives the full set of operating
points (Pmiss, Pfa); Pmiss(t) is the fraction of target trials scoring
below t and Pfa(t) the fraction of nontarget trials scoring at or above t.
EER is read off the crossing of the two step functions, linearly
interpolated between adjacent operating points when no exact crossing
exists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MetricError
from .records import atomic_write_text
from .selection import cosine
from .store import EmbeddingStore
from .trainer import LinearSpeakerModel, embed

LABEL_TARGET = 1
LABEL_NONTARGET = 0


@dataclass(frozen=True)
class Trial:
    label: int
    utt_a: str
    utt_b: str

    def validate(self) -> None:
        if self.label not in (LABEL_TARGET, LABEL_NONTARGET):
            raise MetricError(f"trial label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class EvalReport:
    n_trials: int
    eer: float
    min_dcf: float
    p_target: float
    c_miss: float
    c_fa: float
    threshold_at_eer: float

    def to_json_obj(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "eer": self.eer,
            "min_dcf": self.min_dcf,
            "p_target": self.p_target,
            "c_miss": self.c_miss,
            "c_fa": self.c_fa,
            "threshold_at_eer": self.threshold_at_eer,
        }


def score_trials(
    trials: list[Trial], model: LinearSpeakerModel, store: EmbeddingStore
) -> list[float]:
    """Cosine similarity of the model features of each trial's utterances."""
    cache: dict[str, np.ndarray] = {}

    def feature(utt_id: str) -> np.ndarray:
        if utt_id not in cache:
            if utt_id not in store:
                raise MetricError(f"missing embedding for trial utterance {utt_id!r}")
            cache[utt_id] = embed(model, store.get(utt_id))
        return cache[utt_id]

    return [cosine(feature(t.utt_a), feature(t.utt_b)) for t in trials]


def _operating_points(scores, labels):
    """Thresholds (distinct scores plus +/-inf) with Pmiss and Pfa at each."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise MetricError("scores and labels must be equal-length non-empty 1-d sequences")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    n_tar = int(np.sum(y == LABEL_TARGET))
    n_non = int(np.sum(y == LABEL_NONTARGET))
    if n_tar + n_non != s.size:
        raise MetricError("labels must be 0 or 1")
    if n_tar == 0 or n_non == 0:
        raise MetricError(
            f"need at least one target and one nontarget trial, got {n_tar}/{n_non}"
        )
    tar = np.sort(s[y == LABEL_TARGET])
    non = np.sort(s[y == LABEL_NONTARGET])
    thresholds = np.concatenate(([-np.inf], np.unique(s), [np.inf]))
    # Counts below / at-or-above each threshold via binary search on the
    # sorted per-class score arrays.
    p_miss = np.searchsorted(tar, thresholds, side="left") / n_tar
    p_fa = (n_non - np.searchsorted(non, thresholds, side="left")) / n_non
    return thresholds, p_miss, p_fa


def eer(scores, labels) -> tuple[float, float]:
    """Equal error rate and the threshold where miss and false-alarm meet."""
    thresholds, p_miss, p_fa = _operating_points(scores, labels)
    diff = p_miss - p_fa
    # diff is non-decreasing from -1 to +1; find the first sign change.
    j = int(np.argmax(diff >= 0.0))
    if diff[j] == 0.0:
        return float(p_miss[j]), float(thresholds[j])
    i = j - 1
    pm1, pf1, pm2, pf2 = p_miss[i], p_fa[i], p_miss[j], p_fa[j]
    t = (pf1 - pm1) / ((pm2 - pm1) - (pf2 - pf1))
    value = float(pm1 + t * (pm2 - pm1))
    if np.isfinite(thresholds[i]) and np.isfinite(thresholds[j]):
        threshold = float(thresholds[i] + t * (thresholds[j] - thresholds[i]))
    else:
        # Crossing against an infinite sentinel: report the finite endpoint.
        threshold = float(thresholds[i] if np.isfinite(thresholds[i]) else thresholds[j])
    return value, threshold


def min_dcf(scores, labels, p_target: float = 0.01, c_miss: float = 1.0, c_fa: float = 1.0) -> float:
    """Minimum normalized detection cost over all swept thresholds.

    Cost at a threshold is c_miss*p_target*Pmiss + c_fa*(1-p_target)*Pfa,
    normalized by min(c_miss*p_target, c_fa*(1-p_target)). One of the
    extreme thresholds always reaches cost 1, so the result lies in [0, 1].
    """
    if not 0.0 < p_target < 1.0:
        raise MetricError(f"p_target must lie in (0, 1), got {p_target!r}")
    if c_miss <= 0 or c_fa <= 0:
        raise MetricError("c_miss and c_fa must be positive")
    _, p_miss, p_fa = _operating_points(scores, labels)
    costs = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
    return float(costs.min() / min(c_miss * p_target, c_fa * (1.0 - p_target)))


def evaluate(
    trials: list[Trial],
    model: LinearSpeakerModel,
    store: EmbeddingStore,
    p_target: float = 0.01,
    c_miss: float = 1.0,
    c_fa: float = 1.0,
) -> tuple[EvalReport, list[float]]:
    """Score trials and compute the full report."""
    scores = score_trials(trials, model, store)
    labels = [t.label for t in trials]
    eer_value, threshold = eer(scores, labels)
    dcf = min_dcf(scores, labels, p_target=p_target, c_miss=c_miss, c_fa=c_fa)
    report = EvalReport(
        n_trials=len(trials),
        eer=eer_value,
        min_dcf=dcf,
        p_target=p_target,
        c_miss=c_miss,
        c_fa=c_fa,
        threshold_at_eer=threshold,
    )
    return report, scores


def load_trials(path: str | Path) -> list[Trial]:
    """Trial list file: lines of "<label 0|1> <utt_a> <utt_b>"."""
    trials = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MetricError(f"{path}: line {lineno}: expected 'label utt_a utt_b'")
        if parts[0] not in ("0", "1"):
            raise MetricError(f"{path}: line {lineno}: label must be 0 or 1, got {parts[0]!r}")
        trials.append(Trial(label=int(parts[0]), utt_a=parts[1], utt_b=parts[2]))
    return trials


def save_trials(trials: list[Trial], path: str | Path) -> None:
    lines = [f"{t.label} {t.utt_a} {t.utt_b}" for t in trials]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def save_scores(trials: list[Trial], scores: list[float], path: str | Path) -> None:
    """Score file: lines of "<utt_a> <utt_b> <score to 6 fractional digits>"."""
    if len(trials) != len(scores):
        raise MetricError("trials and scores length mismatch")
    lines = [f"{t.utt_a} {t.utt_b} {s:.6f}" for t, s in zip(trials, scores)]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def save_report(report: EvalReport, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(report.to_json_obj(), indent=2) + "\n")
