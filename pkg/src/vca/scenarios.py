"""Defective-dataset scenario construction: semi, small, imbalanced.

Each builder partitions a fully labelled corpus into a target set T and a
source set S with seeded, order-independent sampling: speakers are sorted
by id before sampling, per-speaker utterances likewise, and every sampling
step draws from its own seed sub-stream, so permuting the input corpus or
adding new sampling steps never changes a selection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioError
from .records import (
    UtteranceRecord,
    atomic_write_text,
    load_manifest,
    save_manifest,
)
from .seeding import sample_without_replacement, substream
from .store import EmbeddingStore

KIND_SEMI = "semi"
KIND_SMALL = "small"
KIND_IMBALANCED = "imbalanced"
KINDS = (KIND_SEMI, KIND_SMALL, KIND_IMBALANCED)

SCENARIO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    n_labelled_speakers: int
    utts_per_labelled_speaker: int
    seed: int
    n_unlabelled_utts: int | None = None
    n_minority_speakers: int | None = None
    utts_per_minority_speaker: int | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if self.n_labelled_speakers < 1 or self.utts_per_labelled_speaker < 1:
            raise ScenarioError("speaker and utterance counts must be positive")
        if self.kind == KIND_SEMI:
            if self.n_unlabelled_utts is None or self.n_unlabelled_utts < 0:
                raise ScenarioError("semi scenario requires n_unlabelled_utts >= 0")
        if self.kind == KIND_IMBALANCED:
            if self.n_minority_speakers is None or self.n_minority_speakers < 1:
                raise ScenarioError("imbalanced scenario requires n_minority_speakers >= 1")
            if self.utts_per_minority_speaker is None or self.utts_per_minority_speaker < 1:
                raise ScenarioError("imbalanced scenario requires utts_per_minority_speaker >= 1")

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "n_labelled_speakers": self.n_labelled_speakers,
            "utts_per_labelled_speaker": self.utts_per_labelled_speaker,
            "seed": self.seed,
            "n_unlabelled_utts": self.n_unlabelled_utts,
            "n_minority_speakers": self.n_minority_speakers,
            "utts_per_minority_speaker": self.utts_per_minority_speaker,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ScenarioConfig":
        cfg = ScenarioConfig(
            kind=obj["kind"],
            n_labelled_speakers=obj["n_labelled_speakers"],
            utts_per_labelled_speaker=obj["utts_per_labelled_speaker"],
            seed=obj["seed"],
            n_unlabelled_utts=obj.get("n_unlabelled_utts"),
            n_minority_speakers=obj.get("n_minority_speakers"),
            utts_per_minority_speaker=obj.get("utts_per_minority_speaker"),
        )
        cfg.validate()
        return cfg


@dataclass
class Scenario:
    """Target set T (always labelled) and source set S for one kind.

    held_out_truth maps source utt_ids to their stripped labels. It exists
    only so tests can check label hygiene; planning and training never read
    it.
    """

    kind: str
    targets: list[UtteranceRecord]
    sources: list[UtteranceRecord]
    held_out_truth: dict[str, str] = field(default_factory=dict)
    config: ScenarioConfig | None = None

    def check_invariants(self) -> None:
        cfg = self.config
        if cfg is None:
            return
        n_targets = cfg.n_labelled_speakers * cfg.utts_per_labelled_speaker
        if self.kind == KIND_SEMI:
            if len(self.targets) != n_targets:
                raise ScenarioError(f"semi: |T|={len(self.targets)}, expected {n_targets}")
            if len(self.sources) != cfg.n_unlabelled_utts:
                raise ScenarioError(
                    f"semi: |S|={len(self.sources)}, expected {cfg.n_unlabelled_utts}"
                )
            if any(rec.speaker_id is not None for rec in self.sources):
                raise ScenarioError("semi: source records must have speaker_id stripped")
        elif self.kind == KIND_SMALL:
            if len(self.targets) != n_targets:
                raise ScenarioError(f"small: |T|={len(self.targets)}, expected {n_targets}")
            if [r.utt_id for r in self.targets] != [r.utt_id for r in self.sources]:
                raise ScenarioError("small: targets and sources must be the identical set")
        elif self.kind == KIND_IMBALANCED:
            n_minority = cfg.n_minority_speakers * cfg.utts_per_minority_speaker
            if len(self.targets) != n_minority:
                raise ScenarioError(f"imbalanced: |T|={len(self.targets)}, expected {n_minority}")
            if len(self.sources) != n_targets:
                raise ScenarioError(f"imbalanced: |S|={len(self.sources)}, expected {n_targets}")
            t_speakers = {r.speaker_id for r in self.targets}
            s_speakers = {r.speaker_id for r in self.sources}
            if t_speakers & s_speakers:
                raise ScenarioError("imbalanced: target and source speaker sets must be disjoint")
        if any(rec.speaker_id is None for rec in self.targets):
            raise ScenarioError("targets must all be labelled")

    def labelled_records(self) -> list[UtteranceRecord]:
        """All labelled records visible to training, deduplicated, sorted."""
        by_id: dict[str, UtteranceRecord] = {}
        for rec in list(self.targets) + list(self.sources):
            if rec.speaker_id is not None:
                by_id.setdefault(rec.utt_id, rec)
        return [by_id[u] for u in sorted(by_id)]


def _group_by_speaker(corpus: list[UtteranceRecord]) -> dict[str, list[UtteranceRecord]]:
    groups: dict[str, list[UtteranceRecord]] = {}
    for rec in corpus:
        if rec.speaker_id is None:
            raise ScenarioError(f"corpus record {rec.utt_id!r} is unlabelled")
        groups.setdefault(rec.speaker_id, []).append(rec)
    for recs in groups.values():
        recs.sort(key=lambda r: r.utt_id)
    return groups


def _pick_speakers(
    groups: dict[str, list[UtteranceRecord]],
    pool: list[str],
    n_speakers: int,
    min_utts: int,
    seed: int,
    tag: str,
) -> list[str]:
    eligible = [s for s in pool if len(groups[s]) >= min_utts]
    if len(eligible) < n_speakers:
        raise ScenarioError(
            f"{tag}: need {n_speakers} speakers with >= {min_utts} utterances, "
            f"only {len(eligible)} available (short by {n_speakers - len(eligible)})"
        )
    rng = substream(seed, tag)
    idx = sample_without_replacement(rng, len(eligible), n_speakers)
    return [eligible[i] for i in idx]


def _pick_utts(
    groups: dict[str, list[UtteranceRecord]],
    speaker: str,
    n_utts: int,
    seed: int,
    tag: str,
) -> list[UtteranceRecord]:
    pool = groups[speaker]
    rng = substream(seed, tag, speaker)
    idx = sample_without_replacement(rng, len(pool), n_utts)
    return [pool[i] for i in idx]


def build_semi(
    corpus: list[UtteranceRecord], store: EmbeddingStore, cfg: ScenarioConfig
) -> Scenario:
    """Labelled targets plus an unlabelled source pool from other speakers.

    Source records have speaker_id stripped; the true labels are recorded
    only in held_out_truth.
    """
    cfg.validate()
    if cfg.kind != KIND_SEMI:
        raise ScenarioError(f"build_semi called with kind={cfg.kind!r}")
    groups = _group_by_speaker(corpus)
    speakers = sorted(groups)
    labelled = _pick_speakers(
        groups, speakers, cfg.n_labelled_speakers, cfg.utts_per_labelled_speaker,
        cfg.seed, "semi/labelled-speakers",
    )
    targets: list[UtteranceRecord] = []
    for spk in labelled:
        targets.extend(
            _pick_utts(groups, spk, cfg.utts_per_labelled_speaker, cfg.seed, "semi/target-utts")
        )
    labelled_set = set(labelled)
    unlabelled_pool = [
        rec for spk in speakers if spk not in labelled_set for rec in groups[spk]
    ]
    unlabelled_pool.sort(key=lambda r: r.utt_id)
    if len(unlabelled_pool) < cfg.n_unlabelled_utts:
        raise ScenarioError(
            f"semi: need {cfg.n_unlabelled_utts} unlabelled utterances, pool has "
            f"{len(unlabelled_pool)} (short by {cfg.n_unlabelled_utts - len(unlabelled_pool)})"
        )
    rng = substream(cfg.seed, "semi/unlabelled-utts")
    idx = sample_without_replacement(rng, len(unlabelled_pool), cfg.n_unlabelled_utts)
    chosen = [unlabelled_pool[i] for i in idx]
    truth = {rec.utt_id: rec.speaker_id for rec in chosen}
    sources = [rec.strip_label() for rec in chosen]
    scenario = Scenario(
        kind=KIND_SEMI,
        targets=sorted(targets, key=lambda r: r.utt_id),
        sources=sorted(sources, key=lambda r: r.utt_id),
        held_out_truth=truth,
        config=cfg,
    )
    scenario.check_invariants()
    _check_coverage(scenario, store)
    return scenario


def build_small(
    corpus: list[UtteranceRecord], store: EmbeddingStore, cfg: ScenarioConfig
) -> Scenario:
    """Small-scale corpus where T and S are the identical record list."""
    cfg.validate()
    if cfg.kind != KIND_SMALL:
        raise ScenarioError(f"build_small called with kind={cfg.kind!r}")
    groups = _group_by_speaker(corpus)
    speakers = sorted(groups)
    labelled = _pick_speakers(
        groups, speakers, cfg.n_labelled_speakers, cfg.utts_per_labelled_speaker,
        cfg.seed, "small/speakers",
    )
    targets: list[UtteranceRecord] = []
    for spk in labelled:
        targets.extend(
            _pick_utts(groups, spk, cfg.utts_per_labelled_speaker, cfg.seed, "small/utts")
        )
    targets.sort(key=lambda r: r.utt_id)
    scenario = Scenario(
        kind=KIND_SMALL, targets=targets, sources=list(targets), config=cfg
    )
    scenario.check_invariants()
    _check_coverage(scenario, store)
    return scenario


def build_imbalanced(
    corpus: list[UtteranceRecord], store: EmbeddingStore, cfg: ScenarioConfig
) -> Scenario:
    """Majority speakers as sources, disjoint minority speakers as targets."""
    cfg.validate()
    if cfg.kind != KIND_IMBALANCED:
        raise ScenarioError(f"build_imbalanced called with kind={cfg.kind!r}")
    groups = _group_by_speaker(corpus)
    speakers = sorted(groups)
    majority = _pick_speakers(
        groups, speakers, cfg.n_labelled_speakers, cfg.utts_per_labelled_speaker,
        cfg.seed, "imbalanced/majority-speakers",
    )
    majority_set = set(majority)
    remaining = [s for s in speakers if s not in majority_set]
    minority = _pick_speakers(
        groups, remaining, cfg.n_minority_speakers, cfg.utts_per_minority_speaker,
        cfg.seed, "imbalanced/minority-speakers",
    )
    sources: list[UtteranceRecord] = []
    for spk in majority:
        sources.extend(
            _pick_utts(groups, spk, cfg.utts_per_labelled_speaker, cfg.seed, "imbalanced/majority-utts")
        )
    targets: list[UtteranceRecord] = []
    for spk in minority:
        targets.extend(
            _pick_utts(groups, spk, cfg.utts_per_minority_speaker, cfg.seed, "imbalanced/minority-utts")
        )
    scenario = Scenario(
        kind=KIND_IMBALANCED,
        targets=sorted(targets, key=lambda r: r.utt_id),
        sources=sorted(sources, key=lambda r: r.utt_id),
        config=cfg,
    )
    scenario.check_invariants()
    _check_coverage(scenario, store)
    return scenario


def build_scenario(
    corpus: list[UtteranceRecord], store: EmbeddingStore, cfg: ScenarioConfig
) -> Scenario:
    builder = {
        KIND_SEMI: build_semi,
        KIND_SMALL: build_small,
        KIND_IMBALANCED: build_imbalanced,
    }[cfg.kind]
    return builder(corpus, store, cfg)


def _check_coverage(scenario: Scenario, store: EmbeddingStore) -> None:
    for rec in list(scenario.targets) + list(scenario.sources):
        if rec.utt_id not in store:
            raise ScenarioError(f"no embedding for selected utterance {rec.utt_id!r}")


def save_scenario(scenario: Scenario, out_dir: str | Path) -> None:
    """Serialize as a directory: targets/sources/truth JSONL plus scenario.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(scenario.targets, out / "targets.jsonl")
    save_manifest(scenario.sources, out / "sources.jsonl")
    truth_lines = [
        json.dumps({"utt_id": u, "speaker_id": scenario.held_out_truth[u]})
        for u in sorted(scenario.held_out_truth)
    ]
    atomic_write_text(out / "truth.jsonl", "".join(line + "\n" for line in truth_lines))
    meta = {
        "version": SCENARIO_FORMAT_VERSION,
        "kind": scenario.kind,
        "seed": scenario.config.seed if scenario.config else None,
        "config": scenario.config.to_json_obj() if scenario.config else None,
    }
    atomic_write_text(out / "scenario.json", json.dumps(meta, indent=2) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    root = Path(path)
    meta = json.loads((root / "scenario.json").read_text(encoding="utf-8"))
    if meta.get("version") != SCENARIO_FORMAT_VERSION:
        raise ScenarioError(f"{root}: unsupported scenario.json version {meta.get('version')!r}")
    if meta.get("kind") not in KINDS:
        raise ScenarioError(f"{root}: unknown kind {meta.get('kind')!r}")
    cfg = ScenarioConfig.from_json_obj(meta["config"]) if meta.get("config") else None
    targets = load_manifest(root / "targets.jsonl")
    sources = load_manifest(root / "sources.jsonl")
    truth: dict[str, str] = {}
    truth_path = root / "truth.jsonl"
    if truth_path.exists():
        for line in truth_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                truth[obj["utt_id"]] = obj["speaker_id"]
    scenario = Scenario(
        kind=meta["kind"], targets=targets, sources=sources,
        held_out_truth=truth, config=cfg,
    )
    scenario.check_invariants()
    return scenario
