"""Synthetic speaker universes and seeded end-to-end experiments.

A universe is a set of unit-norm speaker identity vectors with isotropic
within-speaker noise on every utterance, plus a verification trial list
built from a disjoint set of evaluation speakers. Experiments run the full
pipeline (scenario, optional stage-1 model, plan, synthetic conversion,
evaluation-model training, trial scoring) per seed, with all arms of one
seed sharing the identical universe, scenario, and trial list, so arm
differences are paired.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .conversion import SyntheticVCParams, apply_plan
from .errors import DataError
from .metrics import Trial, eer, min_dcf, score_trials
from .records import UtteranceRecord, atomic_write_text
from .scenarios import (
    KIND_IMBALANCED,
    KIND_SEMI,
    KIND_SMALL,
    ScenarioConfig,
    build_scenario,
)
from .seeding import derive_seed, substream
from .selection import STRATEGY_NN, STRATEGY_RS, plan_nn, plan_rs
from .store import EmbeddingStore
from .trainer import (
    PHI_IDENTITY,
    PHI_TRAINED,
    TrainConfig,
    train,
    train_phi,
    transform_store,
)

ARM_BASELINE = "baseline"

REPORT_FORMAT_VERSION = 1
CONFIG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class UniverseConfig:
    n_train_speakers: int = 60
    n_eval_speakers: int = 40
    dim: int = 32
    sigma_within: float = 0.3
    utts_per_train_speaker: int = 8
    utts_per_eval_speaker: int = 8
    master_seed: int = 0

    def validate(self) -> None:
        for name in (
            "n_train_speakers",
            "n_eval_speakers",
            "dim",
            "utts_per_train_speaker",
            "utts_per_eval_speaker",
        ):
            if getattr(self, name) < 1:
                raise DataError(f"universe config: {name} must be >= 1")
        if not np.isfinite(self.sigma_within) or self.sigma_within < 0:
            raise DataError("universe config: sigma_within must be finite and >= 0")

    def to_json_obj(self) -> dict:
        return {
            "n_train_speakers": self.n_train_speakers,
            "n_eval_speakers": self.n_eval_speakers,
            "dim": self.dim,
            "sigma_within": self.sigma_within,
            "utts_per_train_speaker": self.utts_per_train_speaker,
            "utts_per_eval_speaker": self.utts_per_eval_speaker,
            "master_seed": self.master_seed,
        }


def _speaker_identity(cfg: UniverseConfig, speaker_id: str) -> np.ndarray:
    v = substream(cfg.master_seed, "universe/identity", speaker_id).standard_normal(cfg.dim)
    return v / np.linalg.norm(v)

def _utterance_embedding(cfg: UniverseConfig, identity: np.ndarray, utt_id: str) -> np.ndarray:
    g = substream(cfg.master_seed, "universe/utt", utt_id).standard_normal(cfg.dim)
    raw = identity + cfg.sigma_within * g
    return raw / np.linalg.norm(raw)


def generate_universe(
    cfg: UniverseConfig,
) -> tuple[list[UtteranceRecord], EmbeddingStore, list[Trial]]:
    """Build (training corpus, embedding store, evaluation trial list).

    The store covers training and evaluation utterances; the corpus holds
    only training speakers. Trials pair evaluation utterances: per eval
    speaker, every same-speaker pair as a target trial and an equal count
    of seeded cross-speaker pairs as nontargets.
    """
    cfg.validate()
    store = EmbeddingStore(cfg.dim)
    corpus: list[UtteranceRecord] = []
    for i in range(cfg.n_train_speakers):
        spk = f"spk{i:04d}"
        identity = _speaker_identity(cfg, spk)
        for j in range(cfg.utts_per_train_speaker):
            utt = f"{spk}-u{j:02d}"
            store.add(utt, _utterance_embedding(cfg, identity, utt))
            corpus.append(UtteranceRecord(utt_id=utt, speaker_id=spk))
    eval_utts: dict[str, list[str]] = {}
    for i in range(cfg.n_eval_speakers):
        spk = f"ev{i:04d}"
        identity = _speaker_identity(cfg, spk)
        utts = []
        for j in range(cfg.utts_per_eval_speaker):
            utt = f"{spk}-u{j:02d}"
            store.add(utt, _utterance_embedding(cfg, identity, utt))
            utts.append(utt)
        eval_utts[spk] = utts
    trials: list[Trial] = []
    eval_speakers = sorted(eval_utts)
    for spk in eval_speakers:
        utts = eval_utts[spk]
        same_pairs = [
            (utts[a], utts[b]) for a in range(len(utts)) for b in range(a + 1, len(utts))
        ]
        for a, b in same_pairs:
            trials.append(Trial(label=1, utt_a=a, utt_b=b))
        rng = substream(cfg.master_seed, "universe/trials", spk)
        others = [s for s in eval_speakers if s != spk]
        for _ in same_pairs:
            own = utts[int(rng.integers(len(utts)))]
            other_spk = others[int(rng.integers(len(others)))]
            other = eval_utts[other_spk][int(rng.integers(len(eval_utts[other_spk])))]
            trials.append(Trial(label=0, utt_a=own, utt_b=other))
    return corpus, store, trials


def desk_scenario_config(kind: str, seed: int = 0) -> ScenarioConfig:
    """Desk-scale analogs of the three defective-dataset constructions,
    sized to fit the default universe."""
    if kind == KIND_SEMI:
        return ScenarioConfig(
            kind=KIND_SEMI,
            n_labelled_speakers=15,
            utts_per_labelled_speaker=3,
            n_unlabelled_utts=200,
            seed=seed,
        )
    if kind == KIND_SMALL:
        return ScenarioConfig(
            kind=KIND_SMALL,
            n_labelled_speakers=20,
            utts_per_labelled_speaker=3,
            seed=seed,
        )
    if kind == KIND_IMBALANCED:
        return ScenarioConfig(
            kind=KIND_IMBALANCED,
            n_labelled_speakers=20,
            utts_per_labelled_speaker=8,
            n_minority_speakers=30,
            utts_per_minority_speaker=1,
            seed=seed,
        )
    raise DataError(f"unknown scenario kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    universe: UniverseConfig = field(default_factory=UniverseConfig)
    scenario: ScenarioConfig = field(
        default_factory=lambda: desk_scenario_config(KIND_IMBALANCED)
    )
    strategies: tuple[str, ...] = (STRATEGY_RS, STRATEGY_NN)
    k_values: tuple[int, ...] = (0, 9)
    n_seeds: int = 10
    # Experiment-grade evaluation training: full-batch so every arm takes
    # the same number of gradient steps regardless of augmented corpus
    # size, and enough steps that model quality responds to the data.
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=150, batch=512, lr=1.0))
    # Stage-1 similarity model stays gently trained (library defaults): a
    # basic model, not the heavily optimized evaluation model.
    phi_train: TrainConfig = field(default_factory=TrainConfig)
    # Conversion calibrated so a well-matched source emits pseudo samples
    # with roughly the universe's natural within-speaker spread, while a
    # mismatched source over-disperses them.
    vc: SyntheticVCParams = field(
        default_factory=lambda: SyntheticVCParams(
            sigma_base=0.05, lambda_noise=1.0, lambda_drift=0.0
        )
    )
    phi: str = PHI_TRAINED
    min_similarity: float | None = None
    p_target: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0

    def validate(self) -> None:
        self.universe.validate()
        self.scenario.validate()
        self.train.validate()
        self.phi_train.validate()
        self.vc.validate()
        if self.n_seeds < 1:
            raise DataError("n_seeds must be >= 1")
        for strat in self.strategies:
            if strat not in (STRATEGY_RS, STRATEGY_NN):
                raise DataError(f"unknown strategy {strat!r}")
        if any(k < 0 for k in self.k_values) or len(set(self.k_values)) != len(self.k_values):
            raise DataError("k_values must be distinct and >= 0")
        if self.phi not in (PHI_TRAINED, PHI_IDENTITY):
            raise DataError(f"unknown phi mode {self.phi!r}")

    def to_json_obj(self) -> dict:
        return {
            "version": CONFIG_FORMAT_VERSION,
            "universe": self.universe.to_json_obj(),
            "scenario": self.scenario.to_json_obj(),
            "strategies": list(self.strategies),
            "k_values": list(self.k_values),
            "n_seeds": self.n_seeds,
            "train": {
                "epochs": self.train.epochs,
                "batch": self.train.batch,
                "lr": self.train.lr,
                "seed": self.train.seed,
            },
            "phi_train": {
                "epochs": self.phi_train.epochs,
                "batch": self.phi_train.batch,
                "lr": self.phi_train.lr,
                "seed": self.phi_train.seed,
            },
            "vc": {
                "sigma_base": self.vc.sigma_base,
                "lambda_noise": self.vc.lambda_noise,
                "lambda_drift": self.vc.lambda_drift,
                "seed": self.vc.seed,
            },
            "phi": self.phi,
            "min_similarity": self.min_similarity,
            "min_dcf": {"p_target": self.p_target, "c_miss": self.c_miss, "c_fa": self.c_fa},
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ExperimentConfig":
        if obj.get("version", CONFIG_FORMAT_VERSION) != CONFIG_FORMAT_VERSION:
            raise DataError(f"unsupported experiment config version {obj.get('version')!r}")
        universe = UniverseConfig(**obj.get("universe", {}))
        scenario = ScenarioConfig.from_json_obj(obj["scenario"])
        dcf = obj.get("min_dcf", {})
        overrides: dict = {}
        if "train" in obj:
            overrides["train"] = TrainConfig(**obj["train"])
        if "phi_train" in obj:
            overrides["phi_train"] = TrainConfig(**obj["phi_train"])
        if "vc" in obj:
            overrides["vc"] = SyntheticVCParams(**obj["vc"])
        cfg = ExperimentConfig(
            universe=universe,
            scenario=scenario,
            strategies=tuple(obj.get("strategies", (STRATEGY_RS, STRATEGY_NN))),
            k_values=tuple(obj.get("k_values", (0, 9))),
            n_seeds=obj.get("n_seeds", 10),
            phi=obj.get("phi", PHI_TRAINED),
            min_similarity=obj.get("min_similarity"),
            p_target=dcf.get("p_target", 0.01),
            c_miss=dcf.get("c_miss", 1.0),
            c_fa=dcf.get("c_fa", 1.0),
            **overrides,
        )
        cfg.validate()
        return cfg


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ExperimentRun:
    seed: int
    arm: str
    k: int
    eer: float
    min_dcf: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    runs: list[ExperimentRun]

    def arm_runs(self, arm: str, k: int) -> list[ExperimentRun]:
        return [r for r in self.runs if r.arm == arm and r.k == k]

    def mean_eer(self, arm: str, k: int) -> float:
        runs = self.arm_runs(arm, k)
        if not runs:
            raise DataError(f"no runs for arm {arm!r} at K={k}")
        return float(np.mean([r.eer for r in runs]))

    def mean_min_dcf(self, arm: str, k: int) -> float:
        runs = self.arm_runs(arm, k)
        if not runs:
            raise DataError(f"no runs for arm {arm!r} at K={k}")
        return float(np.mean([r.min_dcf for r in runs]))

    def cells(self) -> list[tuple[str, int]]:
        seen = []
        for r in self.runs:
            cell = (r.arm, r.k)
            if cell not in seen:
                seen.append(cell)
        return sorted(seen, key=lambda c: (c[1], c[0]))

    def to_json_obj(self) -> dict:
        means = {
            f"{arm}@k={k}": {
                "eer": self.mean_eer(arm, k),
                "min_dcf": self.mean_min_dcf(arm, k),
                "n_seeds": len(self.arm_runs(arm, k)),
            }
            for arm, k in self.cells()
        }
        return {
            "version": REPORT_FORMAT_VERSION,
            "config": self.config.to_json_obj(),
            "runs": [
                {"seed": r.seed, "arm": r.arm, "k": r.k, "eer": r.eer, "min_dcf": r.min_dcf}
                for r in self.runs
            ],
            "means": means,
        }


def save_report_json(report: ExperimentReport, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(report.to_json_obj(), indent=2) + "\n")


def report_runs_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["arm", "k", "seed", "eer", "min_dcf"])
    for r in sorted(report.runs, key=lambda r: (r.k, r.arm, r.seed)):
        writer.writerow([r.arm, r.k, r.seed, f"{r.eer:.6f}", f"{r.min_dcf:.6f}"])
    return buf.getvalue()


def report_summary_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["arm", "k", "mean_eer", "std_eer", "mean_min_dcf", "std_min_dcf", "n_seeds"])
    for arm, k in report.cells():
        eers = [r.eer for r in report.arm_runs(arm, k)]
        dcfs = [r.min_dcf for r in report.arm_runs(arm, k)]
        writer.writerow(
            [
                arm,
                k,
                f"{np.mean(eers):.6f}",
                f"{np.std(eers):.6f}",
                f"{np.mean(dcfs):.6f}",
                f"{np.std(dcfs):.6f}",
                len(eers),
            ]
        )
    return buf.getvalue()


def _phi_tag(model) -> str:
    digest = hashlib.blake2b(
        model.A.astype("<f8").tobytes() + model.C.astype("<f8").tobytes(), digest_size=6
    ).hexdigest()
    return f"trained:{digest}"


def run_experiment(
    universe_cfg: UniverseConfig,
    scenario_cfg: ScenarioConfig,
    strategies=(STRATEGY_RS, STRATEGY_NN),
    k_values=(0, 9),
    n_seeds: int = 10,
    train_cfg: TrainConfig | None = None,
    phi_train_cfg: TrainConfig | None = None,
    vc_params: SyntheticVCParams | None = None,
    phi: str = PHI_TRAINED,
    min_similarity: float | None = None,
    p_target: float = 0.01,
    c_miss: float = 1.0,
    c_fa: float = 1.0,
) -> ExperimentReport:
    """Paired multi-seed comparison of baseline vs augmentation strategies.

    Per seed: build the universe and scenario, then for K=0 train the
    evaluation model on the unaugmented labelled corpus (the baseline arm)
    and for each K>0 and strategy run plan -> synthetic conversion ->
    train -> score on the shared trial list.
    """
    overrides: dict = {}
    if train_cfg is not None:
        overrides["train"] = train_cfg
    if phi_train_cfg is not None:
        overrides["phi_train"] = phi_train_cfg
    if vc_params is not None:
        overrides["vc"] = vc_params
    cfg = ExperimentConfig(
        universe=universe_cfg,
        scenario=scenario_cfg,
        strategies=tuple(strategies),
        k_values=tuple(k_values),
        n_seeds=n_seeds,
        phi=phi,
        min_similarity=min_similarity,
        p_target=p_target,
        c_miss=c_miss,
        c_fa=c_fa,
        **overrides,
    )
    cfg.validate()
    runs: list[ExperimentRun] = []
    for seed_idx in range(cfg.n_seeds):
        runs.extend(_run_one_seed(cfg, seed_idx))
    return ExperimentReport(config=cfg, runs=runs)


def _run_one_seed(cfg: ExperimentConfig, seed_idx: int) -> list[ExperimentRun]:
    u_cfg = replace(
        cfg.universe,
        master_seed=derive_seed(cfg.universe.master_seed, "experiment/universe", seed_idx),
    )
    corpus, store, trials = generate_universe(u_cfg)
    sc_cfg = replace(
        cfg.scenario, seed=derive_seed(cfg.scenario.seed, "experiment/scenario", seed_idx)
    )
    scenario = build_scenario(corpus, store, sc_cfg)
    labelled = scenario.labelled_records()
    train_seed = derive_seed(cfg.train.seed, "experiment/eval-train", seed_idx)
    labels = [t.label for t in trials]

    def evaluate_arm(records, eval_store) -> tuple[float, float]:
        model = train(records, eval_store, replace(cfg.train, seed=train_seed))
        scores = score_trials(trials, model, eval_store)
        eer_value, _ = eer(scores, labels)
        dcf = min_dcf(scores, labels, p_target=cfg.p_target, c_miss=cfg.c_miss, c_fa=cfg.c_fa)
        return eer_value, dcf

    runs: list[ExperimentRun] = []
    phi_space: EmbeddingStore | None = None
    phi_tag = PHI_IDENTITY
    if STRATEGY_NN in cfg.strategies and any(k > 0 for k in cfg.k_values):
        phi_model = train_phi(
            scenario,
            store,
            replace(
                cfg.phi_train,
                seed=derive_seed(cfg.phi_train.seed, "experiment/phi-train", seed_idx),
            ),
            phi=cfg.phi,
        )
        needed = sorted(
            {r.utt_id for r in scenario.targets} | {r.utt_id for r in scenario.sources}
        )
        phi_space = transform_store(phi_model, store, needed)
        phi_tag = _phi_tag(phi_model) if cfg.phi == PHI_TRAINED else PHI_IDENTITY
    vc_seeded = replace(cfg.vc, seed=derive_seed(cfg.vc.seed, "experiment/vc", seed_idx))
    for k in cfg.k_values:
        if k == 0:
            eer_value, dcf = evaluate_arm(labelled, store)
            runs.append(
                ExperimentRun(seed=seed_idx, arm=ARM_BASELINE, k=0, eer=eer_value, min_dcf=dcf)
            )
            continue
        for strategy in cfg.strategies:
            if strategy == STRATEGY_RS:
                plan = plan_rs(
                    scenario, k, seed=derive_seed(cfg.vc.seed, "experiment/plan-rs", seed_idx)
                )
            else:
                plan = plan_nn(
                    scenario,
                    k,
                    phi_space,
                    min_similarity=cfg.min_similarity,
                    phi_tag=phi_tag,
                )
            augmented = apply_plan(plan, labelled, store, params=vc_seeded)
            expected = len(labelled) + k * len(scenario.targets)
            if len(augmented.records) != expected:
                raise DataError(
                    f"augmented corpus has {len(augmented.records)} records, expected {expected}"
                )
            eer_value, dcf = evaluate_arm(augmented.records, augmented.store)
            runs.append(
                ExperimentRun(seed=seed_idx, arm=strategy, k=k, eer=eer_value, min_dcf=dcf)
            )
    return runs
