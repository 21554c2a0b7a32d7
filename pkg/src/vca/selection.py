"""Augmentation-plan construction: random source selection and exact
nearest-neighbour source selection in embedding cosine space.

Eligibility is label-driven and identical for both strategies: a source is
eligible for a target unless it is the target utterance itself, or both
carry speaker labels and the labels match. Plans are canonical (jobs sorted
by target then k_index), so output is independent of target iteration
order and worker count.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PlanError
from .records import UtteranceRecord, atomic_write_text
from .scenarios import Scenario
from .seeding import sample_without_replacement, substream
from .store import EmbeddingStore

STRATEGY_RS = "rs"
STRATEGY_NN = "nn"

PLAN_FORMAT_VERSION = 1

JOB_KEYS = ("job_id", "target_utt", "source_utt", "assigned_speaker", "k_index", "pseudo_utt_id")
# emit_external_jobs augments job lines with endpoint audio paths.
JOB_AUDIO_KEYS = ("target_audio_path", "source_audio_path")


def pseudo_utt_id(target_utt: str, k_index: int) -> str:
    return f"{target_utt}#vca{k_index}"


@dataclass(frozen=True)
class ConversionJob:
    """One (target, source) conversion producing one pseudo utterance."""

    job_id: str
    target_utt: str
    source_utt: str
    assigned_speaker: str
    k_index: int
    pseudo_utt_id: str

    def validate(self) -> None:
        if self.target_utt == self.source_utt:
            raise PlanError(f"job {self.job_id!r}: source equals target {self.target_utt!r}")
        if self.k_index < 0:
            raise PlanError(f"job {self.job_id!r}: negative k_index")
        if self.pseudo_utt_id != pseudo_utt_id(self.target_utt, self.k_index):
            raise PlanError(f"job {self.job_id!r}: pseudo_utt_id does not follow the naming rule")


@dataclass
class AugmentationPlan:
    """Ordered conversion jobs for one scenario and one strategy."""

    strategy: str
    k: int
    jobs: list[ConversionJob]
    seed: int | None = None
    phi_tag: str | None = None

    def validate(self, scenario: Scenario | None = None) -> None:
        if self.strategy not in (STRATEGY_RS, STRATEGY_NN):
            raise PlanError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise PlanError(f"generation coefficient K must be >= 1, got {self.k}")
        per_target: dict[str, list[ConversionJob]] = {}
        for job in self.jobs:
            job.validate()
            per_target.setdefault(job.target_utt, []).append(job)
        for target, jobs in per_target.items():
            k_indices = sorted(j.k_index for j in jobs)
            if k_indices != list(range(self.k)):
                raise PlanError(f"target {target!r}: k_index values are not exactly 0..{self.k - 1}")
            sources = [j.source_utt for j in jobs]
            if len(set(sources)) != len(sources):
                raise PlanError(f"target {target!r}: repeated source utterance within one target")
        expected_order = sorted(self.jobs, key=lambda j: (j.target_utt, j.k_index))
        if self.jobs != expected_order:
            raise PlanError("jobs are not in canonical (target_utt, k_index) order")
        if scenario is not None:
            target_ids = {r.utt_id for r in scenario.targets}
            source_ids = {r.utt_id for r in scenario.sources}
            labels = {r.utt_id: r.speaker_id for r in scenario.targets}
            if len(self.jobs) != self.k * len(scenario.targets):
                raise PlanError(
                    f"plan has {len(self.jobs)} jobs, expected K*|T| = "
                    f"{self.k * len(scenario.targets)}"
                )
            for job in self.jobs:
                if job.target_utt not in target_ids:
                    raise PlanError(f"job {job.job_id!r}: target {job.target_utt!r} not in T")
                if job.source_utt not in source_ids:
                    raise PlanError(f"job {job.job_id!r}: source {job.source_utt!r} not in S")
                if job.assigned_speaker != labels[job.target_utt]:
                    raise PlanError(
                        f"job {job.job_id!r}: assigned speaker differs from the target's label"
                    )


def cosine(a, b) -> float:
    """Cosine similarity a.b / (|a||b|), computed in float64, clamped to [-1, 1].

    The denominator is evaluated as sqrt((a.a)(b.b)), which makes
    cosine(v, v) exactly 1.0 in IEEE arithmetic.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise PlanError(f"cosine: dimension mismatch {va.shape} vs {vb.shape}")
    na2 = float(np.dot(va, va))
    nb2 = float(np.dot(vb, vb))
    if na2 == 0.0 or nb2 == 0.0:
        raise PlanError("cosine: zero-norm vector")
    return float(np.clip(np.dot(va, vb) / np.sqrt(na2 * nb2), -1.0, 1.0))


def _select_best(sims: np.ndarray, ids: list[str], k: int) -> list[int]:
    """Indices of the k highest-similarity entries, ties broken by ascending id.

    Exact: equals the first k elements of the full (descending sim,
    ascending id) sort, but runs in O(n + k log k) via a value partition,
    never a full sort of all n.
    """
    n = sims.shape[0]
    if k >= n:
        chosen = range(n)
    else:
        kth = np.partition(sims, n - k)[n - k]
        above = np.flatnonzero(sims > kth)
        need = k - above.size
        ties = np.flatnonzero(sims == kth)
        tie_pick = sorted(ties.tolist(), key=lambda i: ids[i])[:need]
        chosen = above.tolist() + tie_pick
    return sorted(chosen, key=lambda i: (-sims[i], ids[i]))


def _unit_rows(mat: np.ndarray, ids: list[str]) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise PlanError(f"zero-norm embedding for utterance {ids[bad[0]]!r}")
    return mat / norms[:, None]


def _row_dots(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Per-row dot products with a row-uniform accumulation order.

    BLAS gemv rounds block-remainder rows differently, so bitwise-equal
    rows can come back off by one ulp and exact similarity ties would not
    survive. Elementwise multiply plus per-row reduction computes every row
    identically, keeping ties exact for deterministic tie-breaking.
    """
    return (mat * vec).sum(axis=1)


def top_k(target_emb, candidates, k: int, excluded=frozenset()) -> list[str]:
    """The k eligible candidates most cosine-similar to target_emb.

    Returns utt_ids ordered by descending similarity, ties broken by
    ascending utt_id; saturates to all eligible candidates when k exceeds
    the pool.
    """
    if k < 1:
        raise PlanError(f"top_k requires K >= 1, got {k}")
    elig = [(u, v) for u, v in candidates if u not in excluded]
    if not elig:
        return []
    ids = [u for u, _ in elig]
    mat = np.asarray([np.asarray(v, dtype=np.float64) for _, v in elig])
    target = np.asarray(target_emb, dtype=np.float64)
    if mat.shape[1] != target.shape[0]:
        raise PlanError(f"top_k: dimension mismatch {mat.shape[1]} vs {target.shape[0]}")
    tnorm = np.linalg.norm(target)
    if tnorm == 0.0:
        raise PlanError("top_k: zero-norm target embedding")
    sims = np.clip(_row_dots(_unit_rows(mat, ids), target / tnorm), -1.0, 1.0)
    return [ids[i] for i in _select_best(sims, ids, k)]


class _EligibilityIndex:
    """Per-target excluded source positions over the canonical source order."""

    def __init__(self, sources: list[UtteranceRecord]):
        order = sorted(range(len(sources)), key=lambda i: sources[i].utt_id)
        self.records = [sources[i] for i in order]
        self.ids = [r.utt_id for r in self.records]
        self.by_speaker: dict[str, list[int]] = {}
        for pos, rec in enumerate(self.records):
            if rec.speaker_id is not None:
                self.by_speaker.setdefault(rec.speaker_id, []).append(pos)

    def __len__(self) -> int:
        return len(self.records)

    def excluded_positions(self, target: UtteranceRecord) -> list[int]:
        excluded: set[int] = set()
        pos = bisect_left(self.ids, target.utt_id)
        if pos < len(self.ids) and self.ids[pos] == target.utt_id:
            excluded.add(pos)
        if target.speaker_id is not None:
            excluded.update(self.by_speaker.get(target.speaker_id, ()))
        return sorted(excluded)


def _jobs_for_target(target: UtteranceRecord, source_ids: list[str], chosen: list[int]) -> list[ConversionJob]:
    jobs = []
    for k_idx, pos in enumerate(chosen):
        pid = pseudo_utt_id(target.utt_id, k_idx)
        jobs.append(
            ConversionJob(
                job_id=pid,
                target_utt=target.utt_id,
                source_utt=source_ids[pos],
                assigned_speaker=target.speaker_id,
                k_index=k_idx,
                pseudo_utt_id=pid,
            )
        )
    return jobs


def plan_rs(scenario: Scenario, k: int, seed: int) -> AugmentationPlan:
    """VCA-RS: per target, K distinct eligible sources drawn uniformly.

    Each target samples from its own sub-stream keyed by (seed, target
    utt_id), so the plan does not depend on target iteration order.
    """
    if k < 1:
        raise PlanError(f"generation coefficient K must be >= 1, got {k}")
    index = _EligibilityIndex(scenario.sources)
    all_jobs: list[ConversionJob] = []
    for target in scenario.targets:
        excluded = index.excluded_positions(target)
        n_eligible = len(index) - len(excluded)
        if n_eligible < k:
            raise PlanError(
                f"target {target.utt_id!r}: eligible pool {n_eligible} < K={k}"
            )
        rng = substream(seed, target.utt_id)
        ranks = sample_without_replacement(rng, n_eligible, k)
        chosen = [_rank_to_position(r, excluded) for r in ranks]
        all_jobs.extend(_jobs_for_target(target, index.ids, chosen))
    all_jobs.sort(key=lambda j: (j.target_utt, j.k_index))
    plan = AugmentationPlan(strategy=STRATEGY_RS, k=k, jobs=all_jobs, seed=seed)
    plan.validate(scenario)
    return plan


def _rank_to_position(rank: int, excluded_sorted: list[int]) -> int:
    """Map a rank within the eligible sub-list to a position in the full list."""
    pos = rank
    for e in excluded_sorted:
        if e <= pos:
            pos += 1
        else:
            break
    return pos


def plan_nn(
    scenario: Scenario,
    k: int,
    phi_store: EmbeddingStore,
    min_similarity: float | None = None,
    phi_tag: str = "identity",
    threads: int = 1,
) -> AugmentationPlan:
    """VCA-NN: per target, the K most cosine-similar eligible sources.

    Similarities are measured in the space of phi_store (the stage-1 model's
    embeddings); k_index follows descending similarity. Fully deterministic:
    ties break by ascending utt_id and no randomness is involved.
    """
    if k < 1:
        raise PlanError(f"generation coefficient K must be >= 1, got {k}")
    index = _EligibilityIndex(scenario.sources)
    for rec in list(scenario.targets) + index.records:
        if rec.utt_id not in phi_store:
            raise PlanError(f"missing embedding for utterance {rec.utt_id!r}")
    src_mat = _unit_rows(phi_store.matrix(index.ids), index.ids)

    def handle(target: UtteranceRecord) -> list[ConversionJob]:
        tvec = phi_store.get(target.utt_id)
        tnorm = np.linalg.norm(tvec)
        if tnorm == 0.0:
            raise PlanError(f"zero-norm embedding for utterance {target.utt_id!r}")
        sims = np.clip(_row_dots(src_mat, tvec / tnorm), -1.0, 1.0)
        excluded = index.excluded_positions(target)
        if excluded:
            sims[excluded] = -np.inf
        if min_similarity is not None:
            sims = np.where(sims >= min_similarity, sims, -np.inf)
        n_eligible = int(np.count_nonzero(sims > -np.inf))
        if n_eligible < k:
            raise PlanError(
                f"target {target.utt_id!r}: eligible pool {n_eligible} < K={k}"
            )
        chosen = _select_best(sims, index.ids, k)
        return _jobs_for_target(target, index.ids, chosen)

    if threads > 1 and len(scenario.targets) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            job_lists = list(pool.map(handle, scenario.targets))
    else:
        job_lists = [handle(t) for t in scenario.targets]
    all_jobs = [job for jobs in job_lists for job in jobs]
    all_jobs.sort(key=lambda j: (j.target_utt, j.k_index))
    plan = AugmentationPlan(strategy=STRATEGY_NN, k=k, jobs=all_jobs, phi_tag=phi_tag)
    plan.validate(scenario)
    return plan


def _header_obj(plan: AugmentationPlan) -> dict:
    return {
        "version": PLAN_FORMAT_VERSION,
        "strategy": plan.strategy,
        "K": plan.k,
        "seed": plan.seed,
        "phi_tag": plan.phi_tag,
    }


def _job_obj(job: ConversionJob) -> dict:
    return {
        "job_id": job.job_id,
        "target_utt": job.target_utt,
        "source_utt": job.source_utt,
        "assigned_speaker": job.assigned_speaker,
        "k_index": job.k_index,
        "pseudo_utt_id": job.pseudo_utt_id,
    }


def write_plan(plan: AugmentationPlan, path: str | Path) -> None:
    """Plan file: one header line, then one job per line in canonical order."""
    plan.validate()
    lines = [json.dumps(_header_obj(plan))]
    lines.extend(json.dumps(_job_obj(job)) for job in plan.jobs)
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_plan(path: str | Path) -> AugmentationPlan:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise PlanError(f"{path}: empty plan file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise PlanError(f"{path}: line 1: invalid JSON ({exc.msg})") from None
    if not isinstance(header, dict) or "strategy" not in header:
        raise PlanError(f"{path}: first line is not a plan header")
    if header.get("version") != PLAN_FORMAT_VERSION:
        raise PlanError(f"{path}: unsupported plan version {header.get('version')!r}")
    jobs = []
    allowed = set(JOB_KEYS) | set(JOB_AUDIO_KEYS)
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PlanError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
        missing = [key for key in JOB_KEYS if key not in obj]
        extra = sorted(set(obj) - allowed)
        if missing or extra:
            raise PlanError(
                f"{path}: line {lineno}: missing keys {missing}, unexpected keys {extra}"
            )
        jobs.append(ConversionJob(**{key: obj[key] for key in JOB_KEYS}))
    plan = AugmentationPlan(
        strategy=header["strategy"],
        k=header["K"],
        jobs=jobs,
        seed=header.get("seed"),
        phi_tag=header.get("phi_tag"),
    )
    plan.validate()
    return plan
