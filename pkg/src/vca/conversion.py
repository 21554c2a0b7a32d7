"""Plan execution: synthetic embedding-space conversion and the file-based
bridge to external voice-conversion systems.

The synthetic backend is not a waveform converter. It produces a pseudo
embedding near the target utterance, drifted toward the source and
noised in proportion to source-target mismatch, so that pseudo quality
degrades as the chosen source gets farther from the target. That single
property is what nearest-neighbour selection exploits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConversionError
from .records import (
    ORIGIN_PSEUDO,
    UtteranceRecord,
    atomic_write_text,
    record_from_obj,
    MANIFEST_KEYS,
)
from .selection import AugmentationPlan, ConversionJob, _header_obj, _job_obj
from .seeding import substream
from .store import EmbeddingStore, load_store

BACKEND_SYNTHETIC = "synthetic"
BACKEND_EXTERNAL_EMIT = "external-emit"
BACKEND_EXTERNAL_INGEST = "external-ingest"

RESULT_STATUS_OK = "ok"


@dataclass(frozen=True)
class SyntheticVCParams:
    sigma_base: float = 0.05
    lambda_noise: float = 0.5
    lambda_drift: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        for name in ("sigma_base", "lambda_noise", "lambda_drift"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConversionError(f"{name} must be finite and >= 0, got {value!r}")
        if self.lambda_drift > 1:
            raise ConversionError(f"lambda_drift must lie in [0, 1], got {self.lambda_drift!r}")


@dataclass
class AugmentedCorpus:
    records: list[UtteranceRecord]
    store: EmbeddingStore


def _unit(vec: np.ndarray, utt_id: str) -> np.ndarray:
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ConversionError(f"zero-norm embedding for utterance {utt_id!r}")
    return vec / norm


def convert_synthetic(
    job: ConversionJob, store: EmbeddingStore, params: SyntheticVCParams
) -> tuple[UtteranceRecord, np.ndarray]:
    """Synthesize one pseudo embedding for a conversion job.

    With unit-normalized target t and source s, mismatch d = (1 - cos(s, t)) / 2,
    the output is normalize(t + lambda_drift*d*(s - t) + sigma*g) where
    sigma = sigma_base + lambda_noise*d and g is an isotropic draw from the
    sub-stream keyed by (params.seed, job_id). Deterministic per job.
    """
    params.validate()
    if job.target_utt not in store:
        raise ConversionError(f"missing embedding for target {job.target_utt!r}")
    if job.source_utt not in store:
        raise ConversionError(f"missing embedding for source {job.source_utt!r}")
    t_hat = _unit(store.get(job.target_utt), job.target_utt)
    s_hat = _unit(store.get(job.source_utt), job.source_utt)
    cos_st = float(np.clip(np.dot(s_hat, t_hat), -1.0, 1.0))
    mismatch = (1.0 - cos_st) / 2.0
    sigma = params.sigma_base + params.lambda_noise * mismatch
    g = substream(params.seed, job.job_id).standard_normal(store.dim)
    raw = t_hat + params.lambda_drift * mismatch * (s_hat - t_hat) + sigma * g
    pseudo = _unit(raw, job.pseudo_utt_id)
    record = UtteranceRecord(
        utt_id=job.pseudo_utt_id,
        speaker_id=job.assigned_speaker,
        audio_path=None,
        origin=ORIGIN_PSEUDO,
        source_utt=job.source_utt,
        target_utt=job.target_utt,
        k_index=job.k_index,
    )
    return record, pseudo


def apply_plan(
    plan: AugmentationPlan,
    records: list[UtteranceRecord],
    store: EmbeddingStore,
    backend: str = BACKEND_SYNTHETIC,
    params: SyntheticVCParams | None = None,
    result_manifest: str | Path | None = None,
    result_store: str | Path | None = None,
) -> AugmentedCorpus:
    """Execute a plan and return the original corpus plus all pseudo records.

    The synthetic backend converts in-process; external-ingest merges
    results produced by an outside VC system. Either way the augmented
    corpus holds exactly len(records) + K*|targets| records.
    """
    if backend == BACKEND_SYNTHETIC:
        params = params if params is not None else SyntheticVCParams()
        merged = store.copy()
        pseudo_records = []
        for job in plan.jobs:
            rec, vec = convert_synthetic(job, store, params)
            merged.add(rec.utt_id, vec)
            pseudo_records.append(rec)
        return AugmentedCorpus(records=list(records) + pseudo_records, store=merged)
    if backend == BACKEND_EXTERNAL_INGEST:
        if result_manifest is None or result_store is None:
            raise ConversionError("external-ingest requires result manifest and result store")
        pseudo_records, merged = ingest_external_results(
            result_manifest, result_store, store, plan=plan
        )
        return AugmentedCorpus(records=list(records) + pseudo_records, store=merged)
    raise ConversionError(f"unknown conversion backend {backend!r}")


def emit_external_jobs(
    plan: AugmentationPlan,
    manifest_out: str | Path,
    records: list[UtteranceRecord] | None = None,
) -> None:
    """Write the plan as a job manifest for an external VC system.

    Each job line additionally carries the audio paths of both endpoints
    when the corpus records are supplied and know them; unknown paths are
    null.
    """
    plan.validate()
    paths = {r.utt_id: r.audio_path for r in records} if records else {}
    lines = [json.dumps(_header_obj(plan))]
    for job in plan.jobs:
        obj = _job_obj(job)
        obj["target_audio_path"] = paths.get(job.target_utt)
        obj["source_audio_path"] = paths.get(job.source_utt)
        lines.append(json.dumps(obj))
    atomic_write_text(manifest_out, "".join(line + "\n" for line in lines))


def read_result_manifest(path: str | Path) -> list[tuple[UtteranceRecord, str]]:
    """Parse a result manifest: pseudo records each with a status field."""
    out: list[tuple[UtteranceRecord, str]] = []
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConversionError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ConversionError(f"{path}: line {lineno}: expected a JSON object")
        status = obj.pop("status", RESULT_STATUS_OK)
        missing = [key for key in MANIFEST_KEYS if key not in obj]
        if missing:
            raise ConversionError(f"{path}: line {lineno}: missing keys {missing}")
        rec = record_from_obj(
            {key: obj[key] for key in MANIFEST_KEYS}, where=f"{path}: line {lineno}"
        )
        out.append((rec, status))
    return out


def ingest_external_results(
    result_manifest: str | Path,
    result_store: str | Path,
    base: EmbeddingStore,
    plan: AugmentationPlan | None = None,
) -> tuple[list[UtteranceRecord], EmbeddingStore]:
    """Merge externally produced pseudo embeddings into the base store.

    Only records with status "ok" are ingested. When the originating plan is
    supplied, every result id must match one of its pseudo ids.
    """
    results = read_result_manifest(result_manifest)
    new_store = load_store(result_store)
    if len(new_store) and new_store.dim != base.dim:
        raise ConversionError(
            f"result store dim {new_store.dim} does not match base dim {base.dim}"
        )
    known_pseudo = {job.pseudo_utt_id for job in plan.jobs} if plan is not None else None
    merged = base.copy()
    pseudo_records = []
    for rec, status in results:
        if status != RESULT_STATUS_OK:
            continue
        if rec.origin != ORIGIN_PSEUDO:
            raise ConversionError(f"result record {rec.utt_id!r} is not a pseudo record")
        if known_pseudo is not None and rec.utt_id not in known_pseudo:
            raise ConversionError(f"unknown pseudo id {rec.utt_id!r} (not in the emitted plan)")
        if rec.utt_id not in new_store:
            raise ConversionError(f"missing embedding for pseudo record {rec.utt_id!r}")
        merged.add(rec.utt_id, new_store.get(rec.utt_id))
        pseudo_records.append(rec)
    return pseudo_records, merged
