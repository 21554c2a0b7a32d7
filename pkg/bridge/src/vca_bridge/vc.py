"""Voice-conversion adapters and conversion-job execution.

The "stub" adapter copies the target audio as the pseudo utterance, which
exercises the whole emit -> convert -> ingest protocol without any model.
The "command" adapter shells out per job to an external converter (a real
diffusion-VC wrapper, for instance) via a template with {source}, {target},
and {output} placeholders.
"""

from __future__ import annotations

import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import BridgeConfig
from .embedders import resolve_embedder
from .errors import BridgeError
from .manifests import Job, ManifestRecord, read_job_manifest, result_obj, write_jsonl
from .vcae import write_vcae

STATUS_OK = "ok"


@dataclass
class VcJobsReport:
    n_ok: int = 0
    n_failed: int = 0
    statuses: list[str] = field(default_factory=list)


def _safe_filename(utt_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in utt_id) + ".wav"


def _convert_stub(job: Job, target_audio: Path, source_audio: Path, out_audio: Path) -> None:
    shutil.copyfile(target_audio, out_audio)


def _make_command_converter(template: str):
    if "{output}" not in template:
        raise BridgeError("command VC template must contain {output}")

    def convert(job: Job, target_audio: Path, source_audio: Path, out_audio: Path) -> None:
        command = [
            part.format(source=source_audio, target=target_audio, output=out_audio)
            for part in shlex.split(template)
        ]
        proc = subprocess.run(command, capture_output=True, text=True)
        if proc.returncode != 0 or not out_audio.exists():
            raise BridgeError(f"vc command failed (exit {proc.returncode}): {proc.stderr.strip()[:200]}")

    return convert


def resolve_vc(identifier: str):
    name, _, rest = identifier.partition(":")
    if name == "stub":
        return _convert_stub
    if name == "command":
        if not rest:
            raise BridgeError("command VC needs a template, e.g. command:mytool {source} {target} {output}")
        return _make_command_converter(rest)
    raise BridgeError(f"unknown vc adapter {name!r} (available: stub, command:<template>)")


def run_vc_jobs(
    plan_manifest: str | Path,
    cfg: BridgeConfig,
    out_dir: str | Path,
) -> VcJobsReport:
    """Execute every job in an emitted plan manifest.

    Writes out_dir/audio/<pseudo>.wav per successful job, plus
    results.jsonl (one pseudo record per job with a status field; failures
    keep their provenance) and results.vcae with the pseudo embeddings.
    """
    cfg.validate()
    _, jobs = read_job_manifest(plan_manifest)
    converter = resolve_vc(cfg.vc)
    embedder = resolve_embedder(cfg.embedder)
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    results: list[dict] = []
    entries: dict[str, np.ndarray] = {}
    report = VcJobsReport()
    dim: int | None = None
    for job in jobs:
        status = STATUS_OK
        out_audio = audio_dir / _safe_filename(job.pseudo_utt_id)
        target_audio = cfg.resolve_audio(job.target_audio_path) if job.target_audio_path else None
        source_audio = cfg.resolve_audio(job.source_audio_path) if job.source_audio_path else None
        if source_audio is None or not source_audio.exists():
            status = "failed:missing-source"
        elif target_audio is None or not target_audio.exists():
            status = "failed:missing-target"
        else:
            try:
                converter(job, target_audio, source_audio, out_audio)
                vec = np.asarray(embedder(str(out_audio)), dtype=np.float64)
                if dim is None:
                    dim = int(vec.shape[0])
                elif vec.shape[0] != dim:
                    raise BridgeError(
                        f"embedding dim drifted at {job.pseudo_utt_id!r}: "
                        f"{vec.shape[0]} vs {dim}"
                    )
                entries[job.pseudo_utt_id] = vec
            except BridgeError:
                status = "failed:vc-error"
        record = ManifestRecord(
            utt_id=job.pseudo_utt_id,
            speaker_id=job.assigned_speaker,
            audio_path=str(out_audio) if status == STATUS_OK else None,
            origin="pseudo",
            source_utt=job.source_utt,
            target_utt=job.target_utt,
            k_index=job.k_index,
        )
        results.append(result_obj(record, status))
        report.statuses.append(status)
        if status == STATUS_OK:
            report.n_ok += 1
        else:
            report.n_failed += 1
    if dim is None:
        dim = cfg.default_dim()
    write_jsonl(results, out_dir / "results.jsonl")
    write_vcae(entries, dim, out_dir / "results.vcae")
    return report
