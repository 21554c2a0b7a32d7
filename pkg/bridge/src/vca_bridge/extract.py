"""Batch embedding extraction: manifest in, VCAE plus manifest echo out."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import BridgeConfig
from .embedders import resolve_embedder
from .errors import BridgeError
from .manifests import read_manifest, write_jsonl
from .vcae import write_vcae

ON_ERROR_ABORT = "abort"
ON_ERROR_SKIP = "skip"


@dataclass
class ExtractReport:
    n_embedded: int = 0
    skipped: list[dict] = field(default_factory=list)


def extract_embeddings(
    manifest_path: str | Path,
    cfg: BridgeConfig,
    out_embeddings: str | Path,
    out_manifest: str | Path,
    skip_report_path: str | Path | None = None,
) -> ExtractReport:
    """Embed every utterance in the manifest into a VCAE file.

    The manifest echo lists exactly the embedded records (file order).
    Unreadable audio aborts, or is skipped with a per-file report entry
    when cfg.on_error is "skip". Embedding dimension must stay constant
    across the batch.
    """
    records = read_manifest(manifest_path)
    embedder = resolve_embedder(cfg.embedder)
    entries: dict[str, np.ndarray] = {}
    echoed = []
    report = ExtractReport()
    dim: int | None = None
    for rec in records:
        if rec.audio_path is None:
            raise BridgeError(f"record {rec.utt_id!r} has no audio_path")
        audio = cfg.resolve_audio(rec.audio_path)
        try:
            vec = np.asarray(embedder(str(audio)), dtype=np.float64)
        except BridgeError as exc:
            if cfg.on_error == ON_ERROR_SKIP:
                report.skipped.append({"utt_id": rec.utt_id, "audio_path": str(audio), "reason": str(exc)})
                continue
            raise
        if vec.ndim != 1:
            raise BridgeError(f"embedder returned shape {vec.shape} for {rec.utt_id!r}")
        if dim is None:
            dim = int(vec.shape[0])
        elif vec.shape[0] != dim:
            raise BridgeError(
                f"embedding dim drifted: {rec.utt_id!r} has {vec.shape[0]}, batch started at {dim}"
            )
        entries[rec.utt_id] = vec
        echoed.append(rec.to_json_obj())
        report.n_embedded += 1
    if dim is None:
        dim = cfg.default_dim()
    write_vcae(entries, dim, out_embeddings)
    write_jsonl(echoed, out_manifest)
    if skip_report_path is not None:
        write_jsonl(report.skipped, skip_report_path)
    return report
