"""Utterance records and JSON Lines manifest I/O.

A manifest is UTF-8 JSON Lines, one object per line, with exactly the keys
utt_id, speaker_id, audio_path, origin, source_utt, target_utt, k_index.
Absent optional values are serialized as null.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .errors import ManifestError

ORIGIN_REAL = "real"
ORIGIN_PSEUDO = "pseudo"

MANIFEST_KEYS = (
    "utt_id",
    "speaker_id",
    "audio_path",
    "origin",
    "source_utt",
    "target_utt",
    "k_index",
)


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: identity, optional label, origin, and provenance.

    Real utterances carry no provenance; pseudo utterances carry all of
    source_utt, target_utt, and k_index.
    """

    utt_id: str
    speaker_id: str | None = None
    audio_path: str | None = None
    origin: str = ORIGIN_REAL
    source_utt: str | None = None
    target_utt: str | None = None
    k_index: int | None = None

    def validate(self) -> None:
        if not isinstance(self.utt_id, str) or not self.utt_id:
            raise ManifestError(f"utt_id must be a non-empty string, got {self.utt_id!r}")
        if self.origin not in (ORIGIN_REAL, ORIGIN_PSEUDO):
            raise ManifestError(f"record {self.utt_id!r}: origin must be 'real' or 'pseudo', got {self.origin!r}")
        provenance = (self.source_utt, self.target_utt, self.k_index)
        if self.origin == ORIGIN_PSEUDO:
            if any(v is None for v in provenance):
                raise ManifestError(
                    f"pseudo record {self.utt_id!r} must carry source_utt, target_utt, and k_index"
                )
            if not isinstance(self.k_index, int) or isinstance(self.k_index, bool) or self.k_index < 0:
                raise ManifestError(f"record {self.utt_id!r}: k_index must be a non-negative integer")
        else:
            if any(v is not None for v in provenance):
                raise ManifestError(
                    f"real record {self.utt_id!r} must not carry source_utt, target_utt, or k_index"
                )
        for field in ("speaker_id", "audio_path", "source_utt", "target_utt"):
            value = getattr(self, field)
            if value is not None and not isinstance(value, str):
                raise ManifestError(f"record {self.utt_id!r}: {field} must be a string or null")

    def to_json_obj(self) -> dict:
        return {
            "utt_id": self.utt_id,
            "speaker_id": self.speaker_id,
            "audio_path": self.audio_path,
            "origin": self.origin,
            "source_utt": self.source_utt,
            "target_utt": self.target_utt,
            "k_index": self.k_index,
        }

    def strip_label(self) -> "UtteranceRecord":
        return replace(self, speaker_id=None)


def record_from_obj(obj: dict, where: str = "record") -> UtteranceRecord:
    """Build a validated record from a parsed manifest object."""
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    keys = set(obj)
    expected = set(MANIFEST_KEYS)
    if keys != expected:
        missing = sorted(expected - keys)
        extra = sorted(keys - expected)
        detail = []
        if missing:
            detail.append(f"missing keys {missing}")
        if extra:
            detail.append(f"unexpected keys {extra}")
        raise ManifestError(f"{where}: {'; '.join(detail)}")
    rec = UtteranceRecord(**{k: obj[k] for k in MANIFEST_KEYS})
    try:
        rec.validate()
    except ManifestError as exc:
        raise ManifestError(f"{where}: {exc}") from None
    return rec


def load_manifest(path: str | Path) -> list[UtteranceRecord]:
    """Read a JSONL manifest, preserving file order.

    Raises ManifestError naming the offending line for malformed JSON,
    schema violations, and duplicate utt_ids.
    """
    records: list[UtteranceRecord] = []
    seen: dict[str, int] = {}
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            raise ManifestError(f"{path}: line {lineno}: blank line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
        rec = record_from_obj(obj, where=f"{path}: line {lineno}")
        if rec.utt_id in seen:
            raise ManifestError(
                f"{path}: line {lineno}: duplicate utt_id {rec.utt_id!r} "
                f"(first seen on line {seen[rec.utt_id]})"
            )
        seen[rec.utt_id] = lineno
        records.append(rec)
    return records


def save_manifest(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    """Write records as JSONL in the given order, atomically."""
    lines = []
    for rec in records:
        rec.validate()
        lines.append(json.dumps(rec.to_json_obj()))
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    """Write to a temp file in the target directory, then rename over path."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
