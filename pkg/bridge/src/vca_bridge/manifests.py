"""Reading and writing the toolkit's JSONL wire formats.

The bridge talks to the main toolkit exclusively through files: utterance
manifests, emitted conversion-job manifests (plan header + job lines with
endpoint audio paths), and result manifests (pseudo records plus a status
field).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import BridgeError

MANIFEST_KEYS = (
    "utt_id",
    "speaker_id",
    "audio_path",
    "origin",
    "source_utt",
    "target_utt",
    "k_index",
)

JOB_KEYS = ("job_id", "target_utt", "source_utt", "assigned_speaker", "k_index", "pseudo_utt_id")


@dataclass(frozen=True)
class ManifestRecord:
    utt_id: str
    speaker_id: str | None
    audio_path: str | None
    origin: str
    source_utt: str | None
    target_utt: str | None
    k_index: int | None

    def to_json_obj(self) -> dict:
        return {key: getattr(self, key) for key in MANIFEST_KEYS}


@dataclass(frozen=True)
class Job:
    job_id: str
    target_utt: str
    source_utt: str
    assigned_speaker: str
    k_index: int
    pseudo_utt_id: str
    target_audio_path: str | None
    source_audio_path: str | None


def _jsonl_lines(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    records = []
    seen = set()
    for lineno, line in enumerate(_jsonl_lines(path), start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
        missing = [key for key in MANIFEST_KEYS if key not in obj]
        if missing:
            raise BridgeError(f"{path}: line {lineno}: missing keys {missing}")
        rec = ManifestRecord(**{key: obj[key] for key in MANIFEST_KEYS})
        if rec.utt_id in seen:
            raise BridgeError(f"{path}: line {lineno}: duplicate utt_id {rec.utt_id!r}")
        seen.add(rec.utt_id)
        records.append(rec)
    return records


def read_job_manifest(path: str | Path) -> tuple[dict, list[Job]]:
    """Parse an emitted conversion-job manifest: header line plus jobs."""
    lines = _jsonl_lines(path)
    if not lines:
        raise BridgeError(f"{path}: empty job manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise BridgeError(f"{path}: line 1: invalid JSON ({exc.msg})") from None
    if not isinstance(header, dict) or "strategy" not in header:
        raise BridgeError(f"{path}: first line is not a plan header")
    jobs = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
        missing = [key for key in JOB_KEYS if key not in obj]
        if missing:
            raise BridgeError(f"{path}: line {lineno}: missing keys {missing}")
        jobs.append(
            Job(
                **{key: obj[key] for key in JOB_KEYS},
                target_audio_path=obj.get("target_audio_path"),
                source_audio_path=obj.get("source_audio_path"),
            )
        )
    return header, jobs


def write_jsonl(objs: list[dict], path: str | Path) -> None:
    payload = "".join(json.dumps(obj) + "\n" for obj in objs)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload.encode("utf-8"))
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def result_obj(record: ManifestRecord, status: str) -> dict:
    obj = record.to_json_obj()
    obj["status"] = status
    return obj
