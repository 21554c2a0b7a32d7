import json
import math
import wave
from pathlib import Path

import numpy as np
import pytest


def write_sine_wav(path: Path, freq: float, seconds: float = 0.25, rate: int = 8000,
                   amplitude: float = 0.6, harmonics: int = 2) -> None:
    t = np.arange(int(seconds * rate)) / rate
    signal = np.zeros_like(t)
    for h in range(1, harmonics + 1):
        signal += (amplitude / h) * np.sin(2 * math.pi * freq * h * t)
    pcm = (np.clip(signal, -1, 1) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


def manifest_line(utt_id, speaker_id=None, audio_path=None):
    return {
        "utt_id": utt_id,
        "speaker_id": speaker_id,
        "audio_path": audio_path,
        "origin": "real",
        "source_utt": None,
        "target_utt": None,
        "k_index": None,
    }


@pytest.fixture
def wav_corpus(tmp_path):
    """Small tonal corpus: 4 speakers x 3 utterances, distinct base pitch."""
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir()
    lines = []
    for i in range(4):
        spk = f"spk{i}"
        base = 180.0 + 70.0 * i
        for j in range(3):
            utt = f"{spk}-u{j}"
            wav = audio_dir / f"{utt}.wav"
            write_sine_wav(wav, base + 6.0 * j)
            lines.append(manifest_line(utt, spk, str(wav)))
    manifest = tmp_path / "corpus.jsonl"
    manifest.write_text("".join(json.dumps(l) + "\n" for l in lines))
    return tmp_path, manifest, audio_dir
