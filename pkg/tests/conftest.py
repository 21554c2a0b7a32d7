import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vca.records import UtteranceRecord
from vca.store import EmbeddingStore


@pytest.fixture
def tiny_store():
    store = EmbeddingStore(2)
    store.add("t1", [1.0, 0.0])
    store.add("s1", [0.9, 0.1])
    store.add("s2", [0.0, 1.0])
    store.add("s3", [-1.0, 0.0])
    return store


def make_corpus(n_speakers: int, utts_per_speaker: int, dim: int, seed: int = 0):
    """Labelled synthetic corpus with clustered per-speaker embeddings."""
    rng = np.random.default_rng(seed)
    records = []
    store = EmbeddingStore(dim)
    for i in range(n_speakers):
        spk = f"p{i:04d}"
        center = rng.standard_normal(dim)
        center /= np.linalg.norm(center)
        for j in range(utts_per_speaker):
            utt = f"{spk}-u{j:02d}"
            vec = center + 0.3 * rng.standard_normal(dim)
            records.append(UtteranceRecord(utt_id=utt, speaker_id=spk))
            store.add(utt, vec)
    return records, store
