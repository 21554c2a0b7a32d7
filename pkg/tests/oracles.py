"""Independent brute-force oracles used by the test suite.

These deliberately avoid the library's own algorithms: top-K selection is a
full sort over per-pair cosines, and the metric oracles sweep every
candidate threshold with direct counting. They exist to cross-check the
production paths, so keep them dumb.
"""

from __future__ import annotations

import numpy as np


def brute_cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    value = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return max(-1.0, min(1.0, value))


def brute_top_k(target, candidates, k, excluded=frozenset()) -> list[str]:
    """Full sort of all eligible candidates by (descending cosine, id)."""
    scored = [
        (brute_cosine(target, vec), utt_id)
        for utt_id, vec in candidates
        if utt_id not in excluded
    ]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [utt_id for _, utt_id in scored[:k]]


def _rates_at(threshold: float, tar: np.ndarray, non: np.ndarray) -> tuple[float, float]:
    p_miss = float(np.count_nonzero(tar < threshold)) / len(tar)
    p_fa = float(np.count_nonzero(non >= threshold)) / len(non)
    return p_miss, p_fa


def brute_eer(scores, labels) -> tuple[float, float]:
    """Sweep every candidate threshold, then locate the miss/false-alarm
    crossing, interpolating between the adjacent operating points."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    tar = s[y == 1]
    non = s[y == 0]
    thresholds = [-np.inf] + sorted(set(s.tolist())) + [np.inf]
    points = [_rates_at(t, tar, non) for t in thresholds]
    prev_t, (prev_miss, prev_fa) = thresholds[0], points[0]
    for t, (p_miss, p_fa) in zip(thresholds, points):
        diff = p_miss - p_fa
        if diff == 0.0:
            return p_miss, t
        if diff > 0.0:
            frac = (prev_fa - prev_miss) / ((p_miss - prev_miss) - (p_fa - prev_fa))
            value = prev_miss + frac * (p_miss - prev_miss)
            if np.isfinite(prev_t) and np.isfinite(t):
                threshold = prev_t + frac * (t - prev_t)
            else:
                threshold = prev_t if np.isfinite(prev_t) else t
            return value, threshold
        prev_t, prev_miss, prev_fa = t, p_miss, p_fa
    raise AssertionError("no crossing found")


def brute_min_dcf(scores, labels, p_target=0.01, c_miss=1.0, c_fa=1.0) -> float:
    """Minimum normalized cost over all scores, midpoints, and sentinels.

    Midpoints make the accept-at-or-above vs accept-above convention
    question moot: they evaluate every achievable operating point.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    tar = np.sort(s[y == 1])
    non = np.sort(s[y == 0])
    distinct = sorted(set(s.tolist()))
    mids = [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    candidates = np.array([-np.inf] + distinct + mids + [np.inf])
    # O(n^2) counting, vectorized in chunks to stay within memory.
    norm = min(c_miss * p_target, c_fa * (1.0 - p_target))
    best = np.inf
    for start in range(0, len(candidates), 1024):
        block = candidates[start : start + 1024, None]
        p_miss = np.count_nonzero(tar[None, :] < block, axis=1) / len(tar)
        p_fa = np.count_nonzero(non[None, :] >= block, axis=1) / len(non)
        costs = (c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa) / norm
        best = min(best, float(costs.min()))
    return best
