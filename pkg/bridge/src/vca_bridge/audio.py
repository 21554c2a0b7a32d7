"""WAV reading and the deterministic spectral features behind the stub
embedder.

The stub embedder computes mean log-mel energies with plain numpy: frame
the signal, window, take the power spectrum, pool through a triangular mel
filterbank, and average over frames. It is not a speaker model, but it is
deterministic, content-dependent, and produces stable per-speaker clusters
on tonal fixtures, which is all the protocol tests need.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import BridgeError

FRAME_LENGTH = 512
HOP_LENGTH = 256


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Load a PCM WAV as mono float64 in [-1, 1] plus its sample rate."""
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise BridgeError(f"{path}: unreadable audio ({exc})") from None
    if width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 1:
        samples = (np.frombuffer(frames, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 4:
        samples = np.frombuffer(frames, dtype="<i4").astype(np.float64) / 2147483648.0
    else:
        raise BridgeError(f"{path}: unsupported sample width {width}")
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    if samples.size == 0:
        raise BridgeError(f"{path}: empty audio")
    return samples, rate


def write_wav(path: str | Path, samples: np.ndarray, rate: int) -> None:
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    data = (pcm * 32767.0).astype("<i2").tobytes()
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(data)


def _mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    n_bins = n_fft // 2 + 1
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(rate / 2.0), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((n_fft + 1) * hz_points / rate).astype(int)
    bins = np.clip(bins, 0, n_bins - 1)
    bank = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, center, right = bins[m], bins[m + 1], bins[m + 2]
        center = max(center, left + 1)
        right = max(right, center + 1)
        for k in range(left, min(center, n_bins)):
            bank[m, k] = (k - left) / (center - left)
        for k in range(center, min(right, n_bins)):
            bank[m, k] = (right - k) / (right - center)
    return bank


def mean_log_mel(samples: np.ndarray, rate: int, n_mels: int) -> np.ndarray:
    """Mean over frames of log(1 + mel-band energy); shape (n_mels,)."""
    if samples.size < FRAME_LENGTH:
        samples = np.pad(samples, (0, FRAME_LENGTH - samples.size))
    n_frames = 1 + (samples.size - FRAME_LENGTH) // HOP_LENGTH
    window = np.hanning(FRAME_LENGTH)
    bank = _mel_filterbank(n_mels, FRAME_LENGTH, rate)
    acc = np.zeros(n_mels)
    for f in range(n_frames):
        frame = samples[f * HOP_LENGTH : f * HOP_LENGTH + FRAME_LENGTH] * window
        power = np.abs(np.fft.rfft(frame)) ** 2
        acc += np.log1p(bank @ power)
    return acc / n_frames
