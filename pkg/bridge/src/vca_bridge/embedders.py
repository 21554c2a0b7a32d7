"""Embedding extractor registry.

The shipped "stub" extractor needs no model downloads; heavyweight
extractors (speechbrain, transformers, ...) plug in through
register_embedder without becoming install-time dependencies. Output
dimension is probed from the first embedding and must stay constant.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .audio import mean_log_mel, read_wav
from .errors import BridgeError

Embedder = Callable[[str], np.ndarray]

_REGISTRY: dict[str, Callable[[dict], Embedder]] = {}


def register_embedder(name: str, factory: Callable[[dict], Embedder]) -> None:
    _REGISTRY[name] = factory


def _stub_factory(options: dict) -> Embedder:
    dim = int(options.get("dim", 24))
    if dim < 1:
        raise BridgeError(f"stub embedder dim must be >= 1, got {dim}")

    def embed(audio_path: str) -> np.ndarray:
        samples, rate = read_wav(audio_path)
        return mean_log_mel(samples, rate, dim)

    return embed


register_embedder("stub", _stub_factory)


def resolve_embedder(identifier: str) -> Embedder:
    """Build an embedder from an identifier like "stub" or "stub:dim=32"."""
    name, _, option_str = identifier.partition(":")
    options: dict = {}
    for item in filter(None, option_str.split(",")):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise BridgeError(f"bad embedder option {item!r} in {identifier!r}")
        options[key] = value
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise BridgeError(
            f"unknown embedder {name!r} (available: {known}; heavyweight "
            f"extractors can be added with vca_bridge.embedders.register_embedder)"
        )
    return _REGISTRY[name](options)
