"""Bridge configuration shared by the extract and convert commands."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import BridgeError


@dataclass(frozen=True)
class BridgeConfig:
    embedder: str = "stub"
    vc: str = "stub"
    device: str = "cpu"
    batch_size: int = 16
    audio_root: str | None = None
    on_error: str = "abort"

    def validate(self) -> None:
        if self.batch_size < 1:
            raise BridgeError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.on_error not in ("abort", "skip"):
            raise BridgeError(f"on_error must be 'abort' or 'skip', got {self.on_error!r}")
        if self.audio_root is not None and not Path(self.audio_root).is_dir():
            raise BridgeError(f"audio root {self.audio_root!r} is not a directory")

    def resolve_audio(self, audio_path: str) -> Path:
        path = Path(audio_path)
        if path.is_absolute() or self.audio_root is None:
            return path
        return Path(self.audio_root) / path

    def default_dim(self) -> int:
        """Dim used for an empty batch, from the embedder options."""
        _, _, option_str = self.embedder.partition(":")
        for item in filter(None, option_str.split(",")):
            key, _, value = item.partition("=")
            if key == "dim":
                return int(value)
        return 24
