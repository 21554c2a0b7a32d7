"""Audio-side adapters for the VCA toolkit: embedding extraction into VCAE
files and conversion-job execution against stub or external VC systems,
communicating with the toolkit exclusively through its file formats."""

from .config import BridgeConfig
from .errors import BridgeError
from .extract import extract_embeddings
from .vc import run_vc_jobs
from .vcae import read_vcae, write_vcae

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "extract_embeddings",
    "read_vcae",
    "run_vc_jobs",
    "write_vcae",
]
