"""Exception hierarchy for the toolkit.

Everything raised on bad data derives from :class:`DataError`, which the CLI
maps to exit code 2. Usage problems (bad flags) never reach this hierarchy.
"""


class VcaError(Exception):
    """Base class for all toolkit errors."""


class DataError(VcaError):
    """Invalid or inconsistent input data."""


class ManifestError(DataError):
    """Malformed utterance manifest or record."""


class StoreError(DataError):
    """Malformed or inconsistent embedding store / VCAE file."""


class ScenarioError(DataError):
    """Scenario construction or serialization failure."""


class PlanError(DataError):
    """Augmentation plan construction or validation failure."""


class ConversionError(DataError):
    """Conversion backend failure."""


class TrainError(DataError):
    """Classifier training failure."""


class MetricError(DataError):
    """Trial scoring or metric computation failure."""
