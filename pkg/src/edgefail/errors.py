"""Exception hierarchy shared across the package."""


class EdgefailError(Exception):
    """Base class for all package-specific errors."""


class StructuralError(EdgefailError):
    """Shapes or dimensions of inputs do not line up."""


class InfeasibleError(EdgefailError):
    """A placement or mapping problem has no feasible solution."""


class NoCandidateError(EdgefailError):
    """No healthy node hosts the requested service instance."""


class SaturationError(EdgefailError):
    """Arrival rate at or beyond the queue-model pole (twice the instance capacity)."""


class IngestError(EdgefailError):
    """A trace file could not be turned into any usable requests."""


class ConcurrentAttackError(EdgefailError):
    """A second attack was injected while one is still active."""


class ConfigError(EdgefailError):
    """Invalid experiment configuration; message carries key/line context."""
