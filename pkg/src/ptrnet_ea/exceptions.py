"""Exception hierarchy shared by every module."""


class PtrNetEAError(ValueError):
    """Base class for all library errors."""


class InvalidDimensionError(PtrNetEAError):
    """Node count, coordinate shape or batch dimensionality is unusable."""


class InvalidTourError(PtrNetEAError):
    """A tour is not a permutation matching its instance."""


class InstanceSizeError(PtrNetEAError):
    """Instance too large for an exact (enumerating) solver."""


class DatasetFormatError(PtrNetEAError):
    """Malformed or inconsistent dataset file or dataset object."""


class LayoutError(PtrNetEAError):
    """Parameter vector does not match the network configuration."""


class NumericError(PtrNetEAError, ArithmeticError):
    """A forward pass produced non-finite activations."""


class ConfigError(PtrNetEAError):
    """Invalid network, search or run configuration."""


class CheckpointError(PtrNetEAError):
    """Corrupt, incompatible or unresumable checkpoint."""


class ReportError(PtrNetEAError):
    """Report inputs are missing or disagree on schema."""
