"""Exception types shared across the toolkit."""


class HedkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(HedkitError):
    """Input violates an operation's preconditions."""


class EmptySegment(HedkitError):
    """A time segment overlaps no analysis frame."""


class FormatError(HedkitError):
    """A file does not match its declared format."""


class UnsupportedFormat(HedkitError):
    """Audio file is not 16-bit PCM mono WAV."""


class OrphanPhone(HedkitError):
    """A phone's midpoint falls inside no word."""


class InvalidSegmentation(HedkitError):
    """Segmentation invariants (ordering, nesting, non-overlap) violated."""


class DimError(HedkitError):
    """Vector/matrix dimensions do not match."""


class ShapeError(HedkitError):
    """Structured shapes (segment counts, matrix sizes) do not match."""


class InvalidTrainingSet(HedkitError):
    """A training class is empty or inconsistent."""


class ConfigError(HedkitError):
    """Configuration is inconsistent with the requested operation."""


class EmptyDataset(HedkitError):
    """Training requires at least one example."""


class PolicyError(HedkitError):
    """Edit policy requires a component that is not attached."""


class ReplayError(HedkitError):
    """An edit log cannot be replayed."""


class UnknownSpeaker(HedkitError):
    """Speaker id absent from the speaker table."""
