"""Exception types shared across the package."""


class FeatexError(Exception):
    """Base class for errors raised by featex."""


class FormatError(FeatexError):
    """A byte stream or text file does not conform to an on-disk format."""


class DataError(FeatexError):
    """Well-formed data violates a consistency requirement (impossible
    labels, unreadable training inputs, empty manifests)."""


class CheckpointError(FeatexError):
    """Backbone weights could not be fetched, read, or matched to the
    requested architecture."""
