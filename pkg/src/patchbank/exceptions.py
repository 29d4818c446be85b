"""Exception types shared across the package."""


class PatchBankError(Exception):
    """Base class for errors raised by patchbank."""


class FormatError(PatchBankError):
    """A byte stream or text file does not conform to an on-disk format."""


class DataError(PatchBankError):
    """Well-formed data violates a consistency requirement (non-finite
    values, mismatched lengths, impossible labels)."""


class GenerationError(PatchBankError):
    """Synthetic-defect generation exhausted its retry budget."""


class PlacementError(PatchBankError):
    """A defect cannot be placed at, or was given, an invalid offset."""
