"""Shared exception types."""


class DataError(Exception):
    """Input data violates a format or consistency requirement."""


class WavFormatError(DataError):
    """Malformed or unsupported WAV file."""


class InterchangeError(DataError):
    """Malformed embedding interchange file."""


class TrialError(DataError):
    """Trial references an unknown speaker or test utterance."""
