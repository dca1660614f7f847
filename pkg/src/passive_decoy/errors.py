"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input value violates its documented domain."""


class ConfigError(ParameterError):
    """A run-configuration document is invalid; message names the field."""


class TruncationError(RuntimeError):
    """Photon-number truncation leaves more tail mass than tolerated.

    Raised when the requested cutoff is too small for the source intensity;
    the fix is a larger cutoff, not a looser tolerance.
    """


class DegenerateSourceError(RuntimeError):
    """The branch distributions are too similar to separate decoy estimates.

    The bound chain divides by differences of cross products of branch
    probabilities; when those fall below numerical resolution (for example
    with a fully factorized source) no decoy information exists.
    """


class NoSinglePhotonYieldError(RuntimeError):
    """No positive single-photon yield could be established from the data.

    Callers computing a key rate should map this to a zero rate instead of
    aborting a batch.
    """


class IngestError(ValueError):
    """A statistics or click-record file failed to parse or validate."""
