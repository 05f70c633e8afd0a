"""Exception hierarchy shared by all modules."""


class OfwError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(OfwError):
    """Inconsistent or mismatched configuration (moduli, schemes, digests)."""


class ParameterError(OfwError):
    """Parameter outside the supported domain (filter geometry, primes, ranges)."""


class DomainError(OfwError):
    """Value outside the mathematical domain of an operation (e.g. inverse of 0)."""


class ShareError(OfwError):
    """Malformed share set: duplicates, missing parties, wrong scheme."""


class ThresholdError(ShareError):
    """Not enough shares to perform a reconstruction."""


class ProtocolError(OfwError):
    """A multi-party protocol cannot run under the given configuration."""


class RandomnessError(OfwError):
    """Protocol randomness failed repeatedly (e.g. invertible-pair retries exhausted)."""


class DecodeFailure(OfwError):
    """Error-correcting decode could not produce a consistent polynomial."""


class FrameError(OfwError):
    """Wire frame failed to parse (bad magic, version, length or checksum)."""


class ConnectivityError(OfwError):
    """A remote endpoint could not be reached or timed out."""
