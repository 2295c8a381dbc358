"""
Exceptions raised across leaklab.

Everything derives from LeakLabError so the CLI can report domain failures
without a traceback.
"""


class LeakLabError(Exception):
    """Base class for all leaklab errors."""
    pass


class ConfigError(LeakLabError):
    """Raised when a config, profile or key file cannot be used."""
    pass


class DegenerateNonceError(LeakLabError):
    """Raised when a nonce yields r = 0 or s = 0 and no fresh nonce source exists."""
    pass


class NonInvertibleError(LeakLabError):
    """Raised when a value that must be a unit modulo n is not."""
    pass


class HnpInstanceError(LeakLabError):
    """Raised when signatures cannot be turned into an HNP instance."""
    pass


class DuplicateSampleError(HnpInstanceError):
    """Raised when two samples share r and msg_hash."""
    pass


class InsufficientSamplesError(LeakLabError):
    """Raised when a stage needs more samples than it was given."""
    pass


class RankDeficiencyError(LeakLabError):
    """Raised when a basis handed to the reducer is not full rank."""
    pass


class NoCandidateRowError(LeakLabError):
    """Raised when no reduced row carries the embedding coordinate."""
    pass


class RetriesExhaustedError(LeakLabError):
    """Raised when every lattice attempt failed to produce a verified key."""
    pass


class BudgetError(LeakLabError):
    """Raised when a signature budget cannot be computed, e.g. for a zero filter yield."""
    pass


class WireFormatError(LeakLabError):
    """Raised when a datagram does not match the signing protocol."""
    pass


class CollectionTimeoutError(LeakLabError):
    """Raised when the remote collector gives up after consecutive timeouts."""
    pass
