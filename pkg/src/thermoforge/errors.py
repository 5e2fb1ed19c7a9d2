"""Exception hierarchy shared by all thermoforge modules.

Every failure mode the CLI reports maps to one of these classes; the CLI
prints ``error: <ClassName>: <message>`` on stderr and exits non-zero.
"""


class ThermoforgeError(Exception):
    """Base class for all package errors."""


# geometry generation
class InfeasibleSpec(ThermoforgeError):
    """The requested shapes cannot fit the grid under the packing bound."""


class RetryExhausted(ThermoforgeError):
    """Rejection sampling ran out of attempts (placement or uniqueness)."""


# linear algebra / solver
class SingularSystem(ThermoforgeError):
    """The assembled system has no interior unknowns."""


class NoConvergence(ThermoforgeError):
    """Iterative solve exhausted its budget; message carries the residual."""


class ConvergenceFailure(ThermoforgeError):
    """The underlying matrix factorization failed to converge."""


# model plumbing
class ShapeMismatch(ThermoforgeError):
    """Input array shape does not match the configured model."""


class BatchTooSmall(ThermoforgeError):
    """Batch SVD needs at least k* columns in training mode."""


class MissingBasis(ThermoforgeError):
    """Latent basis not available (model not trained / frozen yet)."""


class MissingStats(ThermoforgeError):
    """Coefficient statistics not available (model not trained yet)."""


class BasisMismatch(ThermoforgeError):
    """Latent codes refer to different frozen bases."""


class NonFiniteGradient(ThermoforgeError):
    """A gradient contained NaN/Inf; message names the parameter."""


class NonFinite(ThermoforgeError):
    """A loss input or output was NaN/Inf."""


# metrics
class ZeroVariance(ThermoforgeError):
    """Reference is constant; NMSE is undefined."""


class ZeroReference(ThermoforgeError):
    """Reference has zero sup-norm; relative error is undefined."""


class MissingCell(ThermoforgeError):
    """The 2x2 study needs all four encoder/head checkpoints."""


# dataset / checkpoint plumbing
class MissingFields(ThermoforgeError):
    """No solved fields available for the requested samples."""


class MissingCheckpoint(ThermoforgeError):
    """A required checkpoint is absent or unreadable."""


class CacheGridMismatch(ThermoforgeError):
    """Trunk cache was built for a different coordinate grid."""


class EmptyBench(ThermoforgeError):
    """Benchmark invoked with zero samples."""


class ProvenanceMismatch(ThermoforgeError):
    """Artifact hash chain does not match the inputs (use --force to override)."""
