"""Exception taxonomy for the whole package.

Three families matter to callers (and to the CLI exit-code mapping):

- ``ConfigError``       -> bad experiment configuration / input files (exit 2)
- ``NumericalError``    -> chain admission, spectral or solver failures (exit 3)
- ``StatisticalFailure``-> a seeded Monte Carlo check missed its declared
  threshold (exit 4); the computation itself succeeded.
"""
from __future__ import annotations


class RcltError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RcltError):
    """Experiment configuration is unusable (missing file, bad schema, ...)."""


class NumericalError(RcltError):
    """A chain, spectral or decomposition computation cannot proceed."""


class StatisticalFailure(RcltError):
    """A statistical acceptance threshold declared in the run was exceeded."""


# --- chain admission -------------------------------------------------------

class NotStochastic(NumericalError):
    """A kernel row does not sum to one within the admission tolerance."""


class NotIrreducible(NumericalError):
    """The kernel's support graph is not strongly connected."""


class NotReversible(NumericalError):
    """Detailed balance fails beyond the admission tolerance."""


class Disconnected(NumericalError):
    """A weight graph has an unreachable vertex (or an all-zero row)."""


class NegativeWeight(NumericalError):
    """A weight matrix carries a negative entry."""


class ZeroTargetMass(NumericalError):
    """A Metropolis target puts zero (or negative) mass on some state."""


class InvalidLength(NumericalError):
    """Trajectory length must be a positive integer."""


# --- spectral engine -------------------------------------------------------

class EigenFailure(NumericalError):
    """Symmetric eigensolver failed, or eigenvalues escaped [-1, 1]."""


class FiniteVarianceViolated(NumericalError):
    """Spectral mass sits at 1: the variance of partial sums is superlinear."""


class SingularPoisson(NumericalError):
    """The deflated resolvent solve left a residual above tolerance."""


# --- decomposition ---------------------------------------------------------

class IndexOutOfRange(NumericalError, IndexError):
    """A decomposition term was requested outside the sampled path."""


# --- limit laboratory ------------------------------------------------------

class DegenerateVariance(NumericalError):
    """Asymptotic variance is (numerically) zero; the CLT scaling is void."""


class InvalidReplicas(NumericalError):
    """Replica count must be a positive integer."""


class ExhaustiveTooLarge(NumericalError):
    """Exact path enumeration would exceed the configured budget."""
