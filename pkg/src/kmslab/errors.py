"""Exception hierarchy.

Two families matter operationally: ``InvariantViolation`` covers every check
that a mathematical property failed to hold (detailed balance, positivity,
monotonicity, ...), ``ConvergenceError`` covers numerical refinement that did
not settle (quadrature, step halving).  The CLI maps these onto distinct exit
codes, so keep new errors inside one of the two trees unless they really are
configuration problems.
"""


class KmslabError(Exception):
    """Base class for everything raised on purpose by this package."""


# ---------- configuration / input problems ----------

class ConfigError(KmslabError):
    """Malformed request: bad spec dict, missing key, out-of-domain argument."""


class InvalidSpec(ConfigError):
    pass


class DomainError(ConfigError):
    """Scalar function applied outside its domain (log of <= 0, etc.)."""


class DimensionMismatch(ConfigError):
    pass


class IndexOutOfRange(ConfigError):
    pass


class KappaBelowOne(ConfigError):
    """Gaussian filter width parameter must satisfy kappa >= 1."""


class EmptyResults(ConfigError):
    pass


class NotCommuting(ConfigError):
    """Hamiltonian terms fail to commute where a commuting model is required."""


class ConfigParseError(ConfigError):
    """Experiment config file is unreadable, incomplete, or ill-typed."""


# ---------- invariant violations ----------

class InvariantViolation(KmslabError):
    """A structural property that must hold numerically does not."""


class NonHermitianInput(InvariantViolation):
    pass


class NegativeWeight(InvariantViolation):
    pass


class NotDetailedBalanced(InvariantViolation):
    """Hermitization residual of the generator exceeds tolerance."""


class NonPositiveCoeffMatrix(InvariantViolation):
    """A coefficient matrix over frequency pairs has an eigenvalue < -1e-10."""


class KMSViolation(InvariantViolation):
    """Bath function fails ghat(nu) = ghat(-nu) * exp(-beta nu / 2)."""


class KMSConditionViolation(InvariantViolation):
    """Rate function fails gamma(-nu) = exp(beta nu) * gamma(nu)."""


class FrequencyOutOfBathRange(InvariantViolation):
    pass


class CPViolation(InvariantViolation):
    pass


class ClusterAmbiguity(InvariantViolation):
    """Two Bohr frequency clusters sit closer than 10x the merge tolerance."""


class NonUniqueFixedPoint(InvariantViolation):
    pass


class SingularState(InvariantViolation):
    pass


class NotPrimitive(InvariantViolation):
    """Zero eigenvalue of the generator is degenerate (non-fatal in sweeps)."""


class MonotonicityViolation(InvariantViolation):
    pass


class BoundViolation(InvariantViolation):
    pass


class ExperimentFailed(InvariantViolation):
    """A run produced results that break the experiment's own invariants;
    carries a machine-readable detail dict for the violation record."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = dict(details or {})


# ---------- convergence failures ----------

class ConvergenceError(KmslabError):
    """Refinement loop hit its cap before reaching the requested accuracy."""


class NotConverged(ConvergenceError):
    pass


class QuadratureDivergence(ConvergenceError):
    """Doubling the node count changed the result by more than tolerance."""


class QuadratureNotConverged(ConvergenceError):
    pass
