"""Exception types shared across the package.

Every error raised by library code derives from :class:`IndirectMLError`,
so callers (including the CLI) can map failures to exit codes without
string matching.
"""


class IndirectMLError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(IndirectMLError):
    """Shapes or index ranges of the inputs do not line up."""


class InvalidSimplex(IndirectMLError):
    """Vector is not a probability distribution within tolerance."""


class NegativeEntry(IndirectMLError):
    """A probability matrix contains an entry below zero."""


class ColumnNotStochastic(IndirectMLError):
    """A column of a conditional-probability matrix does not sum to one."""


class InvalidRate(IndirectMLError):
    """Noise rate outside the admissible range for the class count."""


class InvalidClassCount(IndirectMLError):
    """Constructor needs at least two classes."""


class OverlappingPartition(IndirectMLError):
    """A class index appears in more than one group of a partition."""


class IncompletePartition(IndirectMLError):
    """Partition groups do not cover exactly the set of class indices."""


class InvalidPropensity(IndirectMLError):
    """Labeling propensity outside (0, 1]."""


class ZeroClassPrior(IndirectMLError):
    """Some class has zero implied prior: it appears in no group."""


class InvalidArchitecture(IndirectMLError):
    """Unsupported or degenerate model architecture."""


class NonFiniteInput(IndirectMLError):
    """Feature input contains NaN or infinity."""


class ImpossibleObservation(IndirectMLError):
    """An observed value has probability exactly zero under the
    transition matrix, for every possible true class.  The data are
    inconsistent with the assumed conditional."""


class EmptyCombination(IndirectMLError):
    """No examples selected for a likelihood evaluation."""


class ZeroProbability(IndirectMLError):
    """Class-probability vector touches the simplex boundary where the
    information formulas divide by it."""


class ZeroObservationProbability(IndirectMLError):
    """An observation outcome has zero marginal probability although its
    transition row carries mass."""


class NonPDCovariance(IndirectMLError):
    """Covariance matrix is not positive definite (Cholesky failed)."""


class EmptyGroup(IndirectMLError):
    """A supervision group contains no examples."""


class SchemaMismatch(IndirectMLError):
    """Tabular input does not match the expected schema."""


class NetworkFailure(IndirectMLError):
    """Download failed and no usable cache exists."""


class ChecksumMismatch(IndirectMLError):
    """Cached file content does not match its recorded checksum."""


class NonFiniteGradient(IndirectMLError):
    """Gradient passed to an optimizer step contains NaN or infinity."""


class NonFiniteLoss(IndirectMLError):
    """Training loss became NaN or infinite."""


class UnsupportedDimension(IndirectMLError):
    """Plot type requires two-dimensional features."""


class ConfigError(IndirectMLError):
    """Experiment configuration is missing keys or holds invalid values."""
