"""Column-stochastic conditional-probability matrices and simplex vectors.

Every weak-supervision type handled by this package reduces to one
object: the conditional probability of the observed signal given the
true class, stored as a matrix whose column ``i`` is the distribution of
the observation when the true class is ``i``.  Columns therefore sum to
one.  Constructors for the standard supervision types live here, along
with the marginalization ``obs_probs = M @ class_probs``.

Zero entries are stored exactly as zero.  Complementary and coarse
matrices are structurally sparse, and downstream log-space code relies
on those zeros being exact; flushing them to epsilon would corrupt both
the likelihood and the identifiability analysis.

All values are immutable after construction and all operations are pure,
so everything here is safe to share between threads.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ColumnNotStochastic,
    DimensionMismatch,
    IncompletePartition,
    InvalidClassCount,
    InvalidPropensity,
    InvalidRate,
    InvalidSimplex,
    NegativeEntry,
    OverlappingPartition,
    ZeroClassPrior,
)

# Sum tolerance at construction; a looser one after floating arithmetic,
# where accumulation error grows with the class count.
CONSTRUCTION_TOL = 1e-12
ARITHMETIC_TOL = 1e-10


class SimplexVector:
    """Probability vector: nonnegative entries summing to one.

    Houses class probabilities, observation marginals, class priors and
    per-group label proportions alike.
    """

    __slots__ = ("probs",)

    def __init__(self, probs, *, tol: float = CONSTRUCTION_TOL):
        arr = np.array(probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionMismatch(
                f"simplex vector must be 1-D and non-empty, got shape {arr.shape}"
            )
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvalidSimplex(f"entries must be finite and >= 0, got {arr!r}")
        total = float(arr.sum())
        if abs(total - 1.0) > tol:
            raise InvalidSimplex(f"entries sum to {total!r}, not 1 within {tol:g}")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SimplexVector is immutable")

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, i) -> float:
        return float(self.probs[i])

    def __repr__(self) -> str:
        return f"SimplexVector({self.probs.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplexVector) and np.array_equal(
            self.probs, other.probs
        )

    @classmethod
    def uniform(cls, k: int) -> "SimplexVector":
        return cls(np.full(k, 1.0 / k))


class TransitionMatrix:
    """Conditional probability of the observation given the true class.

    ``entries[j, i]`` is the probability of observing outcome ``j`` when
    the true class is ``i``; each column is a distribution over the
    ``n_y`` outcomes.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 2:
            raise DimensionMismatch(
                f"need at least 1 outcome and 2 classes, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def __setattr__(self, name, value):
        raise AttributeError("TransitionMatrix is immutable")

    @property
    def n_y(self) -> int:
        """Number of possible indirect-observation outcomes."""
        return self.entries.shape[0]

    @property
    def n_z(self) -> int:
        """Number of true-target classes."""
        return self.entries.shape[1]

    def __repr__(self) -> str:
        return f"TransitionMatrix({self.entries.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, TransitionMatrix) and np.array_equal(
            self.entries, other.entries
        )

    def log_entries(self) -> np.ndarray:
        """Elementwise log with exact zeros mapped to -inf."""
        with np.errstate(divide="ignore"):
            return np.log(self.entries)

    def to_dict(self) -> dict:
        return {
            "n_y": self.n_y,
            "n_z": self.n_z,
            "rows": [list(map(float, row)) for row in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionMatrix":
        m = cls(d["rows"])
        if m.n_y != int(d["n_y"]) or m.n_z != int(d["n_z"]):
            raise DimensionMismatch(
                f"declared shape ({d['n_y']}, {d['n_z']}) does not match "
                f"rows of shape ({m.n_y}, {m.n_z})"
            )
        validate(m)
        return m


def validate(m: TransitionMatrix, tol: float = CONSTRUCTION_TOL) -> None:
    """Check the column-stochastic invariants, raising on violation.

    Raises NegativeEntry for entries below zero and ColumnNotStochastic
    (naming the offending column and its sum) for column sums that leave
    ``1 +/- tol``.
    """
    neg = np.argwhere(m.entries < 0)
    if neg.size:
        j, i = map(int, neg[0])
        raise NegativeEntry(f"entry [{j}][{i}] = {m.entries[j, i]!r} is negative")
    sums = m.entries.sum(axis=0)
    bad = np.argwhere(np.abs(sums - 1.0) > tol)
    if bad.size:
        i = int(bad[0][0])
        raise ColumnNotStochastic(
            f"column {i} sums to {sums[i]!r}, not 1 within {tol:g}"
        )


def identity(k: int) -> TransitionMatrix:
    """Direct observation: the signal equals the true class."""
    if k < 2:
        raise InvalidClassCount(f"need k >= 2 classes, got {k}")
    return TransitionMatrix(np.eye(k))


def class_conditional_noise(k: int, noise_rate: float) -> TransitionMatrix:
    """Symmetric label noise: flip to each other class with equal odds.

    The true label survives with probability ``1 - noise_rate``; the
    rest of the mass splits evenly over the other ``k - 1`` classes.
    Requires ``0 <= noise_rate < (k - 1) / k`` so the diagonal stays the
    (weakly) dominant entry.
    """
    if k < 2:
        raise InvalidClassCount(f"need k >= 2 classes, got {k}")
    limit = (k - 1) / k
    if not (0.0 <= noise_rate < limit):
        raise InvalidRate(
            f"noise rate must lie in [0, {limit!r}) for k={k}, got {noise_rate!r}"
        )
    m = np.full((k, k), noise_rate / (k - 1))
    np.fill_diagonal(m, 1.0 - noise_rate)
    out = TransitionMatrix(m)
    validate(out)
    return out


def uniform_complementary(k: int) -> TransitionMatrix:
    """Observation names one class the example does NOT belong to.

    Zero on the diagonal, ``1 / (k - 1)`` everywhere else.
    """
    if k < 2:
        raise InvalidClassCount(f"need k >= 2 classes, got {k}")
    m = np.full((k, k), 1.0 / (k - 1))
    np.fill_diagonal(m, 0.0)
    out = TransitionMatrix(m)
    validate(out)
    return out


def coarse_partition(k: int, partition: Sequence[Iterable[int]]) -> TransitionMatrix:
    """Observation is the super-class: which group the class falls in.

    ``partition`` lists disjoint, non-empty sets of class indices that
    together cover ``{0..k-1}``.  The result is a deterministic 0/1
    matrix with one row per group.
    """
    groups = [sorted(int(i) for i in g) for g in partition]
    seen: set[int] = set()
    for gi, g in enumerate(groups):
        if not g:
            raise IncompletePartition(f"group {gi} is empty")
        dup = seen.intersection(g)
        if dup:
            raise OverlappingPartition(
                f"class {min(dup)} appears in more than one group"
            )
        seen.update(g)
    if seen != set(range(k)):
        missing = sorted(set(range(k)) - seen)
        extra = sorted(seen - set(range(k)))
        raise IncompletePartition(
            f"union of groups must equal 0..{k - 1}; "
            f"missing {missing}, out of range {extra}"
        )
    m = np.zeros((len(groups), k))
    for j, g in enumerate(groups):
        m[j, g] = 1.0
    out = TransitionMatrix(m)
    validate(out)
    return out


def pu_censoring(labeling_propensity: float) -> TransitionMatrix:
    """Positive-vs-unlabeled supervision in the censoring setting.

    From one i.i.d. sample, each positive is labeled with probability
    ``labeling_propensity``; negatives are never labeled.  Classes are
    ordered (positive, negative) and outcomes (labeled-positive,
    unlabeled).
    """
    c = float(labeling_propensity)
    if not (0.0 < c <= 1.0):
        raise InvalidPropensity(f"labeling propensity must lie in (0, 1], got {c!r}")
    out = TransitionMatrix([[c, 0.0], [1.0 - c, 1.0]])
    validate(out)
    return out


def llp_from_proportions(
    proportions: Sequence, group_priors
) -> TransitionMatrix:
    """Label-proportion supervision converted to a conditional matrix.

    Given the class composition of each group (``proportions[j]`` is the
    distribution of the true class within group ``j``) and the group
    frequencies, inverts to the conditional probability of the group
    given the class:

        entries[j][i] = proportions[j][i] * prior[j] / class_prior[i]

    where ``class_prior[i] = sum_j proportions[j][i] * prior[j]``.
    A class appearing in no group has zero implied prior and is
    unlearnable from these groups; that raises ZeroClassPrior.  Columns
    are renormalized when rounding drift stays within ARITHMETIC_TOL and
    rejected beyond it, so badly inconsistent inputs cannot be silently
    corrected.
    """
    props = [
        p if isinstance(p, SimplexVector) else SimplexVector(p) for p in proportions
    ]
    priors = (
        group_priors
        if isinstance(group_priors, SimplexVector)
        else SimplexVector(group_priors)
    )
    if not props:
        raise DimensionMismatch("need at least one group")
    k = len(props[0])
    if any(len(p) != k for p in props):
        raise DimensionMismatch("all group proportions must have equal length")
    if len(priors) != len(props):
        raise DimensionMismatch(
            f"{len(props)} groups but {len(priors)} group priors"
        )
    p_given_g = np.stack([p.probs for p in props])  # (n_groups, k)
    joint = p_given_g * priors.probs[:, None]  # p(class, group)
    class_prior = joint.sum(axis=0)
    dead = np.argwhere(class_prior == 0.0)
    if dead.size:
        raise ZeroClassPrior(
            f"class {int(dead[0][0])} appears in no group and cannot be learned"
        )
    entries = joint / class_prior[None, :]
    sums = entries.sum(axis=0)
    drift = np.max(np.abs(sums - 1.0))
    if drift > ARITHMETIC_TOL:
        i = int(np.argmax(np.abs(sums - 1.0)))
        raise ColumnNotStochastic(
            f"column {i} sums to {sums[i]!r} after inversion; "
            f"drift {drift:g} exceeds {ARITHMETIC_TOL:g}"
        )
    entries = entries / sums[None, :]
    out = TransitionMatrix(entries)
    validate(out)
    return out


def apply(m: TransitionMatrix, class_probs: SimplexVector) -> SimplexVector:
    """Marginalize the class distribution through the conditional.

    Returns the observation distribution with entries
    ``sum_i entries[j][i] * class_probs[i]``.
    """
    if len(class_probs) != m.n_z:
        raise DimensionMismatch(
            f"class distribution has {len(class_probs)} entries, matrix has "
            f"{m.n_z} classes"
        )
    return SimplexVector(m.entries @ class_probs.probs, tol=ARITHMETIC_TOL)
