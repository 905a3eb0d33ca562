"""Score vectors, information matrices, and identifiability checks for
categorical targets observed through a known conditional.

Conventions.  The class distribution is treated in its raw K-coordinate
form (all K probabilities as free coordinates, not K-1).  The score of
an outcome is the gradient of its log-probability in those coordinates:

    direct   : score(z)[i] = [z == i] / p[i]
    indirect : score(y)[i] = M[y][i] / q[y],   q = M p

and the information matrices are the uncentered second moments of the
score under the respective outcome distribution:

    direct   : diag(1 / p[i])
    indirect : [I]_{i1,i2} = sum_j M[j][i1] M[j][i2] / q[j]

In these coordinates the score's mean is the all-ones vector (each
column of M sums to one), not zero, and the diagonal of the inverse of
the direct information is exactly p[i].  The difference direct-minus-
indirect is always positive semidefinite and always annihilates p, so
its smallest eigenvalue sits at zero up to rounding.

Boundary distributions are rejected: every formula here divides by the
class probabilities or by outcome marginals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroObservationProbability, ZeroProbability
from .transition import SimplexVector, TransitionMatrix

INTERIOR_MIN = 1e-12
DEFAULT_RANK_TOL = 1e-9


def _interior(class_probs: SimplexVector) -> np.ndarray:
    p = class_probs.probs
    if np.any(p < INTERIOR_MIN):
        i = int(np.argmin(p))
        raise ZeroProbability(
            f"class probability p[{i}] = {p[i]!r} is below {INTERIOR_MIN:g}; "
            "information formulas need an interior distribution"
        )
    return p


def score_direct(z: int, class_probs: SimplexVector) -> np.ndarray:
    """Gradient of log p[z] in raw coordinates: 1/p[z] at position z."""
    p = _interior(class_probs)
    if not 0 <= z < p.size:
        raise ZeroProbability(f"class index {z} outside 0..{p.size - 1}")
    s = np.zeros(p.size)
    s[z] = 1.0 / p[z]
    return s


def score_indirect(y: int, class_probs: SimplexVector, m: TransitionMatrix) -> np.ndarray:
    """Gradient of log q[y] in raw coordinates: row y of M over q[y]."""
    p = _interior(class_probs)
    row = m.entries[y]
    q_y = float(row @ p)
    if q_y <= 0.0:
        raise ZeroObservationProbability(
            f"outcome {y} has zero marginal probability under this distribution"
        )
    return row / q_y


def fisher_direct(class_probs: SimplexVector) -> np.ndarray:
    """Information of the direct observation: diag(1/p)."""
    p = _interior(class_probs)
    return np.diag(1.0 / p)


def fisher_indirect(class_probs: SimplexVector, m: TransitionMatrix) -> np.ndarray:
    """Information of the indirect observation, closed form.

    ``[I]_{i1,i2} = sum_j M[j][i1] M[j][i2] / q[j]`` with all-zero rows
    of M skipped (an outcome that can never occur contributes nothing).
    A zero marginal on a row that does carry mass is an error; it cannot
    happen for interior distributions.
    """
    p = _interior(class_probs)
    q = m.entries @ p
    live = m.entries.any(axis=1)
    dead_marginal = live & (q <= 0.0)
    if np.any(dead_marginal):
        j = int(np.argmax(dead_marginal))
        raise ZeroObservationProbability(
            f"outcome {j} has zero marginal probability but nonzero transition mass"
        )
    rows = m.entries[live]
    info = rows.T @ (rows / q[live][:, None])
    return 0.5 * (info + info.T)


def fisher_bruteforce(class_probs: SimplexVector, m: TransitionMatrix) -> np.ndarray:
    """Information by direct enumeration of all outcomes.

    The exact expectation ``sum_j q[j] * s_j s_j^T`` over the finite
    outcome space, built from score_indirect one outcome at a time.
    Independent of the closed form above; used as its oracle.
    """
    p = _interior(class_probs)
    q = m.entries @ p
    k = p.size
    info = np.zeros((k, k))
    for j in range(m.n_y):
        if not m.entries[j].any():
            continue  # structurally impossible outcome, zero weight
        s = score_indirect(j, class_probs, m)
        info += q[j] * np.outer(s, s)
    return info


def asymptotic_variance(info: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Diagonal of the inverse information, or all-infinite when singular.

    Invertibility is judged by singular values: the matrix counts as
    invertible when ``sigma_min > rank_tol * sigma_max``.  Singularity is
    a flagged result (infinite variances), not an error: it is how a
    non-identifiable supervision type shows up.
    """
    a = np.asarray(info, dtype=float)
    a = 0.5 * (a + a.T)
    k = a.shape[0]
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] <= 0.0 or sv[-1] <= rank_tol * sv[0]:
        return np.full(k, np.inf)
    return np.diag(np.linalg.inv(a)).copy()


@dataclass(frozen=True)
class IdentifiabilityVerdict:
    """Rank decision for a transition matrix, with its evidence."""

    identifiable: bool
    rank: int
    n_z: int
    singular_values: np.ndarray
    reason: str

    def to_dict(self) -> dict:
        return {
            "identifiable": self.identifiable,
            "rank": self.rank,
            "n_z": self.n_z,
            "singular_values": [float(s) for s in self.singular_values],
            "reason": self.reason,
        }


def check_identifiability(
    m: TransitionMatrix, rank_tol: float = DEFAULT_RANK_TOL
) -> IdentifiabilityVerdict:
    """Whether distinct class distributions stay distinguishable after
    passing through M.

    Because every column of M sums to one, any kernel vector of M has
    entries summing to zero, and the difference of two distinct
    probability vectors is exactly such a vector.  Two distributions
    collide downstream of M if and only if that difference lies in the
    kernel, so identifiability is equivalent to full column rank.  Rank
    is judged from singular values with a relative threshold.
    """
    sv = np.linalg.svd(m.entries, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    identifiable = rank == m.n_z
    if identifiable:
        reason = (
            f"full column rank {rank} of {m.n_z}: the matrix has trivial kernel, "
            "so distinct class distributions induce distinct observation "
            "distributions"
        )
    else:
        reason = (
            f"rank {rank} < {m.n_z}: some direction with zero entry-sum lies in "
            "the kernel, so two distinct class distributions map to the same "
            "observation distribution"
        )
    return IdentifiabilityVerdict(
        identifiable=identifiable,
        rank=rank,
        n_z=m.n_z,
        singular_values=sv,
        reason=reason,
    )


def verify_loewner(class_probs: SimplexVector, m: TransitionMatrix) -> float:
    """Smallest eigenvalue of (direct info - indirect info).

    Nonnegative up to rounding for every interior distribution and valid
    matrix: observing through M can only lose information.
    """
    diff = fisher_direct(class_probs) - fisher_indirect(class_probs, m)
    diff = 0.5 * (diff + diff.T)
    return float(np.linalg.eigvalsh(diff)[0])


@dataclass(frozen=True)
class FisherReport:
    """Everything one needs to price a supervision type at one operating
    point: both information matrices, their asymptotic variances, the
    positive-semidefiniteness margin of their difference, and the rank
    verdict for the transition matrix."""

    class_probs: SimplexVector
    transition: TransitionMatrix
    info_direct: np.ndarray
    info_indirect: np.ndarray
    asym_var_direct: np.ndarray
    asym_var_indirect: np.ndarray
    psd_margin: float
    identifiability: IdentifiabilityVerdict

    def to_dict(self) -> dict:
        def _vec(v):
            return [None if np.isinf(x) else float(x) for x in v]

        return {
            "class_probs": [float(x) for x in self.class_probs.probs],
            "transition": self.transition.to_dict(),
            "info_direct": [[float(x) for x in row] for row in self.info_direct],
            "info_indirect": [[float(x) for x in row] for row in self.info_indirect],
            "asym_var_direct": _vec(self.asym_var_direct),
            "asym_var_indirect": _vec(self.asym_var_indirect),
            "asym_var_indirect_finite": bool(np.all(np.isfinite(self.asym_var_indirect))),
            "psd_margin": float(self.psd_margin),
            "identifiability": self.identifiability.to_dict(),
        }


def fisher_report(
    class_probs: SimplexVector,
    m: TransitionMatrix,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> FisherReport:
    """Assemble the full report for one (distribution, matrix) pair."""
    info_z = fisher_direct(class_probs)
    info_y = fisher_indirect(class_probs, m)
    return FisherReport(
        class_probs=class_probs,
        transition=m,
        info_direct=info_z,
        info_indirect=info_y,
        asym_var_direct=asymptotic_variance(info_z, rank_tol),
        asym_var_indirect=asymptotic_variance(info_y, rank_tol),
        psd_margin=verify_loewner(class_probs, m),
        identifiability=check_identifiability(m, rank_tol),
    )
