"""Synthetic data generation and dataset serialization.

Generation follows the factorization feature -> true class -> indirect
observation: the class is drawn first, features from the class's
Gaussian component, and the observation from the class's column of the
transition matrix, independently of the features.  Relabeling a sample
therefore never touches its feature marginal.

All draws go through named substreams of the master seed (see
``seeding``), one stream per operation, so any experiment is
bit-reproducible from its seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyGroup, NonPDCovariance
from .objective import WeakDataset
from .seeding import substream
from .transition import SimplexVector, TransitionMatrix, validate


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Mixture of Gaussian components; the true class is the component."""

    means: np.ndarray  # (k, d)
    covariances: np.ndarray  # (k, d, d)
    weights: SimplexVector

    def __post_init__(self):
        means = np.array(self.means, dtype=float)
        covs = np.array(self.covariances, dtype=float)
        if means.ndim != 2:
            raise DimensionMismatch(f"means must be (k, d), got {means.shape}")
        k, d = means.shape
        if covs.shape != (k, d, d):
            raise DimensionMismatch(
                f"covariances must be ({k}, {d}, {d}), got {covs.shape}"
            )
        if len(self.weights) != k:
            raise DimensionMismatch(
                f"{k} components but {len(self.weights)} weights"
            )
        if not np.allclose(covs, np.swapaxes(covs, 1, 2)):
            raise NonPDCovariance("covariance matrices must be symmetric")
        means.setflags(write=False)
        covs.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "means": [list(map(float, r)) for r in self.means],
            "covariances": [[list(map(float, r)) for r in c] for c in self.covariances],
            "weights": [float(w) for w in self.weights.probs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixtureSpec":
        return cls(
            means=np.asarray(d["means"], dtype=float),
            covariances=np.asarray(d["covariances"], dtype=float),
            weights=SimplexVector(d["weights"]),
        )


@dataclass(frozen=True)
class LabeledSample:
    """Features with their true targets (the fully-supervised view)."""

    features: np.ndarray
    true_targets: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        z = np.array(self.true_targets, dtype=np.int64)
        if x.ndim != 2 or z.ndim != 1 or z.size != x.shape[0]:
            raise DimensionMismatch(
                f"features {x.shape} do not pair with targets {z.shape}"
            )
        if z.size and z.min() < 0:
            raise DimensionMismatch("targets must be nonnegative class indices")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "true_targets", z)

    def __len__(self) -> int:
        return self.features.shape[0]


def default_mixture() -> GaussianMixtureSpec:
    """The fixed 3-component, 2-D task used by the synthetic presets."""
    return GaussianMixtureSpec(
        means=np.array([[0.0, 2.0], [-2.0, -1.0], [2.0, -1.0]]),
        covariances=np.stack([np.eye(2)] * 3),
        weights=SimplexVector.uniform(3),
    )


def default_llp_transition() -> TransitionMatrix:
    """The fixed 4-group conditional used to relabel the synthetic task.

    Chosen with full column rank so the group marginals pin down the
    class distribution; each of the first three groups leans on one
    class and the fourth mixes all three.
    """
    m = TransitionMatrix(
        [
            [0.6, 0.1, 0.1],
            [0.2, 0.6, 0.1],
            [0.1, 0.2, 0.6],
            [0.1, 0.1, 0.2],
        ]
    )
    validate(m)
    return m


def ring_mixture(k: int = 10, radius: float = 6.0) -> GaussianMixtureSpec:
    """k unit-covariance components spread evenly on a circle."""
    angles = 2.0 * np.pi * np.arange(k) / k
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return GaussianMixtureSpec(
        means=means,
        covariances=np.stack([np.eye(2)] * k),
        weights=SimplexVector.uniform(k),
    )


def sample_mixture(spec: GaussianMixtureSpec, n: int, seed: int) -> LabeledSample:
    """Draw n labeled points: class from the weights, features from the
    class's component via its Cholesky factor."""
    if n < 1:
        raise DimensionMismatch(f"need n >= 1, got {n}")
    try:
        chols = np.stack([np.linalg.cholesky(c) for c in spec.covariances])
    except np.linalg.LinAlgError as e:
        raise NonPDCovariance(f"covariance is not positive definite: {e}") from e
    rng = substream(seed, "sample-mixture")
    cum = np.cumsum(spec.weights.probs)
    cum[-1] = 1.0
    u = rng.random(n)
    z = np.searchsorted(cum, u, side="right").astype(np.int64)
    noise = rng.standard_normal((n, spec.dim))
    x = np.empty((n, spec.dim))
    for comp in range(spec.n_components):
        rows = z == comp
        x[rows] = spec.means[comp] + noise[rows] @ chols[comp].T
    return LabeledSample(features=x, true_targets=z)


def sample_indirect(true_targets, m: TransitionMatrix, seed: int) -> np.ndarray:
    """Draw one observation per target from its column of the matrix."""
    z = np.asarray(true_targets, dtype=np.int64)
    if z.ndim != 1:
        raise DimensionMismatch(f"targets must be 1-D, got shape {z.shape}")
    if z.size and (z.min() < 0 or z.max() >= m.n_z):
        raise DimensionMismatch(
            f"target outside 0..{m.n_z - 1} for this transition matrix"
        )
    rng = substream(seed, "sample-indirect")
    u = rng.random(z.size)
    cum = np.cumsum(m.entries, axis=0)  # (n_y, n_z), one CDF per class
    cum[-1, :] = 1.0
    per_example = cum[:, z].T  # (n, n_y)
    y = (u[:, None] >= per_example).sum(axis=1).astype(np.int64)
    return y


def relabel(
    sample: LabeledSample, m: TransitionMatrix, seed: int, name: str = ""
) -> WeakDataset:
    """Replace true targets by indirect observations drawn through M.

    The features are shared with the input sample, so the feature
    marginal of the weak dataset matches the direct one by construction.
    """
    y = sample_indirect(sample.true_targets, m, seed)
    return WeakDataset(sample.features, y, m, name=name)


def direct_dataset(sample: LabeledSample, n_classes: int, name: str = "direct") -> WeakDataset:
    """View a labeled sample as a weak dataset with identity transition."""
    from .transition import identity

    return WeakDataset(sample.features, sample.true_targets, identity(n_classes), name=name)


def estimate_llp_statistics(
    true_targets,
    groups,
    n_classes: int | None = None,
    n_groups: int | None = None,
) -> tuple[list[SimplexVector], SimplexVector]:
    """Empirical class composition of each group and group frequencies.

    Feeding the result to ``transition.llp_from_proportions`` yields the
    label-proportion transition matrix.
    """
    z = np.asarray(true_targets, dtype=np.int64)
    g = np.asarray(groups, dtype=np.int64)
    if z.shape != g.shape or z.ndim != 1:
        raise DimensionMismatch("targets and groups must be equal-length 1-D vectors")
    if z.size == 0:
        raise EmptyGroup("no examples given")
    k = int(n_classes) if n_classes is not None else int(z.max()) + 1
    n_g = int(n_groups) if n_groups is not None else int(g.max()) + 1
    proportions: list[SimplexVector] = []
    counts = np.zeros(n_g)
    for j in range(n_g):
        members = z[g == j]
        if members.size == 0:
            raise EmptyGroup(f"group {j} has no examples")
        counts[j] = members.size
        freq = np.bincount(members, minlength=k).astype(float) / members.size
        proportions.append(SimplexVector(freq))
    priors = SimplexVector(counts / counts.sum())
    return proportions, priors


def mixture_posterior(spec: GaussianMixtureSpec, x) -> np.ndarray:
    """Class probabilities given features under the generating mixture."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.dim:
        raise DimensionMismatch(
            f"features have dim {x.shape[1]}, mixture has dim {spec.dim}"
        )
    k, d = spec.n_components, spec.dim
    log_w = np.log(spec.weights.probs)
    log_lik = np.empty((x.shape[0], k))
    for comp in range(k):
        try:
            chol = np.linalg.cholesky(spec.covariances[comp])
        except np.linalg.LinAlgError as e:
            raise NonPDCovariance(f"covariance is not positive definite: {e}") from e
        diff = x - spec.means[comp]
        sol = np.linalg.solve(chol, diff.T).T
        maha = np.sum(sol * sol, axis=1)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        log_lik[:, comp] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
    joint = log_lik + log_w
    joint -= joint.max(axis=1, keepdims=True)
    post = np.exp(joint)
    post /= post.sum(axis=1, keepdims=True)
    return post


# ---------------------------------------------------------------------------
# Serialization: CSV with feature columns f0..f{d-1}, observation column y,
# optional true-target column z, plus a JSON sidecar recording the
# transition matrix and provenance.
# ---------------------------------------------------------------------------


def write_dataset_csv(path, features, observations=None, true_targets=None) -> str:
    """Write a dataset CSV; returns the sha256 of the written bytes."""
    x = np.asarray(features, dtype=float)
    cols = [f"f{i}" for i in range(x.shape[1])]
    parts = []
    if observations is not None:
        cols.append("y")
    if true_targets is not None:
        cols.append("z")
    lines = [",".join(cols)]
    obs = None if observations is None else np.asarray(observations, dtype=np.int64)
    tgt = None if true_targets is None else np.asarray(true_targets, dtype=np.int64)
    for i in range(x.shape[0]):
        row = [repr(float(v)) for v in x[i]]
        if obs is not None:
            row.append(str(int(obs[i])))
        if tgt is not None:
            row.append(str(int(tgt[i])))
        lines.append(",".join(row))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    Path(path).write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def read_dataset_csv(path):
    """Read a dataset CSV; returns (features, observations|None, targets|None)."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    feat_cols = [c for c in header if c.startswith("f")]
    has_y = "y" in header
    has_z = "z" in header
    rows = [line.split(",") for line in text[1:]]
    x = np.array([[float(v) for v in r[: len(feat_cols)]] for r in rows])
    y = None
    z = None
    if has_y:
        yi = header.index("y")
        y = np.array([int(r[yi]) for r in rows], dtype=np.int64)
    if has_z:
        zi = header.index("z")
        z = np.array([int(r[zi]) for r in rows], dtype=np.int64)
    return x, y, z


def write_sidecar(path, m: TransitionMatrix | None, provenance: dict) -> None:
    doc = {"transition": None if m is None else m.to_dict(), "provenance": provenance}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_sidecar(path) -> tuple[TransitionMatrix | None, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    m = None if doc.get("transition") is None else TransitionMatrix.from_dict(doc["transition"])
    return m, doc.get("provenance", {})


def load_weak_dataset(csv_path, sidecar_path, name: str = "") -> WeakDataset:
    """Rebuild a weak dataset from its CSV and sidecar."""
    x, y, _ = read_dataset_csv(csv_path)
    if y is None:
        raise DimensionMismatch(f"{csv_path} has no observation column 'y'")
    m, _ = read_sidecar(sidecar_path)
    if m is None:
        raise DimensionMismatch(f"{sidecar_path} carries no transition matrix")
    return WeakDataset(x, y, m, name=name or str(csv_path))
