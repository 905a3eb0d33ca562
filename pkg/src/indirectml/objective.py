"""Negative log-likelihood of indirect observations, with exact gradients.

The probability of seeing outcome ``y`` for features ``x`` is the class
distribution predicted by the model pushed through the transition
matrix: ``p(y|x) = sum_z M[y][z] * softmax(f(x))[z]``.  The loss is the
mean of ``-log p(y_i|x_i)`` over the batch.

Everything is computed in log space:

    log p(y|x) = logsumexp_z( log M[y][z] + log_softmax(f(x))[z] )

with structural zeros of M entering as -inf and dropping out of the
logsumexp.  No epsilon smoothing: smoothing the matrix would bias the
estimator and hide genuinely impossible observations, which instead
raise ImpossibleObservation.

Multiple supervision sources combine by simple concatenation of their
log-likelihood terms, each observation counting once; there is no
per-source weight to tune.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCombination,
    ImpossibleObservation,
    NonFiniteInput,
)
from .model import ClassifierParams, _backward_batch, _forward_batch, log_softmax
from .transition import TransitionMatrix


class WeakDataset:
    """Features paired with indirect observations and their conditional.

    Several datasets over the same feature space and class count may be
    combined in one likelihood; each keeps its own transition matrix.
    """

    __slots__ = ("features", "observations", "transition", "name")

    def __init__(self, features, observations, transition: TransitionMatrix, name: str = ""):
        # Read-only float inputs (e.g. a sample being relabeled) are
        # shared, not copied: the feature marginal of a weak dataset is
        # the direct sample's by construction.
        x = np.asarray(features, dtype=float)
        if x.flags.writeable:
            x = x.copy()
            x.setflags(write=False)
        y = np.asarray(observations, dtype=np.int64)
        if y.flags.writeable:
            y = y.copy()
            y.setflags(write=False)
        if x.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or y.size != x.shape[0]:
            raise DimensionMismatch(
                f"{x.shape[0]} feature rows but {y.size} observations"
            )
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("features contain NaN or infinity")
        if y.size and (y.min() < 0 or y.max() >= transition.n_y):
            bad = int(y[(y < 0) | (y >= transition.n_y)][0])
            raise DimensionMismatch(
                f"observation {bad} outside 0..{transition.n_y - 1}"
            )
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "observations", y)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "name", str(name))

    def __setattr__(self, name, value):
        raise AttributeError("WeakDataset is immutable")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_z(self) -> int:
        return self.transition.n_z


@dataclass(frozen=True)
class LossAndGrad:
    """Mean negative log-likelihood and its gradient in the flat layout."""

    loss: float
    grad: np.ndarray
    n_examples: int


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp tolerating -inf entries; all -inf rows give -inf."""
    m = np.max(a, axis=1)
    finite = np.isfinite(m)
    out = np.full(a.shape[0], -np.inf)
    if np.any(finite):
        af = a[finite]
        mf = m[finite]
        with np.errstate(invalid="ignore"):
            shifted = af - mf[:, None]
        shifted[~np.isfinite(af)] = -np.inf  # -inf - (-inf) would be NaN
        out[finite] = mf + np.log(np.exp(shifted).sum(axis=1))
    return out


def _normalize_batch(data: WeakDataset, batch_indices) -> np.ndarray:
    if batch_indices is None:
        return np.arange(len(data))
    idx = np.asarray(batch_indices, dtype=np.int64)
    if idx.ndim != 1:
        raise DimensionMismatch(f"batch indices must be 1-D, got shape {idx.shape}")
    if idx.size == 0:
        return idx
    if idx.min() < 0 or idx.max() >= len(data):
        raise DimensionMismatch(
            f"batch index outside 0..{len(data) - 1}"
        )
    # Summation order fixed by sorted index so that shuffled batches
    # produce bit-identical sums.
    return np.sort(idx)


def _nll_sums(params: ClassifierParams, data: WeakDataset, idx: np.ndarray):
    """Sum of -log p(y|x) over `idx`, its gradient, and the count."""
    if data.input_dim != params.input_dim:
        raise DimensionMismatch(
            f"dataset features have dim {data.input_dim}, model wants {params.input_dim}"
        )
    if data.n_z != params.n_classes:
        raise DimensionMismatch(
            f"transition has {data.n_z} classes, model predicts {params.n_classes}"
        )
    x = data.features[idx]
    y = data.observations[idx]
    logits, cache = _forward_batch(params, x)
    ls = log_softmax(logits)
    log_m = data.transition.log_entries()
    with np.errstate(invalid="ignore"):
        terms = log_m[y] + ls  # -inf survives where M is exactly 0
    terms[log_m[y] == -np.inf] = -np.inf
    log_p = _logsumexp_rows(terms)
    impossible = np.argwhere(log_p == -np.inf)
    if impossible.size:
        i = int(impossible[0][0])
        label = data.name or "dataset"
        raise ImpossibleObservation(
            f"{label}: example {int(idx[i])} observed outcome {int(y[i])}, whose "
            f"transition row carries no probability mass for any class"
        )
    # d(-log p)/d logits = softmax - exp(log M[y] + log_softmax - log p)
    probs = np.exp(ls)
    with np.errstate(invalid="ignore"):
        resp = np.exp(terms - log_p[:, None])
    resp[terms == -np.inf] = 0.0
    upstream = probs - resp
    grad = _backward_batch(params, cache, upstream)
    return -float(log_p.sum()), grad, idx.size


def indirect_nll(
    params: ClassifierParams, data: WeakDataset, batch_indices=None
) -> LossAndGrad:
    """Mean negative log-likelihood of the batch under the dataset's
    transition matrix, with the exact analytic gradient.

    With an identity transition this is exactly softmax cross-entropy.
    """
    idx = _normalize_batch(data, batch_indices)
    if idx.size == 0:
        raise EmptyCombination("empty batch")
    loss_sum, grad_sum, n = _nll_sums(params, data, idx)
    return LossAndGrad(loss=loss_sum / n, grad=grad_sum / n, n_examples=n)


def combined_nll(
    params: ClassifierParams,
    datasets: Sequence[WeakDataset],
    batches: Sequence | None = None,
) -> LossAndGrad:
    """Pooled negative log-likelihood over several supervision sources.

    Total over all selected examples divided by the total count: each
    observation contributes one log-likelihood term with weight one, so
    combining sources introduces no extra hyperparameter.
    """
    datasets = list(datasets)
    if not datasets:
        raise EmptyCombination("no datasets given")
    if batches is None:
        batches = [None] * len(datasets)
    if len(batches) != len(datasets):
        raise DimensionMismatch(
            f"{len(datasets)} datasets but {len(batches)} batch specs"
        )
    n_z = datasets[0].n_z
    dim = datasets[0].input_dim
    for d in datasets[1:]:
        if d.n_z != n_z or d.input_dim != dim:
            raise DimensionMismatch(
                "all combined datasets must share the class count and feature dim"
            )
    total_loss = 0.0
    total_grad = np.zeros(params.n_params)
    total_n = 0
    for data, batch in zip(datasets, batches):
        idx = _normalize_batch(data, batch)
        if idx.size == 0:
            continue
        loss_sum, grad_sum, n = _nll_sums(params, data, idx)
        total_loss += loss_sum
        total_grad += grad_sum
        total_n += n
    if total_n == 0:
        raise EmptyCombination("no examples selected across all datasets")
    return LossAndGrad(loss=total_loss / total_n, grad=total_grad / total_n, n_examples=total_n)


def pooled_objective(datasets: Sequence[WeakDataset]):
    """Closure over the concatenated index space of several datasets.

    Returns ``(fn, n_total)`` where ``fn(params, indices)`` evaluates
    ``combined_nll`` on the examples selected by global indices
    (dataset 0 occupies ``0..len0-1``, dataset 1 the next block, and so
    on).  This is the shape the training loop expects.
    """
    datasets = list(datasets)
    if not datasets:
        raise EmptyCombination("no datasets given")
    sizes = [len(d) for d in datasets]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def fn(params: ClassifierParams, indices) -> LossAndGrad:
        idx = np.asarray(indices, dtype=np.int64)
        batches = []
        for s in range(len(datasets)):
            sel = idx[(idx >= offsets[s]) & (idx < offsets[s + 1])] - offsets[s]
            batches.append(sel)
        return combined_nll(params, datasets, batches)

    return fn, int(offsets[-1])
