"""First-order optimizers, learning-rate schedules, and the training loop.

Three update rules over the flat parameter vector:

    gd            : w <- w - lr * g
    sgd_momentum  : v <- mu * v + g + wd * w ;  w <- w - lr * v
    adam          : bias-corrected moment estimates, epsilon 1e-8

Weight decay enters as a plain l2 gradient term (not decoupled).  Mini-
batches are formed by seeded shuffling without replacement each epoch;
batch_size 0 means one full-batch step per epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionMismatch, NonFiniteGradient, NonFiniteLoss
from .model import ClassifierParams
from .objective import LossAndGrad
from .seeding import substream

_KINDS = ("gd", "sgd_momentum", "adam")


@dataclass(frozen=True)
class ConstantSchedule:
    kind: str = "constant"

    def to_dict(self) -> dict:
        return {"kind": "constant"}


@dataclass(frozen=True)
class ExpDecaySchedule:
    """Multiply the base rate by ``rate`` once per epoch."""

    rate: float
    kind: str = "exp_decay"

    def to_dict(self) -> dict:
        return {"kind": "exp_decay", "rate": self.rate}


@dataclass(frozen=True)
class WarmupExpSchedule:
    """Linear ramp from 0 to ``peak_lr`` over ``warmup_epochs``, then
    exponential decay from the peak."""

    warmup_epochs: int
    peak_lr: float
    decay_rate: float
    kind: str = "warmup_exp"

    def to_dict(self) -> dict:
        return {
            "kind": "warmup_exp",
            "warmup_epochs": self.warmup_epochs,
            "peak_lr": self.peak_lr,
            "decay_rate": self.decay_rate,
        }


def schedule_from_dict(d: dict):
    kind = d.get("kind", "constant")
    if kind == "constant":
        return ConstantSchedule()
    if kind == "exp_decay":
        return ExpDecaySchedule(rate=float(d["rate"]))
    if kind == "warmup_exp":
        return WarmupExpSchedule(
            warmup_epochs=int(d["warmup_epochs"]),
            peak_lr=float(d["peak_lr"]),
            decay_rate=float(d["decay_rate"]),
        )
    raise ConfigError(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    learning_rate: float
    epochs: int
    momentum: float = 0.9
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    schedule: object = field(default_factory=ConstantSchedule)
    batch_size: int = 0  # 0 = full batch
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"optimizer kind must be one of {_KINDS}, got {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum!r}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay!r}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs!r}")
        if self.batch_size < 0:
            raise ConfigError(f"batch_size must be >= 0, got {self.batch_size!r}")
        if isinstance(self.schedule, ExpDecaySchedule) and not 0 < self.schedule.rate <= 1:
            raise ConfigError(f"decay rate must lie in (0, 1], got {self.schedule.rate!r}")
        if isinstance(self.schedule, WarmupExpSchedule) and not 0 < self.schedule.decay_rate <= 1:
            raise ConfigError(
                f"decay rate must lie in (0, 1], got {self.schedule.decay_rate!r}"
            )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "schedule": self.schedule.to_dict(),
            "batch_size": self.batch_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        try:
            return cls(
                kind=d["kind"],
                learning_rate=float(d["learning_rate"]),
                epochs=int(d["epochs"]),
                momentum=float(d.get("momentum", 0.9)),
                weight_decay=float(d.get("weight_decay", 0.0)),
                beta1=float(d.get("beta1", 0.9)),
                beta2=float(d.get("beta2", 0.999)),
                eps=float(d.get("eps", 1e-8)),
                schedule=schedule_from_dict(d.get("schedule", {"kind": "constant"})),
                batch_size=int(d.get("batch_size", 0)),
                seed=int(d.get("seed", 0)),
            )
        except KeyError as e:
            raise ConfigError(f"optimizer config missing key {e.args[0]!r}") from e


class OptimizerState:
    """Per-run mutable buffers for one parameter vector."""

    def __init__(self, config: OptimizerConfig, n_params: int):
        self.config = config
        self.n_params = n_params
        self.t = 0
        if config.kind == "sgd_momentum":
            self.velocity = np.zeros(n_params)
        elif config.kind == "adam":
            self.m = np.zeros(n_params)
            self.v = np.zeros(n_params)


def init_state(config: OptimizerConfig, n_params: int) -> OptimizerState:
    return OptimizerState(config, n_params)


def step(state: OptimizerState, params: np.ndarray, grad: np.ndarray, lr: float | None = None) -> np.ndarray:
    """One update; returns the new parameter vector, mutating the state."""
    cfg = state.config
    w = np.asarray(params, dtype=float)
    g = np.asarray(grad, dtype=float)
    if w.shape != (state.n_params,) or g.shape != (state.n_params,):
        raise DimensionMismatch(
            f"params {w.shape} / grad {g.shape} do not match state size {state.n_params}"
        )
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("gradient contains NaN or infinity")
    if lr is None:
        lr = cfg.learning_rate
    if cfg.weight_decay:
        g = g + cfg.weight_decay * w
    state.t += 1
    if cfg.kind == "gd":
        return w - lr * g
    if cfg.kind == "sgd_momentum":
        state.velocity = cfg.momentum * state.velocity + g
        return w - lr * state.velocity
    # adam
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = state.m / (1.0 - cfg.beta1**state.t)
    v_hat = state.v / (1.0 - cfg.beta2**state.t)
    return w - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def schedule_lr(
    config: OptimizerConfig,
    epoch: int,
    iteration_within_epoch: int = 0,
    steps_per_epoch: int = 1,
) -> float:
    """Learning rate for a given position in the run."""
    sched = config.schedule
    if isinstance(sched, ConstantSchedule):
        return config.learning_rate
    if isinstance(sched, ExpDecaySchedule):
        return config.learning_rate * sched.rate**epoch
    if isinstance(sched, WarmupExpSchedule):
        if epoch < sched.warmup_epochs:
            done = epoch * steps_per_epoch + iteration_within_epoch
            return sched.peak_lr * done / (sched.warmup_epochs * steps_per_epoch)
        return sched.peak_lr * sched.decay_rate ** (epoch - sched.warmup_epochs)
    raise ConfigError(f"unknown schedule {sched!r}")


@dataclass
class TrainResult:
    params: ClassifierParams
    epoch_losses: list[float]
    n_iterations: int


def train(
    params: ClassifierParams,
    objective: Callable[[ClassifierParams, np.ndarray], LossAndGrad],
    n_examples: int,
    config: OptimizerConfig,
) -> TrainResult:
    """Run the configured epochs of (mini-)batch updates.

    ``objective(params, indices)`` must return the loss and gradient for
    the given example indices.  The loss history records the mean loss
    per epoch, weighted by batch size.  Deterministic given the seed.
    """
    if n_examples < 1:
        raise ConfigError(f"need n_examples >= 1, got {n_examples}")
    w = params.flat.copy()
    state = init_state(config, w.size)
    losses: list[float] = []
    iterations = 0
    full = config.batch_size == 0 or config.batch_size >= n_examples
    steps_per_epoch = 1 if full else int(np.ceil(n_examples / config.batch_size))
    for epoch in range(config.epochs):
        if full:
            batches = [np.arange(n_examples)]
        else:
            order = substream(config.seed, "batch-shuffle", epoch).permutation(n_examples)
            batches = [
                order[i : i + config.batch_size]
                for i in range(0, n_examples, config.batch_size)
            ]
        epoch_loss = 0.0
        for it, batch in enumerate(batches):
            current = params.with_flat(w)
            out = objective(current, batch)
            if not np.isfinite(out.loss):
                raise NonFiniteLoss(
                    f"loss became {out.loss!r} at epoch {epoch}, iteration {iterations}"
                )
            lr = schedule_lr(config, epoch, it, steps_per_epoch)
            w = step(state, w, out.grad, lr)
            epoch_loss += out.loss * out.n_examples
            iterations += 1
        losses.append(epoch_loss / n_examples)
    return TrainResult(params=params.with_flat(w), epoch_losses=losses, n_iterations=iterations)
