"""Minibatch training loops: momentum SGD, AdamW, and Adam without bias correction.

Each step samples a minibatch index uniformly from fixed contiguous batches,
so a (spec, seed) pair fully determines the run. The optimizers follow their
pseudocode exactly:

* SGD accumulates m <- beta1 * m + g with no dampening.
* AdamW applies the decoupled decay w <- w - eta * wd * w before the Adam
  step and bias-corrects with beta^t powers (t starting at 1).
* The no-bias-correction Adam starts from m = g0, v = g0 o g0, so its first
  update moves every coordinate with nonzero gradient by exactly eta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, NumericalError
from ..seeding import derive_rng
from .data import Dataset

OPTIMIZERS = ("sgd", "adamw", "adam_nobias")


@dataclass(frozen=True)
class TrainerSpec:
    optimizer: str
    eta: float
    steps: int
    batch_size: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    eval_every: int = 0  # 0: evaluate full loss/accuracy only at the end

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise InputError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if self.eta <= 0 or self.steps < 1 or self.batch_size < 1:
            raise InputError("eta must be positive, steps and batch_size at least 1")


@dataclass
class TrainMetrics:
    batch_losses: np.ndarray  # one per step
    eval_steps: list[int] = field(default_factory=list)
    eval_losses: list[float] = field(default_factory=list)
    eval_accuracies: list[float] = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.eval_accuracies[-1]

    @property
    def final_loss(self) -> float:
        return self.eval_losses[-1]


def train(model, data: Dataset, spec: TrainerSpec, w0: np.ndarray | None = None,
          checkpoint_steps=()):
    """Run the configured optimizer; returns (final w, metrics[, checkpoints]).

    ``checkpoint_steps`` requests parameter snapshots at those step counts
    (0 = initialization); when nonempty a third dict {step: w} is returned.
    """
    if spec.batch_size > data.n:
        raise InputError(f"batch size {spec.batch_size} exceeds dataset size {data.n}")
    if w0 is None:
        w = model.init_params(derive_rng(spec.seed, "init"))
    else:
        w = np.asarray(w0, dtype=float).copy()

    n_batches = -(-data.n // spec.batch_size)  # ceil
    batches = [
        np.arange(b * spec.batch_size, min((b + 1) * spec.batch_size, data.n))
        for b in range(n_batches)
    ]
    rng = derive_rng(spec.seed, "batch-order")

    m = np.zeros_like(w)
    v = np.zeros_like(w)
    batch_losses = np.empty(spec.steps)
    metrics = TrainMetrics(batch_losses)
    snapshots = {}
    if 0 in checkpoint_steps:
        snapshots[0] = w.copy()

    for t in range(1, spec.steps + 1):
        idx = batches[int(rng.integers(n_batches))]
        loss, g = model.loss_grad(w, data, idx)
        batch_losses[t - 1] = loss
        if not np.isfinite(loss):
            raise NumericalError(
                f"loss became {loss} at step {t} "
                f"(optimizer={spec.optimizer}, eta={spec.eta}); aborting"
            )

        if spec.optimizer == "sgd":
            m = spec.beta1 * m + g
            w = w - spec.eta * m
        elif spec.optimizer == "adamw":
            w = w - spec.eta * spec.weight_decay * w
            m = spec.beta1 * m + (1 - spec.beta1) * g
            v = spec.beta2 * v + (1 - spec.beta2) * g * g
            m_hat = m / (1 - spec.beta1**t)
            v_hat = v / (1 - spec.beta2**t)
            w = w - spec.eta * m_hat / (np.sqrt(v_hat) + spec.eps)
        else:  # adam_nobias
            if t == 1:
                m = g.copy()
                v = g * g
            else:
                m = spec.beta1 * m + (1 - spec.beta1) * g
                v = spec.beta2 * v + (1 - spec.beta2) * g * g
            w = w - spec.eta * m / (np.sqrt(v) + spec.eps)

        if t in checkpoint_steps:
            snapshots[t] = w.copy()
        if (spec.eval_every and t % spec.eval_every == 0) or t == spec.steps:
            full_loss, _ = model.loss_grad(w, data)
            metrics.eval_steps.append(t)
            metrics.eval_losses.append(full_loss)
            metrics.eval_accuracies.append(model.accuracy(w, data))

    if checkpoint_steps:
        return w, metrics, snapshots
    return w, metrics
