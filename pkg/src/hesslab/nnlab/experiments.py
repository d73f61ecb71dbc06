"""Experiment drivers tying the models to the spectral estimators.

``scaling_experiment`` sweeps the per-layer output scale of a fixed MLP,
measuring (a) the initial-curvature heterogeneity index and (b) the best
accuracy each optimizer reaches over a learning-rate grid. Growing scale
drives the blockwise curvature spectra apart, which hurts the single-rate
optimizer much more than the coordinate-wise one.

``block_dominance_experiment`` trains the one-hidden-layer binary model and
tracks how the principal neuron blocks' share of the dense Hessian's mass
evolves; confident predictions shrink the cross-neuron terms, so dominance
rises over training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InputError, NumericalError
from ..operators import block_restrict
from ..seeding import derive_rng
from ..slq import ProbeConfig, slq_density
from ..spectra import heterogeneity_report
from .data import Dataset
from .models import (
    MlpClassifier,
    OneHiddenBinary,
    block_dominance,
    exact_hessian_small,
    hessian_operator,
)
from .training import TrainerSpec, train

DEFAULT_WIDTHS = (300, 128, 64)
DEFAULT_LR_GRID = (1e-4, 1e-3, 1e-2, 1e-1)


@dataclass
class ScalingRow:
    scale: float
    js0: float
    best_sgd_accuracy: float
    best_adamw_accuracy: float
    best_sgd_eta: float | None
    best_adamw_eta: float | None
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "js0": self.js0,
            "best_sgd_accuracy": self.best_sgd_accuracy,
            "best_adamw_accuracy": self.best_adamw_accuracy,
            "best_sgd_eta": self.best_sgd_eta,
            "best_adamw_eta": self.best_adamw_eta,
            "failures": self.failures,
        }


def init_blockwise_densities(model: MlpClassifier, data: Dataset, w: np.ndarray,
                             probe: ProbeConfig):
    """One spectral density per parameter tensor of the curvature at w."""
    op = hessian_operator(model, data, w)
    part = model.tensor_partition()
    labels = model.block_labels()
    densities = []
    for l in range(1, part.num_blocks + 1):
        sub = block_restrict(op, part, l)
        cfg = replace(probe, seed=int(np.random.SeedSequence([probe.seed, l]).generate_state(1)[0]))
        densities.append(slq_density(sub, cfg, label=labels[l - 1]))
    return densities


def scaling_experiment(c_values, lr_grid, data: Dataset, seed: int = 0,
                       widths=DEFAULT_WIDTHS, activation: str = "relu",
                       steps: int = 400, batch_size: int = 128,
                       probe: ProbeConfig | None = None):
    """Heterogeneity-vs-scale sweep; returns one ScalingRow per scale value.

    The weight draw is shared across scale values so the scale knob is the
    only thing that changes. A training run that blows up counts as accuracy
    0 for its grid cell and is recorded in the row's failures.
    """
    c_values = list(c_values)
    lr_grid = list(lr_grid)
    if not c_values:
        raise InputError("need at least one scale value")
    if not lr_grid:
        raise InputError("learning-rate grid must not be empty")
    if probe is None:
        probe = ProbeConfig(seed=seed)
    batch_size = min(batch_size, data.n)

    rows = []
    for c in c_values:
        model = MlpClassifier(data.dim, widths, data.num_classes, activation, output_scale=c)
        w0 = model.init_params(derive_rng(seed, "scaling-init"))
        densities = init_blockwise_densities(model, data, w0, probe)
        js0 = heterogeneity_report(densities).js0

        best = {}
        best_eta = {}
        failures = []
        for optimizer in ("sgd", "adamw"):
            best[optimizer] = 0.0
            best_eta[optimizer] = None
            for eta in lr_grid:
                spec = TrainerSpec(
                    optimizer=optimizer, eta=eta, steps=steps, batch_size=batch_size,
                    seed=seed,
                )
                try:
                    _, metrics = train(model, data, spec, w0=w0)
                    acc = metrics.final_accuracy
                except NumericalError as exc:
                    failures.append(f"{optimizer}@eta={eta}: {exc}")
                    continue
                if acc > best[optimizer]:
                    best[optimizer] = acc
                    best_eta[optimizer] = eta
        rows.append(
            ScalingRow(
                scale=float(c), js0=js0,
                best_sgd_accuracy=best["sgd"], best_adamw_accuracy=best["adamw"],
                best_sgd_eta=best_eta["sgd"], best_adamw_eta=best_eta["adamw"],
                failures=failures,
            )
        )
    return rows


def block_dominance_experiment(data: Dataset, width: int = 8, activation: str = "tanh",
                               spec: TrainerSpec | None = None, checkpoints=(0,),
                               seed: int = 0):
    """Dominance-vs-step record for the one-hidden binary model.

    Returns (model, snapshots, [(step, dominance, accuracy)]).
    """
    if data.num_classes != 2:
        raise InputError("dominance experiment uses the binary model; need 2 classes")
    model = OneHiddenBinary(data.dim, width, activation)
    if spec is None:
        spec = TrainerSpec(optimizer="adamw", eta=1e-4, steps=1000,
                           batch_size=data.n, seed=seed)
    w0 = model.init_params(derive_rng(seed, "dominance-init"))
    checkpoints = sorted(set(checkpoints) | {0, spec.steps})
    _, _, snapshots = train(model, data, spec, w0=w0, checkpoint_steps=checkpoints)
    part = model.neuron_partition()
    records = []
    for step in checkpoints:
        w = snapshots[step]
        dom = block_dominance(exact_hessian_small(model, data, w), part)
        records.append((step, dom, model.accuracy(w, data)))
    return model, snapshots, records
