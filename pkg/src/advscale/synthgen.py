"""Synthetic run-log generation from known scaling-law parameters.

Every fit-recovery test uses this module as its oracle: plant parameters,
generate logs, fit, and compare. Losses follow the closed form exactly at
noise_sigma=0, with log-normal (or optionally additive) noise otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .allocator import LossAccuracyMap
from .errors import UsageError
from .parametric import Approach2Params, Approach3Params, loss_v2, loss_v3
from .run_data import DatasetSpec, ModelSpec, Observation, RunRecord, training_flops

_LOSS_FLOOR = 1e-9


@dataclass(frozen=True)
class SynthDesign:
    """Grid of runs to simulate and how noisy their recorded losses are."""

    model_sizes: Sequence[int]
    dataset_sizes: Sequence[int]
    fids: Sequence[float]
    eval_points_per_run: int = 40
    noise_sigma: float = 0.0
    seed: int = 0
    additive_noise: bool = False
    accuracy_map: LossAccuracyMap | None = None
    eval_decades: float = 2.0

    def __post_init__(self):
        if not self.model_sizes or not self.dataset_sizes or not self.fids:
            raise UsageError("SynthDesign requires non-empty size and fid lists")
        if any(n <= 0 for n in self.model_sizes):
            raise UsageError("SynthDesign model_sizes must be positive")
        if any(d <= 0 for d in self.dataset_sizes):
            raise UsageError("SynthDesign dataset_sizes must be positive")
        if any(fid < 0 for fid in self.fids):
            raise UsageError("SynthDesign fids must be non-negative")
        if self.eval_points_per_run < 1:
            raise UsageError("SynthDesign needs at least one eval point per run")
        if self.noise_sigma < 0:
            raise UsageError("SynthDesign noise_sigma must be non-negative")
        if self.eval_decades <= 0:
            raise UsageError("SynthDesign eval_decades must be positive")


def _eval_schedule(d_max: int, points: int, decades: float) -> np.ndarray:
    """Log-spaced sample counts ending exactly at d_max, strictly increasing."""
    if points == 1:
        return np.array([d_max], dtype=float)
    raw = np.geomspace(d_max / 10**decades, d_max, points)
    samples = np.unique(np.round(raw))
    return samples[samples > 0]


def generate_runs(
    truth: Approach2Params | Approach3Params, design: SynthDesign
) -> list[RunRecord]:
    """Simulate one run per (model size, dataset size, fid) combination."""
    if isinstance(truth, Approach2Params):
        loss_fn = loss_v2
    elif isinstance(truth, Approach3Params):
        loss_fn = loss_v3
    else:
        raise UsageError(f"unsupported truth parameter type {type(truth).__name__}")

    runs = []
    combos = itertools.product(design.model_sizes, design.dataset_sizes, design.fids)
    for index, (n, d_max, fid) in enumerate(combos):
        rng = np.random.default_rng([design.seed, index])
        schedule = _eval_schedule(d_max, design.eval_points_per_run, design.eval_decades)
        observations = []
        for d in schedule:
            loss = loss_fn(float(n), float(d), fid, truth)
            if design.noise_sigma > 0:
                eta = rng.normal(0.0, design.noise_sigma)
                loss = loss + eta if design.additive_noise else loss * np.exp(eta)
            loss = max(float(loss), _LOSS_FLOOR)
            adv_acc = None
            if design.accuracy_map is not None:
                adv_acc = design.accuracy_map.predict(loss)
            observations.append(
                Observation(
                    samples_seen=int(d),
                    train_flops=training_flops(float(n), float(d)),
                    trades_loss=loss,
                    adv_acc=adv_acc,
                )
            )
        runs.append(
            RunRecord(
                run_id=f"synth-{index:04d}-n{n}-d{d_max}-fid{fid:g}",
                model=ModelSpec(name=f"synth-n{n}", depth=28, width=10, params_n=int(n)),
                dataset=DatasetSpec(
                    generator=f"synth-fid-{fid:g}", fid=float(fid), size_samples=int(d_max)
                ),
                hyper={"batch_size": 512, "pgd_steps": 10, "learning_rate": 0.2},
                observations=tuple(observations),
            )
        )
    return runs
