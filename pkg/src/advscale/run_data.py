"""Training-run records, bundled catalogs, and the adversarial FLOPs cost model.

Run logs are JSON Lines, one record per line::

    {"run_id": ..., "model": {...}, "dataset": {...}, "hyper": {...},
     "observations": [{"samples_seen": ..., "train_flops": ..., "trades_loss": ...,
                       "adv_acc": ..., "clean_acc": ...}, ...]}

Everything is immutable after load and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import InvariantError, ParseError, UsageError

#: FLOPs per (parameter, sample) pair for the adversarial training loop.
#: Derived empirically from a framework FLOP counter; configurable via CostModel.
ND_COEFFICIENT = 7822.0

#: Forward-pass equivalents of one standard training iteration (forward + backward).
STANDARD_ITERATION_COST = 3


@dataclass(frozen=True)
class ModelSpec:
    """One network architecture and its raw parameter count."""

    name: str
    depth: int
    width: int
    params_n: int

    def __post_init__(self):
        if self.depth <= 0 or self.width <= 0:
            raise InvariantError(f"model {self.name!r}: depth and width must be positive")
        if self.params_n <= 0:
            raise InvariantError(f"model {self.name!r}: params_n must be positive")


@dataclass(frozen=True)
class DatasetSpec:
    """One synthetic dataset: its generator, FID, and sample budget."""

    generator: str
    fid: float
    size_samples: int

    def __post_init__(self):
        if self.fid < 0:
            raise InvariantError(f"dataset {self.generator!r}: fid must be non-negative")
        if self.size_samples <= 0:
            raise InvariantError(f"dataset {self.generator!r}: size_samples must be positive")

    @property
    def quality(self) -> float:
        """Reciprocal FID; infinite for a hypothetical FID=0 generator."""
        return math.inf if self.fid == 0 else 1.0 / self.fid


@dataclass(frozen=True)
class Observation:
    """One evaluation point along a training run.

    samples_seen is cumulative and doubles as the running dataset size D.
    Accuracies are optional because evaluation is periodic, not per step.
    """

    samples_seen: int
    train_flops: float
    trades_loss: float
    adv_acc: float | None = None
    clean_acc: float | None = None

    def __post_init__(self):
        if self.samples_seen <= 0:
            raise InvariantError("observation: samples_seen must be positive")
        if self.train_flops <= 0:
            raise InvariantError("observation: train_flops must be positive")
        if self.trades_loss <= 0:
            raise InvariantError("observation: trades_loss must be positive")
        for name in ("adv_acc", "clean_acc"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise InvariantError(f"observation: {name} must lie in [0, 1]")


@dataclass(frozen=True)
class RunRecord:
    """One training run: model, dataset, hyperparameters, and its time series."""

    run_id: str
    model: ModelSpec
    dataset: DatasetSpec
    hyper: dict
    observations: tuple[Observation, ...]

    def __post_init__(self):
        if not self.observations:
            raise InvariantError(f"run {self.run_id!r}: observations must be non-empty")
        prev = self.observations[0]
        for obs in self.observations[1:]:
            if obs.samples_seen <= prev.samples_seen:
                raise InvariantError(
                    f"run {self.run_id!r}: samples_seen must be strictly increasing"
                )
            if obs.train_flops <= prev.train_flops:
                raise InvariantError(
                    f"run {self.run_id!r}: train_flops must be strictly increasing"
                )
            prev = obs
        # The sampler may overshoot the dataset by at most one batch.
        slack = int(self.hyper.get("batch_size", 0))
        final = self.observations[-1].samples_seen
        if final > self.dataset.size_samples + slack:
            raise InvariantError(
                f"run {self.run_id!r}: final samples_seen {final} exceeds dataset size "
                f"{self.dataset.size_samples} plus one-batch slack {slack}"
            )

    @property
    def final_observation(self) -> Observation:
        return self.observations[-1]


@dataclass(frozen=True)
class CostModel:
    """FLOPs accounting for adversarial training."""

    nd_coefficient: float = ND_COEFFICIENT
    forward_equivalents_adversarial: int = 27
    forward_equivalents_standard: int = STANDARD_ITERATION_COST

    def __post_init__(self):
        if self.nd_coefficient <= 0:
            raise InvariantError("cost model: nd_coefficient must be positive")

    def training_flops(self, n: float, d: float) -> float:
        return training_flops(n, d, nd_coefficient=self.nd_coefficient)


def training_flops(n: float, d: float, nd_coefficient: float = ND_COEFFICIENT) -> float:
    """Total training FLOPs for a model of n parameters over d samples."""
    if n <= 0 or d <= 0:
        raise UsageError("training_flops requires positive n and d")
    return nd_coefficient * n * d


def adversarial_iteration_cost(pgd_steps: int) -> int:
    """Forward-pass equivalents of one adversarial training iteration.

    One clean forward feeds the attack, each PGD step costs a forward plus an
    image-gradient backward, the TRADES loss adds two forwards, and its
    double-batch backward costs four more.
    """
    if pgd_steps < 1:
        raise UsageError("adversarial_iteration_cost requires pgd_steps >= 1")
    return 1 + 2 * pgd_steps + 2 + 4


def adversarial_multiplier(pgd_steps: int) -> float:
    """Cost of an adversarial iteration relative to a standard one."""
    return adversarial_iteration_cost(pgd_steps) / STANDARD_ITERATION_COST


def flops_model_max_relative_error(
    runs: Iterable[RunRecord], cost: CostModel | None = None
) -> float:
    """Worst relative error of the nd-coefficient model against recorded FLOPs."""
    cost = cost or CostModel()
    worst = 0.0
    for run in runs:
        for obs in run.observations:
            predicted = cost.training_flops(run.model.params_n, obs.samples_seen)
            worst = max(worst, abs(predicted - obs.train_flops) / obs.train_flops)
    return worst


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ParseError(f"{context}: missing field {key!r}")
    return mapping[key]


def _parse_run(payload: dict, context: str) -> RunRecord:
    model_raw = _require(payload, "model", context)
    dataset_raw = _require(payload, "dataset", context)
    observations_raw = _require(payload, "observations", context)
    model = ModelSpec(
        name=str(_require(model_raw, "name", context)),
        depth=int(_require(model_raw, "depth", context)),
        width=int(_require(model_raw, "width", context)),
        params_n=int(_require(model_raw, "params_n", context)),
    )
    dataset = DatasetSpec(
        generator=str(_require(dataset_raw, "generator", context)),
        fid=float(_require(dataset_raw, "fid", context)),
        size_samples=int(_require(dataset_raw, "size_samples", context)),
    )
    observations = tuple(
        Observation(
            samples_seen=int(_require(obs, "samples_seen", context)),
            train_flops=float(_require(obs, "train_flops", context)),
            trades_loss=float(_require(obs, "trades_loss", context)),
            adv_acc=None if obs.get("adv_acc") is None else float(obs["adv_acc"]),
            clean_acc=None if obs.get("clean_acc") is None else float(obs["clean_acc"]),
        )
        for obs in observations_raw
    )
    return RunRecord(
        run_id=str(_require(payload, "run_id", context)),
        model=model,
        dataset=dataset,
        hyper=dict(payload.get("hyper", {})),
        observations=observations,
    )


def load_runs(path: str | Path) -> list[RunRecord]:
    """Load and validate a JSON Lines run-record file, preserving file order."""
    path = Path(path)
    records = []
    with path.open() as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            context = f"{path.name}:{line_no}"
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{context}: invalid record ({exc.msg})") from exc
            if not isinstance(payload, dict):
                raise ParseError(f"{context}: record is not an object")
            records.append(_parse_run(payload, context))
    return records


def run_to_dict(run: RunRecord) -> dict:
    """Serialize one run in the interchange layout used by load_runs."""
    observations = []
    for obs in run.observations:
        entry = {
            "samples_seen": obs.samples_seen,
            "train_flops": obs.train_flops,
            "trades_loss": obs.trades_loss,
        }
        if obs.adv_acc is not None:
            entry["adv_acc"] = obs.adv_acc
        if obs.clean_acc is not None:
            entry["clean_acc"] = obs.clean_acc
        observations.append(entry)
    return {
        "run_id": run.run_id,
        "model": {
            "name": run.model.name,
            "depth": run.model.depth,
            "width": run.model.width,
            "params_n": run.model.params_n,
        },
        "dataset": {
            "generator": run.dataset.generator,
            "fid": run.dataset.fid,
            "size_samples": run.dataset.size_samples,
        },
        "hyper": dict(run.hyper),
        "observations": observations,
    }


def dump_runs(runs: Iterable[RunRecord], path: str | Path) -> None:
    """Write runs as JSON Lines; the output round-trips through load_runs."""
    path = Path(path)
    with path.open("w") as handle:
        for run in runs:
            handle.write(json.dumps(run_to_dict(run), sort_keys=True))
            handle.write("\n")


def _bundled(name: str) -> Path:
    return Path(str(resources.files("advscale").joinpath("data", name)))


def load_model_catalog(path: str | Path | None = None) -> list[ModelSpec]:
    """The bundled architecture catalog, or one in the same JSONL layout."""
    path = Path(path) if path is not None else _bundled("model_catalog.jsonl")
    models = []
    with path.open() as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path.name}:{line_no}: invalid record ({exc.msg})") from exc
            models.append(
                ModelSpec(
                    name=str(raw["name"]),
                    depth=int(raw["depth"]),
                    width=int(raw["width"]),
                    params_n=int(raw["params_n"]),
                )
            )
    return models


def load_dataset_catalog(path: str | Path | None = None) -> list[DatasetSpec]:
    """The bundled generator catalog, or one in the same JSONL layout."""
    path = Path(path) if path is not None else _bundled("dataset_catalog.jsonl")
    datasets = []
    with path.open() as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path.name}:{line_no}: invalid record ({exc.msg})") from exc
            datasets.append(
                DatasetSpec(
                    generator=str(raw["generator"]),
                    fid=float(raw["fid"]),
                    size_samples=int(raw["size_samples"]),
                )
            )
    return datasets
