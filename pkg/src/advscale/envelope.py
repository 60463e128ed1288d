"""Compute-frontier envelope over training curves and power-law fits to it.

Every observation of every run is a (train_flops, loss) candidate; the
envelope at a query budget is the best loss any run had reached by that
budget. Power laws for N*(F) and D*(F) come from ordinary least squares in
log10-log10 space over the (optionally monotone-filtered) envelope points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, UsageError
from .run_data import ND_COEFFICIENT, RunRecord


@dataclass(frozen=True)
class EnvelopePoint:
    """Best observed loss at one query budget, with the winning run's shape."""

    flops: float
    loss: float
    n_star: float
    d_star: float
    run_id: str


@dataclass(frozen=True)
class PowerLawFit:
    """y = coefficient * x**exponent, fitted in log10 space."""

    exponent: float
    coefficient: float
    r_squared: float
    n_points: int

    def predict(self, x: float | np.ndarray) -> float | np.ndarray:
        return self.coefficient * x**self.exponent


@dataclass(frozen=True)
class EnvelopeFits:
    n_of_flops: PowerLawFit
    d_of_flops: PowerLawFit
    loss_of_flops: PowerLawFit


def compute_envelope(runs: Sequence[RunRecord], n_query: int = 1000) -> list[EnvelopePoint]:
    """Lower envelope of all training curves on a log-spaced budget grid.

    At each query budget the winner is the run with the lowest loss among
    observations at or below the budget (each run contributing its latest
    observation so far); ties go to the smaller model.
    """
    if n_query < 2:
        raise UsageError("compute_envelope requires n_query >= 2")
    runs = list(runs)
    if not runs:
        raise DataError("compute_envelope requires at least one run")

    # Sort by model size so that np.argmin resolves loss ties toward the
    # smaller model.
    runs = sorted(runs, key=lambda run: run.model.params_n)
    flop_arrays = [np.array([obs.train_flops for obs in run.observations]) for run in runs]
    loss_arrays = [np.array([obs.trades_loss for obs in run.observations]) for run in runs]
    best_so_far = [np.minimum.accumulate(losses) for losses in loss_arrays]

    lo = min(arr[0] for arr in flop_arrays)
    hi = max(arr[-1] for arr in flop_arrays)
    if not (lo > 0):
        raise DataError("compute_envelope requires positive train_flops")
    queries = np.geomspace(lo, hi, n_query)

    points = []
    candidate = np.empty(len(runs))
    for f in queries:
        for i, flops in enumerate(flop_arrays):
            # Index of the last observation with train_flops <= f.
            k = np.searchsorted(flops, f, side="right") - 1
            candidate[i] = best_so_far[i][k] if k >= 0 else np.inf
        if not np.isfinite(candidate).any():
            continue
        winner = int(np.argmin(candidate))
        run = runs[winner]
        n_star = float(run.model.params_n)
        points.append(
            EnvelopePoint(
                flops=float(f),
                loss=float(candidate[winner]),
                n_star=n_star,
                d_star=float(f) / (ND_COEFFICIENT * n_star),
                run_id=run.run_id,
            )
        )
    return points


def monotone_filter(points: Iterable[EnvelopePoint]) -> list[EnvelopePoint]:
    """Keep only points that strictly improve on everything before them."""
    kept = []
    best = np.inf
    for point in points:
        if point.loss < best:
            kept.append(point)
            best = point.loss
    return kept


def _ols_loglog(x: np.ndarray, y: np.ndarray) -> PowerLawFit:
    log_x = np.log10(x)
    log_y = np.log10(y)
    exponent, intercept = np.polyfit(log_x, log_y, 1)
    predicted = exponent * log_x + intercept
    ss_res = float(((log_y - predicted) ** 2).sum())
    ss_tot = float(((log_y - log_y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(
        exponent=float(exponent),
        coefficient=float(10.0**intercept),
        r_squared=r_squared,
        n_points=len(x),
    )


def fit_power_laws(points: Sequence[EnvelopePoint]) -> EnvelopeFits:
    """Fit N*(F), D*(F), and L*(F) power laws to envelope points."""
    if len(points) < 2:
        raise DataError(f"fit_power_laws requires at least 2 points, got {len(points)}")
    flops = np.array([point.flops for point in points])
    if len(np.unique(flops)) < 2:
        raise DataError("fit_power_laws requires at least 2 distinct budgets")
    n = np.array([point.n_star for point in points])
    d = np.array([point.d_star for point in points])
    loss = np.array([point.loss for point in points])
    if (loss <= 0).any():
        raise DataError("fit_power_laws requires positive losses")
    return EnvelopeFits(
        n_of_flops=_ols_loglog(flops, n),
        d_of_flops=_ols_loglog(flops, d),
        loss_of_flops=_ols_loglog(flops, loss),
    )
