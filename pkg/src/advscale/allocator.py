"""Compute-optimal allocation, overhead trade-offs, and the robustness frontier.

The v2 form admits a closed-form optimum under the FLOPs = coefficient * N * D
constraint. The v3 form does not, so its optimum is found by bracketed
one-dimensional minimization over log N; its exponents are local log-slopes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DataError, InfeasibleError, ParseError, UsageError
from .parametric import Approach2Params, Approach3Params, loss_v2, loss_v3
from .run_data import ND_COEFFICIENT, RunRecord, _bundled

_NUMERIC_LOG_N_BOUNDS = (math.log(1e6), math.log(1e13))


@dataclass(frozen=True)
class Allocation:
    """Compute-optimal training settings at one FLOPs budget and fid."""

    flops: float
    fid: float
    n_star: float
    d_star: float
    l_star: float
    a: float
    b: float
    g: float
    boundary_warning: bool = False


@dataclass(frozen=True)
class OverheadPoint:
    """One point on the model-downsizing trade-off curve."""

    omega_n: float
    omega_d: float
    overhead_pct: float


@dataclass(frozen=True)
class LossAccuracyMap:
    """Affine map from robust loss to adversarial accuracy."""

    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self):
        if self.slope >= 0:
            raise DataError("loss-accuracy map requires a negative slope")

    def predict(self, loss: float, clamp: bool = True) -> float:
        value = self.slope * loss + self.intercept
        if clamp:
            value = min(1.0, max(0.0, value))
        return value


@dataclass(frozen=True)
class FrontierRow:
    fid: float
    flops: float
    n_star: float
    d_star: float
    l_star: float
    accuracy: float


@dataclass(frozen=True)
class FrontierAsymptote:
    """The infinite-compute limit at one fid, computed symbolically."""

    fid: float
    loss_limit: float
    accuracy_limit: float


@dataclass(frozen=True)
class FrontierTable:
    rows: tuple[FrontierRow, ...]
    asymptotes: tuple[FrontierAsymptote, ...]


def optimal_allocation_v2(
    flops: float,
    fid: float,
    p: Approach2Params,
    nd_coefficient: float = ND_COEFFICIENT,
) -> Allocation:
    """Closed-form compute-optimal (N*, D*) for the v2 loss."""
    if flops <= 0:
        raise UsageError("optimal_allocation_v2 requires positive flops")
    if fid < 0:
        raise UsageError("optimal_allocation_v2 requires non-negative fid")
    total = p.alpha + p.beta
    if total == 0:
        raise DataError("optimal_allocation_v2: alpha + beta must be nonzero")
    a = p.beta / total
    b = p.alpha / total
    b_prime = p.b_prime(fid)
    g = (p.alpha * p.A / (p.beta * b_prime)) ** (1.0 / total)
    budget = flops / nd_coefficient
    n_star = g * budget**a
    d_star = budget**b / g
    return Allocation(
        flops=flops,
        fid=fid,
        n_star=n_star,
        d_star=d_star,
        l_star=loss_v2(n_star, d_star, fid, p),
        a=a,
        b=b,
        g=g,
    )


def _numeric_n_star(
    flops: float, fid: float, p: Approach3Params, nd_coefficient: float
) -> tuple[float, bool]:
    lo, hi = _NUMERIC_LOG_N_BOUNDS
    budget = flops / nd_coefficient

    def objective(log_n: float) -> float:
        n = math.exp(log_n)
        return loss_v3(n, budget / n, fid, p)

    result = minimize_scalar(
        objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9, "maxiter": 500}
    )
    log_n = float(result.x)
    at_boundary = min(log_n - lo, hi - log_n) < 1e-6
    return math.exp(log_n), at_boundary


def optimal_allocation_v3(
    flops: float,
    fid: float,
    p: Approach3Params,
    nd_coefficient: float = ND_COEFFICIENT,
) -> Allocation:
    """Numeric compute-optimal (N*, D*) for the v3 loss.

    Exponents a and b are local finite-difference slopes of log N* and
    log D* against log FLOPs (central step of a tenth of a decade), since
    the v3 optimum is not an exact power law in the budget.
    """
    if flops <= 0:
        raise UsageError("optimal_allocation_v3 requires positive flops")
    if fid < 0:
        raise UsageError("optimal_allocation_v3 requires non-negative fid")
    n_star, warn = _numeric_n_star(flops, fid, p, nd_coefficient)
    d_star = flops / (nd_coefficient * n_star)

    step = 0.1  # decades
    n_hi, warn_hi = _numeric_n_star(flops * 10**step, fid, p, nd_coefficient)
    n_lo, warn_lo = _numeric_n_star(flops / 10**step, fid, p, nd_coefficient)
    a = (math.log10(n_hi) - math.log10(n_lo)) / (2 * step)
    d_hi = flops * 10**step / (nd_coefficient * n_hi)
    d_lo = flops / 10**step / (nd_coefficient * n_lo)
    b = (math.log10(d_hi) - math.log10(d_lo)) / (2 * step)
    g = n_star / (flops / nd_coefficient) ** a
    return Allocation(
        flops=flops,
        fid=fid,
        n_star=n_star,
        d_star=d_star,
        l_star=loss_v3(n_star, d_star, fid, p),
        a=a,
        b=b,
        g=g,
        boundary_warning=warn or warn_hi or warn_lo,
    )


def overhead_curve(
    flops: float,
    fid: float,
    p: Approach2Params,
    omega_n_list: Sequence[float],
    nd_coefficient: float = ND_COEFFICIENT,
) -> list[OverheadPoint]:
    """Loss-preserving data scaling for each requested model scaling.

    Each omega_n rescales the optimal model size; omega_d is the unique data
    rescaling that keeps the v2 loss unchanged, so omega_n * omega_d - 1 is
    the extra compute paid for training off the optimal model size.
    """
    best = optimal_allocation_v2(flops, fid, p, nd_coefficient)
    model_term = p.A * best.n_star**-p.alpha
    data_term = p.b_prime(fid) * best.d_star**-p.beta
    ratio = model_term / data_term
    points = []
    for omega_n in omega_n_list:
        if omega_n <= 0:
            raise UsageError("overhead_curve requires positive omega_n values")
        radicand = 1.0 - (omega_n**-p.alpha - 1.0) * ratio
        if radicand <= 0:
            raise InfeasibleError(
                f"omega_n={omega_n:g} cannot be compensated by more data at this budget"
            )
        omega_d = radicand ** (-1.0 / p.beta)
        points.append(
            OverheadPoint(
                omega_n=float(omega_n),
                omega_d=float(omega_d),
                overhead_pct=(float(omega_n) * float(omega_d) - 1.0) * 100.0,
            )
        )
    return points


def fit_loss_accuracy(runs: Iterable[RunRecord]) -> LossAccuracyMap:
    """Regress adversarial accuracy on loss at each run's minimum-loss point."""
    losses = []
    accuracies = []
    for run in runs:
        scored = [obs for obs in run.observations if obs.adv_acc is not None]
        if not scored:
            continue
        best = min(scored, key=lambda obs: obs.trades_loss)
        losses.append(best.trades_loss)
        accuracies.append(best.adv_acc)
    if len(losses) < 3:
        raise UsageError(
            f"fit_loss_accuracy requires at least 3 runs with adv_acc, got {len(losses)}"
        )
    x = np.asarray(losses)
    y = np.asarray(accuracies)
    if np.ptp(x) == 0:
        raise DataError("fit_loss_accuracy: all selected losses are identical")
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    ss_res = float(((y - predicted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return LossAccuracyMap(slope=float(slope), intercept=float(intercept), r_squared=r_squared)


def load_loss_accuracy(path: str | Path) -> LossAccuracyMap:
    """Read a loss-accuracy map from a JSON file with slope/intercept keys."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
        return LossAccuracyMap(
            slope=float(payload["slope"]),
            intercept=float(payload["intercept"]),
            r_squared=float(payload.get("r_squared", float("nan"))),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: not a loss-accuracy map ({exc})") from exc


def published_loss_accuracy() -> LossAccuracyMap:
    """The loss-accuracy map fitted in the source study."""
    return load_loss_accuracy(_bundled("loss_accuracy_published.json"))


def asymptotic_loss(params: Approach2Params | Approach3Params, fid: float) -> float:
    """The infinite-compute loss floor at a fid, evaluated symbolically."""
    if isinstance(params, Approach2Params):
        return params.e_prime(fid)
    bottleneck = 0.0 if fid == 0 else (params.Q * fid) ** params.kappa
    return bottleneck + params.e_prime(fid)


def frontier(
    params: Approach2Params | Approach3Params,
    acc_map: LossAccuracyMap,
    fid_list: Sequence[float],
    flops_grid: Sequence[float],
    nd_coefficient: float = ND_COEFFICIENT,
) -> FrontierTable:
    """Accuracy of compute-optimal training across fids and budgets.

    Each row converts the optimal loss through the affine accuracy map,
    clamped to [0, 1] at this reporting boundary. Per-fid asymptotes use the
    symbolic loss floor rather than a large-budget extrapolation.
    """
    flops_grid = list(flops_grid)
    if any(b <= a for a, b in zip(flops_grid, flops_grid[1:])):
        raise UsageError("frontier requires a strictly increasing flops_grid")
    rows = []
    for fid in fid_list:
        for flops in flops_grid:
            if isinstance(params, Approach2Params):
                alloc = optimal_allocation_v2(flops, fid, params, nd_coefficient)
            else:
                alloc = optimal_allocation_v3(flops, fid, params, nd_coefficient)
            rows.append(
                FrontierRow(
                    fid=fid,
                    flops=flops,
                    n_star=alloc.n_star,
                    d_star=alloc.d_star,
                    l_star=alloc.l_star,
                    accuracy=acc_map.predict(alloc.l_star),
                )
            )
    asymptotes = []
    for fid in fid_list:
        floor = asymptotic_loss(params, fid)
        asymptotes.append(
            FrontierAsymptote(fid=fid, loss_limit=floor, accuracy_limit=acc_map.predict(floor))
        )
    return FrontierTable(rows=tuple(rows), asymptotes=tuple(asymptotes))
