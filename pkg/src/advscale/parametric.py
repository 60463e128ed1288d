"""Quality-aware parametric loss forms and their grid-initialized L-BFGS fits.

Two functional forms are supported:

* v2: ``L = A/N^alpha + B'/D^beta + E'`` where B' and E' rescale B and E by
  ``exp(log(1 + fid) * coeff)``. At fid = 0 the quality terms vanish.
* v3: ``L = A/N^alpha + (B/D + (Q*fid)^(kappa/beta))^beta + E'`` with an
  additive quality penalty ``E' = E + log(1 + fid) * epsilon``. The middle
  term bottlenecks the benefit of more data once quality is the constraint.

Fitting minimizes a Huber loss over residuals of log predicted vs log
observed loss. The predicted log-loss is assembled with log-sum-exp over the
per-term log contributions, which keeps the objective finite and smooth over
the whole search space. Every fit runs L-BFGS from a Cartesian grid of
starting points and keeps the converged start with the lowest objective,
breaking ties toward the lowest grid index, so results are deterministic.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DataError, FitError, UsageError
from .run_data import RunRecord

#: Initial points for the base v2 fit; a, b, e seed log(A), log(B), log(E).
APPROACH2_BASE_GRID: dict[str, tuple[float, ...]] = {
    "log_a": (0.0, 1.0, 2.0, 5.0, 10.0),
    "log_b": (0.0, 1.0, 2.0, 5.0, 10.0),
    "log_e": (-1.0, -0.5, 0.0, 0.5, 1.0),
    "alpha": (0.0, 0.1, 0.25, 0.5, 1.0),
    "beta": (0.0, 0.1, 0.25, 0.5, 1.0),
}

#: Initial points for the v2 quality-term fit.
APPROACH2_QUALITY_GRID: dict[str, tuple[float, ...]] = {
    "zeta": (-0.3, -0.15, 0.15, 0.3),
    "epsilon": (0.01, 0.1, 0.2),
}

#: Initial points for the single-stage v3 fit, given in linear space.
APPROACH3_GRID: dict[str, tuple[float, ...]] = {
    "A": (5.0, 6.0, 7.0),
    "B": (6500.0, 7000.0, 7500.0),
    "E": (0.6, 0.5),
    "Q": (0.01, 0.5),
    "alpha": (0.1, 0.2, 0.3),
    "beta": (0.1, 0.2, 0.3),
    "kappa": (0.8, 0.6),
    "epsilon": (0.01,),
}

_FILTER_MAX_N = 1e8
_FILTER_MIN_D = 1e7
_FILTER_MAX_FID = 10.0

_DOMAIN_BARRIER = 1e30


@dataclass(frozen=True)
class Approach2Params:
    """Fitted constants of the v2 form."""

    A: float
    B: float
    E: float
    alpha: float
    beta: float
    epsilon: float
    zeta: float

    def __post_init__(self):
        if self.A <= 0 or self.B <= 0 or self.E <= 0:
            raise DataError("Approach2Params requires A, B, E > 0")

    def b_prime(self, fid: float) -> float:
        """Dataset coefficient after the quality adjustment at this fid."""
        return math.exp(math.log(self.B) + math.log1p(fid) * self.zeta)

    def e_prime(self, fid: float) -> float:
        """Irreducible loss after the quality adjustment at this fid."""
        return math.exp(math.log(self.E) + math.log1p(fid) * self.epsilon)


@dataclass(frozen=True)
class Approach3Params:
    """Fitted constants of the v3 quality-bottleneck form."""

    A: float
    B: float
    E: float
    Q: float
    alpha: float
    beta: float
    kappa: float
    epsilon: float

    def __post_init__(self):
        if self.A <= 0 or self.B <= 0 or self.E <= 0 or self.Q <= 0:
            raise DataError("Approach3Params requires A, B, E, Q > 0")

    def e_prime(self, fid: float) -> float:
        """Irreducible loss including the additive quality penalty."""
        return self.E + math.log1p(fid) * self.epsilon


@dataclass(frozen=True)
class FitConfig:
    """Reproducible inputs of the fitting procedure.

    init_grid entries override the published defaults per parameter name.
    """

    huber_delta: float = 0.001
    init_grid: dict[str, Sequence[float]] | None = None
    max_iterations: int = 200
    gradient_tolerance: float = 1e-10
    filter_enabled: bool = True

    def __post_init__(self):
        if self.huber_delta <= 0:
            raise UsageError("huber_delta must be positive")
        if self.gradient_tolerance <= 0:
            raise UsageError("gradient_tolerance must be positive")
        if self.init_grid is not None:
            for name, values in self.init_grid.items():
                if len(values) == 0:
                    raise UsageError(f"init_grid[{name!r}] must be non-empty")

    def grid_for(self, defaults: dict[str, tuple[float, ...]]) -> dict[str, tuple[float, ...]]:
        merged = dict(defaults)
        for name, values in (self.init_grid or {}).items():
            if name in merged:
                merged[name] = tuple(float(v) for v in values)
        return merged


class FitPoint(NamedTuple):
    """One fitted observation: final loss of a run at its (n, d, fid)."""

    n: float
    d: float
    fid: float
    loss: float
    generator: str = ""


@dataclass(frozen=True)
class StartDiagnostic:
    """Outcome of one grid start."""

    index: int
    init: dict[str, float]
    objective: float
    converged: bool
    iterations: int
    message: str


@dataclass(frozen=True)
class StageReport:
    """Provenance of one fitting stage."""

    name: str
    grid: dict[str, tuple[float, ...]]
    n_points: int
    winner_index: int
    starts: tuple[StartDiagnostic, ...]
    generator: str | None = None
    fid_ref: float = 0.0


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters plus full per-start provenance."""

    params: Approach2Params | Approach3Params
    config: FitConfig
    stages: tuple[StageReport, ...]

    def to_dict(self) -> dict:
        payload = {
            "approach": 2 if isinstance(self.params, Approach2Params) else 3,
            "params": params_to_dict(self.params),
            "config": {
                "huber_delta": self.config.huber_delta,
                "max_iterations": self.config.max_iterations,
                "gradient_tolerance": self.config.gradient_tolerance,
                "filter_enabled": self.config.filter_enabled,
            },
            "stages": [
                {
                    "name": stage.name,
                    "generator": stage.generator,
                    "fid_ref": stage.fid_ref,
                    "grid": {k: list(v) for k, v in stage.grid.items()},
                    "n_points": stage.n_points,
                    "winner_index": stage.winner_index,
                    "starts": [asdict(s) for s in stage.starts],
                }
                for stage in self.stages
            ],
        }
        return payload


def loss_v2(n: float, d: float, fid: float, p: Approach2Params) -> float:
    """Predicted loss of the v2 form at one (n, d, fid)."""
    if n <= 0 or d <= 0:
        raise UsageError("loss_v2 requires positive n and d")
    if fid < 0:
        raise UsageError("loss_v2 requires non-negative fid")
    return p.A / n**p.alpha + p.b_prime(fid) / d**p.beta + p.e_prime(fid)


def loss_v3(n: float, d: float, fid: float, p: Approach3Params) -> float:
    """Predicted loss of the v3 form at one (n, d, fid)."""
    if n <= 0 or d <= 0:
        raise UsageError("loss_v3 requires positive n and d")
    if fid < 0:
        raise UsageError("loss_v3 requires non-negative fid")
    bottleneck = 0.0 if fid == 0 else (p.Q * fid) ** (p.kappa / p.beta)
    return p.A / n**p.alpha + (p.B / d + bottleneck) ** p.beta + p.e_prime(fid)


def apply_fit_filter(runs: Iterable[RunRecord]) -> list[RunRecord]:
    """Drop small models trained on large, high-quality datasets.

    A run is dropped only when all three hold: model size below 100M,
    final samples above 10M, fid below 10. Such runs underfit and would
    bias the scaling fit.
    """
    kept = []
    for run in runs:
        n = run.model.params_n
        d = run.final_observation.samples_seen
        fid = run.dataset.fid
        if n < _FILTER_MAX_N and d > _FILTER_MIN_D and fid < _FILTER_MAX_FID:
            continue
        kept.append(run)
    return kept


def points_from_runs(runs: Iterable[RunRecord]) -> list[FitPoint]:
    """One fit point per run: its final observation."""
    points = []
    for run in runs:
        final = run.final_observation
        points.append(
            FitPoint(
                n=float(run.model.params_n),
                d=float(final.samples_seen),
                fid=run.dataset.fid,
                loss=final.trades_loss,
                generator=run.dataset.generator,
            )
        )
    return points


class _PointArrays:
    """Precomputed per-point regressors shared by objective evaluations."""

    def __init__(self, points: Sequence[FitPoint], fid_ref: float = 0.0):
        if not points:
            raise DataError("objective requires at least one point")
        for pt in points:
            if pt.n <= 0 or pt.d <= 0:
                raise DataError("objective points require positive n and d")
            if pt.fid < 0:
                raise DataError("objective points require non-negative fid")
            if pt.loss <= 0:
                raise DataError("objective requires positive observed losses")
        fid = np.array([pt.fid for pt in points], dtype=float)
        self.log_n = np.log(np.array([pt.n for pt in points], dtype=float))
        self.log_d = np.log(np.array([pt.d for pt in points], dtype=float))
        self.log1p_fid = np.log1p(fid)
        with np.errstate(divide="ignore"):
            self.log_fid = np.where(fid == 0, -np.inf, np.log(np.where(fid == 0, 1.0, fid)))
        # Quality regressor, optionally anchored at a reference fid so that a
        # single-generator stage is independent of the quality coefficients.
        self.quality = self.log1p_fid - math.log1p(fid_ref)
        self.log_loss = np.log(np.array([pt.loss for pt in points], dtype=float))
        self.count = len(points)


def _huber_sum_and_slope(residual: np.ndarray, delta: float) -> tuple[float, np.ndarray]:
    abs_r = np.abs(residual)
    quad = abs_r <= delta
    value = np.where(quad, 0.5 * residual**2, delta * abs_r - 0.5 * delta**2).sum()
    return float(value), np.clip(residual, -delta, delta)


def _v2_value_grad(theta: np.ndarray, pts: _PointArrays, delta: float) -> tuple[float, np.ndarray]:
    """Objective and gradient for theta = (a, b, e, alpha, beta, epsilon, zeta).

    a, b, e are log(A), log(B), log(E); the rest are in linear space.
    """
    a, b, e, alpha, beta, eps, zeta = theta
    t1 = a - alpha * pts.log_n
    t2 = b + zeta * pts.quality - beta * pts.log_d
    t3 = e + eps * pts.quality
    stacked = np.stack((t1, t2, t3))
    peak = stacked.max(axis=0)
    log_pred = peak + np.log(np.exp(stacked - peak).sum(axis=0))
    weights = np.exp(stacked - log_pred)
    value, slope = _huber_sum_and_slope(log_pred - pts.log_loss, delta)
    w1, w2, w3 = weights
    grad = np.array(
        [
            slope @ w1,
            slope @ w2,
            slope @ w3,
            -(slope * w1) @ pts.log_n,
            -(slope * w2) @ pts.log_d,
            (slope * w3) @ pts.quality,
            (slope * w2) @ pts.quality,
        ]
    )
    return value, grad


def _v3_value_grad(theta: np.ndarray, pts: _PointArrays, delta: float) -> tuple[float, np.ndarray]:
    """Objective and gradient for theta = (a, b, e, q, alpha, beta, kappa, epsilon).

    a, b, e, q are log(A), log(B), log(E), log(Q); the rest are linear.
    """
    a, b, e, q, alpha, beta, kappa, eps = theta
    # Out-of-domain points get a finite barrier rather than inf so that a
    # stray evaluation cannot poison the line search. The fit itself keeps
    # beta inside its box bound and rarely sees either branch.
    if beta <= 1e-12:
        return _DOMAIN_BARRIER, np.zeros(8)
    e_prime = math.exp(e) + eps * pts.log1p_fid
    if np.any(e_prime <= 0):
        return _DOMAIN_BARRIER, np.zeros(8)
    scale = q + pts.log_fid  # -inf at fid = 0, silencing the bottleneck branch
    zero_fid = np.isneginf(scale)
    finite_scale = np.where(zero_fid, 0.0, scale)
    branch_d = b - pts.log_d
    branch_q = np.where(zero_fid, -np.inf, (kappa / beta) * finite_scale)
    inner = np.logaddexp(branch_d, branch_q)
    y_d = np.exp(branch_d - inner)
    y_q = np.exp(branch_q - inner)
    y_q_scale = y_q * finite_scale

    t1 = a - alpha * pts.log_n
    t2 = beta * inner
    t3 = np.log(e_prime)
    stacked = np.stack((t1, t2, t3))
    peak = stacked.max(axis=0)
    log_pred = peak + np.log(np.exp(stacked - peak).sum(axis=0))
    weights = np.exp(stacked - log_pred)
    value, slope = _huber_sum_and_slope(log_pred - pts.log_loss, delta)
    w1, w2, w3 = weights
    grad = np.array(
        [
            slope @ w1,
            beta * (slope * w2) @ y_d,
            (slope * w3) @ (math.exp(e) / e_prime),
            kappa * (slope * w2) @ y_q,
            -(slope * w1) @ pts.log_n,
            (slope * w2) @ (inner - kappa * y_q_scale / beta),
            (slope * w2) @ y_q_scale,
            (slope * w3) @ (pts.log1p_fid / e_prime),
        ]
    )
    return value, grad


def huber_logspace_objective(
    params: Approach2Params | Approach3Params,
    points: Iterable[FitPoint | tuple],
    delta: float = 0.001,
) -> float:
    """Summed Huber loss of log-residuals at the given parameters."""
    pts = _PointArrays([FitPoint(*p) for p in points])
    if isinstance(params, Approach2Params):
        theta = np.array(
            [
                math.log(params.A),
                math.log(params.B),
                math.log(params.E),
                params.alpha,
                params.beta,
                params.epsilon,
                params.zeta,
            ]
        )
        value, _ = _v2_value_grad(theta, pts, delta)
    else:
        theta = np.array(
            [
                math.log(params.A),
                math.log(params.B),
                math.log(params.E),
                math.log(params.Q),
                params.alpha,
                params.beta,
                params.kappa,
                params.epsilon,
            ]
        )
        value, _ = _v3_value_grad(theta, pts, delta)
    return value


@dataclass
class _StartOutcome:
    diagnostic: StartDiagnostic
    x: np.ndarray


def _run_grid(fun, starts: list[tuple[dict[str, float], np.ndarray]], config: FitConfig, bounds=None):
    """Run L-BFGS from every start; return outcomes and the winning index.

    The winner is the converged start with the lowest final objective; ties
    break toward the lower grid index. The grid is embarrassingly parallel in
    principle, but the serial loop is deterministic and fast enough here.
    """
    outcomes: list[_StartOutcome] = []
    for index, (init, x0) in enumerate(starts):
        result = minimize(
            fun,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxcor": 10,
                "maxiter": config.max_iterations,
                "ftol": 0.0,
                "gtol": config.gradient_tolerance,
                "maxls": 40,
            },
        )
        outcomes.append(
            _StartOutcome(
                diagnostic=StartDiagnostic(
                    index=index,
                    init=init,
                    objective=float(result.fun),
                    converged=bool(result.status == 0),
                    iterations=int(result.nit),
                    message=str(result.message),
                ),
                x=np.asarray(result.x, dtype=float),
            )
        )
    converged = [o for o in outcomes if o.diagnostic.converged and math.isfinite(o.diagnostic.objective)]
    if not converged:
        raise FitError(
            "no grid start converged",
            diagnostics=[o.diagnostic for o in outcomes],
        )
    winner = min(converged, key=lambda o: (o.diagnostic.objective, o.diagnostic.index))
    return outcomes, winner


def _grid_starts(grid: dict[str, tuple[float, ...]], transform=None):
    names = list(grid)
    starts = []
    for values in itertools.product(*(grid[name] for name in names)):
        init = dict(zip(names, (float(v) for v in values)))
        x0 = np.array([transform(name, v) if transform else v for name, v in init.items()])
        starts.append((init, x0))
    return starts


def _check_identifiable(points: Sequence[FitPoint], n_free: int, label: str, min_fids: int = 1):
    distinct_n = {pt.n for pt in points}
    distinct_d = {pt.d for pt in points}
    distinct_nd = {(pt.n, pt.d, pt.fid) for pt in points}
    distinct_fid = {pt.fid for pt in points}
    problems = []
    if len(distinct_n) < 2:
        problems.append(f"{len(distinct_n)} distinct model sizes")
    if len(distinct_d) < 2:
        problems.append(f"{len(distinct_d)} distinct dataset sizes")
    if len(distinct_nd) < n_free:
        problems.append(f"{len(distinct_nd)} distinct points for {n_free} free parameters")
    if len(distinct_fid) < min_fids:
        problems.append(f"{len(distinct_fid)} distinct fids, need {min_fids}")
    if problems:
        raise FitError(f"{label}: fit is not identifiable ({'; '.join(problems)})")


def fit_approach2(
    runs: Iterable[RunRecord],
    config: FitConfig | None = None,
    stage1_generator: str | None = None,
) -> FitResult:
    """Two-stage fit of the v2 form.

    The base constants (A, B, E, alpha, beta) are fitted on the runs of a
    single reference generator, then frozen while (epsilon, zeta) are fitted
    on the remaining runs. During the base stage the quality regressor is
    anchored at the reference generator's fid, so the reported B and E are
    recovered exactly in the fid = 0 convention once the quality coefficients
    are known. By default the reference generator is the lowest-fid one.
    """
    config = config or FitConfig()
    runs = list(runs)
    if config.filter_enabled:
        runs = apply_fit_filter(runs)
    points = points_from_runs(runs)
    if not points:
        raise DataError("fit_approach2: no usable runs after filtering")

    if stage1_generator is None:
        stage1_generator = min(points, key=lambda pt: pt.fid).generator
    base_points = [pt for pt in points if pt.generator == stage1_generator]
    quality_points = [pt for pt in points if pt.generator != stage1_generator]
    if not base_points:
        raise DataError(f"fit_approach2: no runs from generator {stage1_generator!r}")
    base_fids = {pt.fid for pt in base_points}
    if len(base_fids) != 1:
        raise DataError(
            f"fit_approach2: generator {stage1_generator!r} spans multiple fids {sorted(base_fids)}"
        )
    fid_ref = base_points[0].fid
    _check_identifiable(base_points, n_free=5, label="fit_approach2 base stage")
    if len({pt.fid for pt in quality_points}) < 2:
        raise DataError("fit_approach2: quality stage requires runs spanning at least 2 fids")

    delta = config.huber_delta
    base_arrays = _PointArrays(base_points, fid_ref=fid_ref)
    base_grid = config.grid_for(APPROACH2_BASE_GRID)

    def base_objective(x: np.ndarray):
        theta = np.array([x[0], x[1], x[2], x[3], x[4], 0.0, 0.0])
        value, grad = _v2_value_grad(theta, base_arrays, delta)
        return value, grad[:5]

    base_starts = _grid_starts(base_grid)
    base_outcomes, base_winner = _run_grid(base_objective, base_starts, config)
    a_hat, b_ref, e_ref, alpha_hat, beta_hat = base_winner.x

    quality_arrays = _PointArrays(quality_points, fid_ref=fid_ref)
    quality_grid = config.grid_for(APPROACH2_QUALITY_GRID)

    def quality_objective(x: np.ndarray):
        zeta, eps = x
        theta = np.array([a_hat, b_ref, e_ref, alpha_hat, beta_hat, eps, zeta])
        value, grad = _v2_value_grad(theta, quality_arrays, delta)
        return value, np.array([grad[6], grad[5]])

    quality_starts = _grid_starts(quality_grid)
    quality_outcomes, quality_winner = _run_grid(quality_objective, quality_starts, config)
    zeta_hat, eps_hat = quality_winner.x

    # Undo the anchoring: convert the reference-fid intercepts to fid = 0.
    anchor = math.log1p(fid_ref)
    log_b = b_ref - zeta_hat * anchor
    log_e = e_ref - eps_hat * anchor
    params = Approach2Params(
        A=math.exp(a_hat),
        B=math.exp(log_b),
        E=math.exp(log_e),
        alpha=float(alpha_hat),
        beta=float(beta_hat),
        epsilon=float(eps_hat),
        zeta=float(zeta_hat),
    )
    stages = (
        StageReport(
            name="base",
            grid=base_grid,
            n_points=len(base_points),
            winner_index=base_winner.diagnostic.index,
            starts=tuple(o.diagnostic for o in base_outcomes),
            generator=stage1_generator,
            fid_ref=fid_ref,
        ),
        StageReport(
            name="quality",
            grid=quality_grid,
            n_points=len(quality_points),
            winner_index=quality_winner.diagnostic.index,
            starts=tuple(o.diagnostic for o in quality_outcomes),
            generator=None,
            fid_ref=fid_ref,
        ),
    )
    return FitResult(params=params, config=config, stages=stages)


def fit_approach3(runs: Iterable[RunRecord], config: FitConfig | None = None) -> FitResult:
    """Single-stage fit of all eight v3 parameters."""
    config = config or FitConfig()
    runs = list(runs)
    if config.filter_enabled:
        runs = apply_fit_filter(runs)
    points = points_from_runs(runs)
    if not points:
        raise DataError("fit_approach3: no usable runs after filtering")
    _check_identifiable(points, n_free=8, label="fit_approach3", min_fids=2)

    delta = config.huber_delta
    arrays = _PointArrays(points)
    grid = config.grid_for(APPROACH3_GRID)

    def objective(x: np.ndarray):
        return _v3_value_grad(x, arrays, delta)

    def to_internal(name: str, value: float) -> float:
        if name in ("A", "B", "E", "Q"):
            return math.log(value)
        return value

    starts = _grid_starts(grid, transform=to_internal)
    # beta must stay positive: kappa / beta appears in the bottleneck
    # exponent, so the search is boxed away from the singularity instead of
    # relying on a barrier the line search would trip over.
    bounds = [(None, None)] * 8
    bounds[5] = (1e-6, None)
    outcomes, winner = _run_grid(objective, starts, config, bounds=bounds)
    a, b, e, q, alpha, beta, kappa, eps = winner.x
    params = Approach3Params(
        A=math.exp(a),
        B=math.exp(b),
        E=math.exp(e),
        Q=math.exp(q),
        alpha=float(alpha),
        beta=float(beta),
        kappa=float(kappa),
        epsilon=float(eps),
    )
    stages = (
        StageReport(
            name="joint",
            grid=grid,
            n_points=len(points),
            winner_index=winner.diagnostic.index,
            starts=tuple(o.diagnostic for o in outcomes),
        ),
    )
    return FitResult(params=params, config=config, stages=stages)


def params_to_dict(params: Approach2Params | Approach3Params) -> dict:
    return {k: float(v) for k, v in asdict(params).items()}


def params_from_dict(payload: dict) -> Approach2Params | Approach3Params:
    fields = payload.get("params", payload)
    if "zeta" in fields:
        return Approach2Params(**{k: float(v) for k, v in fields.items()})
    if "Q" in fields:
        return Approach3Params(**{k: float(v) for k, v in fields.items()})
    raise DataError("parameter payload matches neither loss form")


def load_params(path: str | Path) -> Approach2Params | Approach3Params:
    """Read a parameter file written by the CLI or shipped with the package."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"parameter file not found: {path}")
    with path.open() as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path.name}: invalid parameter file ({exc.msg})") from exc
    return params_from_dict(payload)


def published_params(approach: int, filtered: bool = True) -> Approach2Params | Approach3Params:
    """The published fitted constants bundled with the package."""
    if approach == 2:
        name = "approach2_published.json" if filtered else "approach2_published_unfiltered.json"
    elif approach == 3:
        if not filtered:
            raise UsageError("no unfiltered variant is published for approach 3")
        name = "approach3_published.json"
    else:
        raise UsageError(f"unknown approach {approach}; expected 2 or 3")
    path = resources.files("advscale").joinpath("data", name)
    return params_from_dict(json.loads(path.read_text()))
