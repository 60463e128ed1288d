import json
import math

import numpy as np
import pytest

from advscale.allocator import (
    LossAccuracyMap,
    asymptotic_loss,
    fit_loss_accuracy,
    frontier,
    load_loss_accuracy,
    optimal_allocation_v2,
    optimal_allocation_v3,
    overhead_curve,
    published_loss_accuracy,
)
from advscale.errors import DataError, InfeasibleError, ParseError, UsageError
from advscale.parametric import (
    Approach2Params,
    Approach3Params,
    loss_v2,
    loss_v3,
    published_params,
)
from advscale.run_data import (
    ND_COEFFICIENT,
    DatasetSpec,
    ModelSpec,
    Observation,
    RunRecord,
    training_flops,
)

P2 = published_params(2)
P3 = published_params(3)


@pytest.mark.parametrize("flops", [1e20, 1e25])
@pytest.mark.parametrize("fid", [0.0, 1.76, 7.1])
def test_v2_optimum_balances_term_decay(flops, fid):
    alloc = optimal_allocation_v2(flops, fid, P2)
    lhs = P2.alpha * P2.A * alloc.n_star**-P2.alpha
    rhs = P2.beta * P2.b_prime(fid) * alloc.d_star**-P2.beta
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert ND_COEFFICIENT * alloc.n_star * alloc.d_star == pytest.approx(flops, rel=1e-12)
    assert alloc.a + alloc.b == pytest.approx(1.0, abs=1e-12)


def test_v2_optimum_beats_nearby_allocations():
    alloc = optimal_allocation_v2(1e25, 1.76, P2)
    budget = 1e25 / ND_COEFFICIENT
    for scale in (0.5, 0.9, 1.1, 2.0):
        n = alloc.n_star * scale
        assert loss_v2(n, budget / n, 1.76, P2) > alloc.l_star


def test_v2_reproduces_published_allocation_table():
    clean = optimal_allocation_v2(1e25, 0.0, P2)
    assert clean.l_star == pytest.approx(0.5342, abs=5e-5)
    assert clean.a == pytest.approx(0.4894, abs=5e-5)
    assert clean.b == pytest.approx(0.5106, abs=5e-5)
    assert clean.g == pytest.approx(0.476555, abs=5e-7)

    dirty = optimal_allocation_v2(1e25, 1.76, P2)
    assert dirty.l_star == pytest.approx(0.6116, abs=5e-5)
    assert P2.e_prime(1.76) == pytest.approx(0.56466, abs=5e-6)
    assert P2.b_prime(1.76) == pytest.approx(7.4429, abs=5e-5)
    # Dirtier data shifts the split toward the model by shrinking the
    # dataset coefficient.
    assert dirty.n_star > clean.n_star
    assert dirty.d_star < clean.d_star


def test_v3_matches_closed_form_when_bottleneck_is_nulled():
    flat2 = Approach2Params(A=6.69, B=9.89, E=0.48, alpha=0.24, beta=0.23, epsilon=0.0, zeta=0.0)
    flat3 = Approach3Params(
        A=6.69,
        B=9.89 ** (1 / 0.23),
        E=0.48,
        Q=1e-30,
        alpha=0.24,
        beta=0.23,
        kappa=0.6,
        epsilon=0.0,
    )
    for flops in (1e22, 1e25):
        for fid in (0.0, 1.76):
            closed = optimal_allocation_v2(flops, fid, flat2)
            numeric = optimal_allocation_v3(flops, fid, flat3)
            assert numeric.n_star == pytest.approx(closed.n_star, rel=1e-6)
            assert numeric.l_star == pytest.approx(closed.l_star, rel=1e-12)
            assert numeric.a == pytest.approx(closed.a, abs=1e-6)
            assert not numeric.boundary_warning


def test_v3_reproduces_published_losses():
    assert optimal_allocation_v3(1e25, 0.0, P3).l_star == pytest.approx(0.5691, abs=5e-5)
    assert optimal_allocation_v3(1e25, 1.76, P3).l_star == pytest.approx(0.6463, abs=5e-5)


def test_v3_local_exponents_still_split_the_budget():
    alloc = optimal_allocation_v3(1e25, 1.76, P3)
    assert alloc.a + alloc.b == pytest.approx(1.0, abs=1e-9)
    assert ND_COEFFICIENT * alloc.n_star * alloc.d_star == pytest.approx(1e25, rel=1e-12)


def test_v3_flags_solutions_pinned_at_the_search_bounds():
    assert optimal_allocation_v3(1e40, 0.0, P3).boundary_warning
    assert not optimal_allocation_v3(1e25, 0.0, P3).boundary_warning


@pytest.mark.parametrize("approach", ["v2", "v3"])
def test_allocation_rejects_bad_inputs(approach):
    fn = optimal_allocation_v2 if approach == "v2" else optimal_allocation_v3
    params = P2 if approach == "v2" else P3
    with pytest.raises(UsageError):
        fn(0.0, 0.0, params)
    with pytest.raises(UsageError):
        fn(1e25, -1.0, params)


def test_overhead_scaling_preserves_the_loss():
    alloc = optimal_allocation_v2(1e25, 0.0, P2)
    points = overhead_curve(1e25, 0.0, P2, [0.25, 0.5, 1.0, 2.0])
    for point in points:
        rescaled = loss_v2(point.omega_n * alloc.n_star, point.omega_d * alloc.d_star, 0.0, P2)
        assert rescaled == pytest.approx(alloc.l_star, rel=1e-9)
    unit = points[2]
    assert unit.omega_d == pytest.approx(1.0, abs=1e-12)
    assert unit.overhead_pct == pytest.approx(0.0, abs=1e-9)


def test_overhead_reproduces_published_half_size_point():
    (point,) = overhead_curve(1e25, 0.0, P2, [0.5])
    assert point.omega_d == pytest.approx(2.289298, abs=5e-6)
    assert point.overhead_pct == pytest.approx(14.4649, abs=1e-3)
    assert 5.0 < point.overhead_pct < 20.0


def test_overhead_rejects_uncompensatable_downsizing():
    with pytest.raises(InfeasibleError):
        overhead_curve(1e25, 0.0, P2, [0.05])
    with pytest.raises(UsageError):
        overhead_curve(1e25, 0.0, P2, [0.5, 0.0])


def run_with_accuracy(run_id, pairs):
    """pairs: list of (trades_loss, adv_acc) in descending-loss order."""
    n = 36_500_000
    obs = tuple(
        Observation(
            samples_seen=(i + 1) * 10_000,
            train_flops=training_flops(n, (i + 1) * 10_000),
            trades_loss=loss,
            adv_acc=acc,
        )
        for i, (loss, acc) in enumerate(pairs)
    )
    return RunRecord(
        run_id=run_id,
        model=ModelSpec(name="wrn", depth=28, width=10, params_n=n),
        dataset=DatasetSpec(generator="g", fid=1.65, size_samples=len(pairs) * 10_000),
        hyper={},
        observations=obs,
    )


def test_loss_accuracy_fit_recovers_planted_line():
    line = lambda l: -0.7 * l + 1.2
    runs = [
        run_with_accuracy("r1", [(1.2, 0.1), (0.8, line(0.8))]),
        run_with_accuracy("r2", [(1.1, 0.2), (0.7, line(0.7))]),
        run_with_accuracy("r3", [(1.0, 0.3), (0.6, line(0.6))]),
        run_with_accuracy("r4", [(0.9, 0.15), (0.5, line(0.5))]),
    ]
    fit = fit_loss_accuracy(runs)
    # Only each run's best point feeds the fit, so the off-line early
    # observations cannot disturb it.
    assert fit.slope == pytest.approx(-0.7, abs=1e-12)
    assert fit.intercept == pytest.approx(1.2, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_loss_accuracy_fit_rejects_thin_or_flat_data():
    runs = [
        run_with_accuracy("r1", [(0.8, 0.6)]),
        run_with_accuracy("r2", [(0.7, 0.65)]),
    ]
    with pytest.raises(UsageError):
        fit_loss_accuracy(runs)
    flat = [run_with_accuracy(f"r{i}", [(0.8, 0.6)]) for i in range(3)]
    with pytest.raises(DataError):
        fit_loss_accuracy(flat)


def test_accuracy_map_validates_and_clamps():
    with pytest.raises(DataError):
        LossAccuracyMap(slope=0.1, intercept=0.0, r_squared=1.0)
    amap = LossAccuracyMap(slope=-0.5, intercept=1.0, r_squared=1.0)
    assert amap.predict(4.0) == 0.0
    assert amap.predict(-2.0) == 1.0
    assert amap.predict(4.0, clamp=False) == pytest.approx(-1.0)
    assert amap.predict(1.0) == pytest.approx(0.5)


def test_published_accuracy_map_and_clean_asymptote():
    amap = published_loss_accuracy()
    assert amap.slope == pytest.approx(-0.7496, abs=1e-6)
    assert amap.intercept == pytest.approx(1.2575, abs=1e-6)
    assert amap.r_squared == pytest.approx(0.98, abs=1e-3)
    assert amap.predict(asymptotic_loss(P2, 0.0)) == pytest.approx(0.897692, abs=5e-7)


def test_asymptotic_loss_formulas():
    assert asymptotic_loss(P2, 0.0) == pytest.approx(P2.E, rel=1e-15)
    assert asymptotic_loss(P2, 1.76) == pytest.approx(P2.e_prime(1.76), rel=1e-15)
    assert asymptotic_loss(P3, 0.0) == pytest.approx(P3.E, rel=1e-15)
    expected = (P3.Q * 1.76) ** P3.kappa + P3.E + math.log1p(1.76) * P3.epsilon
    assert asymptotic_loss(P3, 1.76) == pytest.approx(expected, rel=1e-15)


def test_frontier_orders_budgets_and_quality():
    amap = published_loss_accuracy()
    fids = [0.0, 1.76, 7.1]
    grid = list(np.geomspace(1e20, 1e28, 5))
    table = frontier(P2, amap, fids, grid)
    assert len(table.rows) == 15
    assert len(table.asymptotes) == 3

    by_fid = {fid: [r for r in table.rows if r.fid == fid] for fid in fids}
    for fid in fids:
        accs = [r.accuracy for r in by_fid[fid]]
        assert all(b >= a for a, b in zip(accs, accs[1:]))
    for row_clean, row_dirty in zip(by_fid[0.0], by_fid[7.1]):
        assert row_clean.accuracy > row_dirty.accuracy
    for asym in table.asymptotes:
        assert asym.accuracy_limit == pytest.approx(amap.predict(asym.loss_limit), rel=1e-15)
        matching = by_fid[asym.fid]
        assert all(r.accuracy <= asym.accuracy_limit + 1e-12 for r in matching)


def test_frontier_accepts_only_increasing_grids():
    amap = published_loss_accuracy()
    with pytest.raises(UsageError):
        frontier(P2, amap, [0.0], [1e20, 1e20, 1e22])
    with pytest.raises(UsageError):
        frontier(P3, amap, [0.0], [1e25, 1e22])


def test_accuracy_map_file_round_trip(tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps({"slope": -0.7, "intercept": 1.2, "r_squared": 0.97}))
    amap = load_loss_accuracy(path)
    assert (amap.slope, amap.intercept, amap.r_squared) == (-0.7, 1.2, 0.97)

    bad = tmp_path / "bad.json"
    bad.write_text('{"slope": -0.7}')
    with pytest.raises(ParseError):
        load_loss_accuracy(bad)
    bad.write_text("not json")
    with pytest.raises(ParseError):
        load_loss_accuracy(bad)
