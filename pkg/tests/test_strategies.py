import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gtslln.errors import ConfigurationError
from gtslln.game import FixedPath, RoundBet, SkepticStrategy, replay, run_game
from gtslln.hedges import (
    GeneralSymmetric,
    HedgePortfolio,
    LaplaceMeasure,
    PowerHedge,
    PriceLadder,
    build_ladder,
    bull_spread,
    spread_value,
    trapezoid_value,
)
from gtslln.reality import DeterministicPath, IIDSampler
from gtslln.strategies import (
    COUNTABLE_IDS,
    MZ_IDS,
    SINGLE_IDS,
    STRATEGY_IDS,
    CountableHedgeContext,
    MZContext,
    SingleHedgeContext,
    UpcrossingStrategy,
    build_strategy,
    generic_borel_cantelli,
    hedged_move,
    series_constant,
    trapezoid_divisor,
    weighted_bc_single,
)

ZETA2 = math.pi**2 / 6


# contexts


def test_series_constant_power_is_zeta():
    assert series_constant(PowerHedge(2.0)) == pytest.approx(ZETA2, rel=1e-14)
    assert series_constant(PowerHedge(2.0), offset=2) == pytest.approx(ZETA2 - 1.25, rel=1e-14)


def test_series_constant_log_squared_is_an_upper_bound():
    h = GeneralSymmetric.log_power(1.0, 2.0)
    c = series_constant(h, offset=2)
    n = np.arange(3, 10**6 + 3, dtype=float)
    partial = math.fsum(1 / (n * np.log(n) ** 2))
    assert partial < c < partial + 0.2


def test_series_constant_divergent_needs_horizon():
    with pytest.raises(ConfigurationError):
        series_constant(PowerHedge(1.0))
    assert series_constant(PowerHedge(1.0), horizon=4) == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 4)


def test_single_context_defaults(single_ctx):
    assert single_ctx.nu == pytest.approx(8 / 3)
    assert single_ctx.ceiling == pytest.approx(1 / (2 * (1 + 8 / 3)))
    assert single_ctx.epsilon == pytest.approx(0.9 * single_ctx.ceiling)


def test_contexts_reject_epsilon_above_ceiling(laplace):
    with pytest.raises(ConfigurationError):
        SingleHedgeContext(PowerHedge(2.0), 1.0, epsilon=0.3)
    with pytest.raises(ConfigurationError):
        CountableHedgeContext.from_measure(laplace, epsilon=0.25)
    with pytest.raises(ConfigurationError):
        MZContext.from_measure(laplace, 1.5, epsilon=0.25)
    with pytest.raises(ConfigurationError):
        SingleHedgeContext(PowerHedge(2.0), 0.0)


def test_mz_context_rejects_r_outside_open_interval(laplace):
    for r in (1.0, 2.0, 0.5):
        with pytest.raises(ConfigurationError):
            MZContext.from_measure(laplace, r)


# Borel-Cantelli on a single hedge


def test_bc_single_on_zeros(single_ctx):
    k = build_strategy("bc_single", single_ctx).trajectory(np.zeros(3)).capital
    want = [1.0] + [1 - sum(1 / i**2 for i in range(1, n + 1)) / ZETA2 for n in (1, 2, 3)]
    assert np.allclose(k, want, rtol=1e-14)
    assert np.all(np.diff(k) < 0) and k[-1] > 0


def test_bc_single_linear_growth_on_x_equal_n(single_ctx):
    s = build_strategy("bc_single", single_ctx)
    x = np.arange(1, 1001.0)
    k = s.trajectory(x).capital
    assert np.all(k[1:] >= np.arange(1, 1001) / (ZETA2 * single_ctx.nu) - 1e-12)


def test_weighted_bc_on_zeros_and_rejects_harmonic(single_ctx):
    k = weighted_bc_single(single_ctx).trajectory(np.zeros(4)).capital
    assert k[-1] == pytest.approx(1 - (1 + 1 / 4 + 1 / 9 + 1 / 16) / ZETA2)
    with pytest.raises(ConfigurationError):
        weighted_bc_single(single_ctx, power=1.0)


def test_weighted_bc_growth_on_x_equal_n(single_ctx):
    s = weighted_bc_single(single_ctx)
    k = s.trajectory(np.arange(1, 501.0)).capital
    assert np.all(k[1:] >= np.arange(1, 501) / (ZETA2 * single_ctx.nu) - 1e-12)


def test_generic_bc_with_spreads(countable_ctx):
    lad = countable_ctx.calls(300)
    s = generic_borel_cantelli(
        lambda n: bull_spread(lad, n - 1),
        lambda x, n: spread_value(np.abs(x), n - 1),
        lambda n: lad.prices[n.astype(int) - 1] - lad.prices[n.astype(int)],
        lad.nu(0),
    )
    assert s.check_summable(299) <= 1.0
    x = np.arange(1, 201.0)
    k = s.trajectory(x).capital
    assert np.all(k[1:] >= np.arange(1, 201) / lad.nu(0) - 1e-12)
    assert np.allclose(replay(s, x[:30]).capital, k[:31], rtol=1e-12)


def test_generic_bc_with_null_payoffs_is_constant():
    s = generic_borel_cantelli(lambda n: HedgePortfolio(), lambda x, n: np.zeros_like(x), lambda n: 0.0 * n, 1.0)
    assert np.all(s.trajectory(np.random.default_rng(0).normal(size=50)).capital == 1.0)


def test_generic_bc_rejects_overspending(countable_ctx):
    s = generic_borel_cantelli(lambda n: HedgePortfolio(), lambda x, n: 0 * x, lambda n: 1.0 / n, 1.0)
    with pytest.raises(ConfigurationError):
        s.check_summable(100)


def test_powered_spreads_total_price(mz_ctx):
    s = build_strategy("mz_e2r", mz_ctx)
    assert s.total_spend(400) <= 1.0
    assert s.divisor == pytest.approx(mz_ctx.ladder_1r.nu(0))


# epsilon strategies


def test_epsilon_single_on_zeros(single_ctx):
    s = build_strategy("epsilon_single_plus", single_ctx)
    k = s.trajectory(np.zeros(200)).capital
    eps, nu = single_ctx.epsilon, single_ctx.nu
    want = np.cumprod([1 - eps * nu / i**2 for i in range(1, 201)])
    assert np.allclose(k[1:], want, rtol=1e-13)
    assert k[-1] > 0


@pytest.mark.parametrize("h, c", [(PowerHedge(2.0), 0.0), (PowerHedge(1.5), 0.0), (GeneralSymmetric.log_power(), math.e)])
def test_single_factor_bound_on_adversarial_grid(h, c):
    ctx = SingleHedgeContext(h, 1.7, c=c, epsilon=None)
    ctx.epsilon = ctx.ceiling
    for sign in (1, -1):
        s = build_strategy("epsilon_single_plus" if sign == 1 else "epsilon_single_minus", ctx)
        for n in range(1, 51):
            a = n + ctx.offset
            xs = np.linspace(-a - 5, a + 5, 4001)
            y, _, _ = s.terms(xs[None, :], np.array([float(n)]))
            # terms() pairs column j with round j+1; evaluate round n directly
            yy = sign * xs / a + (ctx.h(xs) - ctx.nu) / float(ctx.h(a))
            assert np.min(1 + ctx.epsilon * yy) >= 0.5 - 1e-12


@given(
    x=st.floats(-1e4, 1e4),
    n=st.integers(1, 10**5),
    nu=st.floats(0.01, 50),
    frac=st.floats(0.01, 1.0),
    p=st.floats(1.01, 3.0),
)
def test_single_factor_bound_property(x, n, nu, frac, p):
    h = lambda t: abs(t) ** p
    c = frac / (2 * (1 + nu / h(1)))
    assert -c * abs(x) / n + c * (h(x) - nu) / h(n) >= -0.5 - 1e-12


def test_epsilon_sandwich_recomputed(single_ctx, rng):
    s = build_strategy("epsilon_single_minus", single_ctx)
    x = rng.choice([-2.0, 0.0, 2.0], size=5000)
    t = s.trajectory(x)
    n = np.arange(1, 5001.0)
    y = -x / n + (x**2 - single_ctx.nu) / n**2
    S, Q = np.cumsum(y), np.cumsum(y * y)
    eps = single_ctx.epsilon
    logk = np.log(t.capital[1:])
    assert np.all(logk <= eps * S + 1e-9)
    assert np.all(logk >= eps * S - eps**2 * Q - 1e-9)


def test_hedged_move_examples(countable_ctx):
    lad = countable_ctx.calls(10)
    assert hedged_move(-7.0, 5, lad) == (-5.0, lad.nu(5))
    assert hedged_move(3.0, 5, lad)[0] == 3.0
    assert hedged_move(7.0, 5, lad)[0] == 9.0
    assert hedged_move(7.0, 5, lad, mirror=True)[0] == -5.0


@given(x=st.floats(-1e4, 1e4), n=st.integers(1, 60))
def test_hedged_move_lower_bound(x, n):
    lad = build_ladder(LaplaceMeasure(1.0), "call", 64)
    for mirror in (False, True):
        assert hedged_move(x, n, lad, mirror)[0] >= -n - 1e-12


def test_e4prime_on_zeros_converges_to_positive_limit(countable_ctx):
    s = build_strategy("e4prime_plain", countable_ctx)
    k = s.trajectory(np.zeros(2000)).capital
    eps = countable_ctx.epsilon
    want = np.prod([1 - eps * math.exp(-i) / i for i in range(1, 2001)])
    assert k[-1] == pytest.approx(want, rel=1e-12)
    assert abs(k[-1] - k[1000]) < 1e-300 + 1e-15


def test_e4prime_factor_bound(countable_ctx):
    eps = countable_ctx.ceiling
    lad = countable_ctx.calls(60)
    for n in range(1, 51):
        xs = np.linspace(-3 * n, 3 * n, 6001)
        for mirror in (False, True):
            v, nu = hedged_move(xs, n, lad, mirror)
            assert np.min(eps / n * (v - nu)) >= -eps * (1 + countable_ctx.nu0) - 1e-12 >= -0.5 - 1e-12


@pytest.mark.parametrize("denominator", ["root", "linear"])
def test_mz_factor_bound(laplace, denominator):
    ctx = MZContext.from_measure(laplace, 1.5, denominator=denominator)
    s = build_strategy("mz_e4r_plain", ctx)
    eps = ctx.ceiling
    lad = ctx.roots(60)
    for n in range(1, 51):
        xs = np.linspace(-3 * n, 3 * n, 6001)
        for mirror in (False, True):
            v, nu = hedged_move(xs, n, lad, mirror)
            assert np.min(eps / float(s.denom(n)) * (v - nu)) >= -0.5


def test_mz_sandwich(mz_ctx, rng):
    for sid in ("mz_e4r_plain", "mz_e4r_mirror"):
        s = build_strategy(sid, mz_ctx)
        x = rng.laplace(size=3000)
        t = s.trajectory(x)
        up, lo = s.log_sandwich(x)
        assert np.all(t.log_k <= up + 1e-9) and np.all(t.log_k >= lo - 1e-9)


# trapezoid forcers


def test_trapezoid_dominance_grid():
    xs = np.linspace(-60, 60, 120001)
    t = np.abs(xs)
    acc = np.zeros_like(xs)
    for k in range(50):
        acc += (k + 1) ** 2 * trapezoid_value(t, k)
        n = k + 1
        assert np.all(acc >= np.where(t <= n, xs**2, 0.0) - 1e-9)


def test_e3_budget_and_zeros(three_point, laplace):
    for m in (three_point, laplace):
        ctx = CountableHedgeContext.from_measure(m)
        s = build_strategy("e3_forcer", ctx)
        assert s.total_spend(5000) <= 1.0
        assert s.trajectory(np.zeros(5000)).capital.min() >= 0


def test_e3_divisor_covers_small_scale_measure():
    from gtslln.hedges import DiscreteMeasure

    m = DiscreteMeasure.uniform([-0.2, 0.0, 0.2])
    ctx = CountableHedgeContext.from_measure(m)
    s = build_strategy("e3_forcer", ctx)
    spend = s.total_spend(2000) * s.divisor
    assert spend > 6 * ctx.nu0  # the classical constant is too small here
    assert spend <= trapezoid_divisor(ctx.nu0, 2.0)


def test_e2_on_x_equal_n(countable_ctx):
    s = build_strategy("e2_forcer", countable_ctx)
    k = s.trajectory(np.arange(1, 101.0)).capital
    assert np.all(k[1:] >= np.arange(1, 101) / countable_ctx.nu0 - 1e-12)
    z = s.trajectory(np.zeros(100)).capital
    assert z.min() >= 0 and z[-1] >= 1 - 1.0


def test_literal_mz_weights_break_the_budget(laplace):
    ok = build_strategy("mz_e3r", MZContext.from_measure(laplace, 1.5))
    lit = build_strategy("mz_e3r", MZContext.from_measure(laplace, 1.5, weight_exponent=2.0))
    assert ok.total_spend(20000) <= 1.0
    assert lit.total_spend(20000) > 1.0


def test_ladder_too_short_without_source():
    ctx = CountableHedgeContext(PriceLadder("call", np.exp(-np.arange(8.0))))
    with pytest.raises(ConfigurationError):
        build_strategy("e3_forcer", ctx).trajectory(np.zeros(20))


# routes and proof bounds


ALL = [(SINGLE_IDS, "single_ctx"), (COUNTABLE_IDS, "countable_ctx"), (MZ_IDS, "mz_ctx")]


@pytest.mark.parametrize("ids, fixture", ALL)
def test_fast_route_matches_engine(ids, fixture, request, rng):
    ctx = request.getfixturevalue(fixture)
    x = rng.laplace(size=150) * 1.5
    x[[10, 40, 90]] = [30.0, -60.0, 140.0]
    for sid in ids:
        s = build_strategy(sid, ctx)
        fast, slow = s.trajectory(x), replay(s, x)
        assert np.allclose(fast.capital, slow.capital, rtol=1e-12, atol=1e-13), sid
        assert np.allclose(fast.stakes, slow.stakes, rtol=1e-12, atol=1e-15), sid
        assert np.allclose(fast.costs, slow.costs, rtol=1e-10, atol=1e-15), sid


def test_additive_routes_agree_to_rounding(single_ctx, rng):
    x = rng.normal(size=400)
    s = build_strategy("bc_single", single_ctx)
    assert np.allclose(s.trajectory(x).capital, replay(s, x).capital, rtol=1e-14, atol=0)


def test_batched_fast_route_matches_rows(countable_ctx, rng):
    x = rng.laplace(size=(3, 200))
    s = build_strategy("theorem2", countable_ctx)
    both = s.trajectory(x)
    for i in range(3):
        assert np.array_equal(both.capital[i], s.trajectory(x[i]).capital)


@pytest.mark.parametrize(
    "sid, fixture",
    [("bc_single", "single_ctx"), ("weighted_bc_single", "single_ctx"), ("e2_forcer", "countable_ctx"),
     ("e3_forcer", "countable_ctx"), ("mz_e2r", "mz_ctx"), ("mz_e3r", "mz_ctx")],
)
def test_proof_lower_bound_every_round(sid, fixture, request, rng):
    s = build_strategy(sid, request.getfixturevalue(fixture))
    x = rng.laplace(size=(4, 3000)) * rng.choice([0.5, 3.0, 30.0], size=(4, 1))
    t = s.trajectory(x)
    lb = s.lower_bound(x)
    assert np.all(t.capital >= lb - 1e-7 * np.maximum(1, lb))


def test_registry():
    assert len(set(STRATEGY_IDS)) == len(STRATEGY_IDS)
    with pytest.raises(ConfigurationError):
        build_strategy("theorem9")
    with pytest.raises(ConfigurationError):
        build_strategy("e3_forcer", None)


def test_single_strategies_play_the_single_protocol(single_ctx):
    run = run_game(build_strategy("theorem1", single_ctx), FixedPath([1.0, -3.0, 0.5]), 3)
    assert all(len(b.portfolio) == 1 for b in run.history.bets)


# upcrossings


class Const(SkepticStrategy):
    def bet(self, history):
        return RoundBet(1.0)


def test_upcrossing_gain_on_oscillating_target():
    # target capital: 1 -> 0.4 -> 1.6 -> 0.4 -> 1.6 -> 0.4 -> 1.6
    x = np.array([-0.6, 1.2, -1.2, 1.2, -1.2, 1.2])
    u = UpcrossingStrategy(Const(), 0.5, 1.5, initial_capital=0.5)
    k = replay(u, x).capital
    assert k[-1] - 0.5 >= 3 * (1.5 - 0.5) - 1e-12
    assert np.allclose(u.trajectory(x).capital, k)


def test_upcrossing_monotone_and_constant_targets():
    down = np.full(5, -0.19)
    u = UpcrossingStrategy(Const(), 0.5, 1.5, initial_capital=0.5)
    assert u.trajectory(down).capital[-1] - 0.5 >= -0.5 - 1e-12
    assert np.all(u.trajectory(np.zeros(10)).capital == 0.5)


def test_upcrossing_validates_levels():
    with pytest.raises(ConfigurationError):
        UpcrossingStrategy(Const(), 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        UpcrossingStrategy(Const(), 1.0, 2.0, initial_capital=0.5)


def test_upcrossing_overlay_is_collateral_safe(single_ctx):
    target = build_strategy("theorem1", single_ctx)
    u = UpcrossingStrategy(target, 0.6, 0.9)
    for seed in range(5):
        x = IIDSampler(LaplaceMeasure(1.0), seed).path(20000)
        assert u.trajectory(x).capital.min() >= -1e-9
