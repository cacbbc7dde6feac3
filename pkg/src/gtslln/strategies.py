"""Skeptic's forcing strategies.

Three families, each with a generic (per-round bet) route and a vectorised
route over whole paths:

* single hedge ``h`` with price ``nu``: Borel-Cantelli type bets on ``h``
  and the multiplicative epsilon strategies, mixed in :func:`theorem1_strategy`;
* the call-option ladder ``(|x| - k)_+``: bull spreads, trapezoid stacks and
  epsilon bets on the hedged move, mixed in :func:`theorem2_strategy`;
* the Marcinkiewicz-Zygmund ladders for ``1 < r < 2``, mixed in
  :func:`theorem5_strategy`.

Borel-Cantelli strategies start from capital 1 and never spend more than
that in total; epsilon strategies keep every capital factor at least 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import zeta

from . import kernels
from .errors import ConfigurationError
from .game import (
    NULL_BET,
    GameConfig,
    Mixture,
    RoundBet,
    SkepticStrategy,
    Trajectory,
    combine_strategies,
)
from .hedges import (
    GeneralSymmetric,
    HedgeKind,
    HedgePortfolio,
    PowerHedge,
    PricedHedge,
    PriceLadder,
    PricingMeasure,
    Call,
    PoweredCall,
    build_ladder,
    bull_spread,
    eval_hedge,
    price_hedge,
    spread_value,
    trapezoid,
    validate_single_hedge,
)

SERIES_TERMS = 10**6


def hedge_from_config(cfg: dict) -> HedgeKind:
    kind = cfg.get("kind")
    if kind == "power":
        return PowerHedge(float(cfg.get("exponent", 2.0)))
    if kind == "log_power":
        return GeneralSymmetric.log_power(float(cfg.get("power", 1.0)), float(cfg.get("log_power", 2.0)))
    if kind == "call":
        return Call(float(cfg.get("strike", 0.0)))
    if kind == "powered_call":
        return PoweredCall(float(cfg["r"]), int(cfg.get("level", 0)))
    raise ConfigurationError(f"hedge.kind: unknown kind {kind!r}")


def series_constant(h: HedgeKind, offset: int = 0, horizon: Optional[int] = None) -> float:
    """Upper bound for ``sum_{n >= 1} 1/h(n + offset)``.

    With ``horizon`` the sum stops there (the only option when the series
    diverges). Otherwise: Hurwitz zeta for powers, else a partial sum to
    ``SERIES_TERMS`` plus the integral bound on the tail.
    """
    if horizon is not None:
        n = np.arange(1, horizon + 1, dtype=float) + offset
        hv = np.asarray(eval_hedge(h, n), dtype=float)
        if np.any(hv <= 0):
            raise ConfigurationError(f"h(n) must be > 0 beyond c (offset {offset})")
        return math.fsum(1.0 / hv)
    report = validate_single_hedge(h, float(offset))
    if report.a3 != "pass":
        raise ConfigurationError(f"sum 1/h(n) does not converge for {h.label}; give a truncation horizon")
    if isinstance(h, PowerHedge):
        return float(zeta(h.exponent, offset + 1.0))
    n = np.arange(1, SERIES_TERMS + 1, dtype=float) + offset
    hv = np.asarray(eval_hedge(h, n), dtype=float)
    if np.any(hv <= 0):
        raise ConfigurationError(f"h(n) must be > 0 beyond c (offset {offset})")
    partial = math.fsum(1.0 / hv)
    top = float(n[-1])
    if isinstance(h, GeneralSymmetric) and h.closed_form is not None and h.closed_form[0] == 1.0:
        q = h.closed_form[1]
        tail = math.log(top) ** (1.0 - q) / (q - 1.0)
    else:
        tail, _ = integrate.quad(lambda t: 1.0 / float(eval_hedge(h, t)), top, np.inf, limit=200)
    return partial + tail


# --------------------------------------------------------------------------
# contexts


@dataclass
class SingleHedgeContext:
    """Single hedge ``h`` at price ``nu``.

    ``c`` is the constant of conditions (A1)-(A3); round n uses the index
    ``a_n = n + ceil(c)``. ``horizon`` truncates the series constant C (for
    hedges whose ``sum 1/h(n)`` diverges). ``epsilon`` defaults to 0.9 times
    the ceiling ``1 / (2 (1 + nu / h(a_1)))``.
    """

    hedge: HedgeKind
    nu: float
    c: float = 0.0
    epsilon: Optional[float] = None
    horizon: Optional[int] = None
    enforce_ceiling: bool = True
    weight_power: float = 2.0
    offset: int = field(init=False)
    C: float = field(init=False)
    C_weighted: float = field(init=False)
    ceiling: float = field(init=False)
    priced: PricedHedge = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ConfigurationError(f"nu must be a finite positive price, got {self.nu!r}")
        if self.c < 0:
            raise ConfigurationError("c must be >= 0")
        if not self.weight_power > 1:
            raise ConfigurationError(f"weight_power must be > 1 (sum n^-p diverges for p={self.weight_power})")
        self.offset = int(math.ceil(self.c))
        h1 = float(eval_hedge(self.hedge, 1.0 + self.offset))
        if not h1 > 0:
            raise ConfigurationError("h must be positive at the first index; raise c")
        self.ceiling = 1.0 / (2.0 * (1.0 + self.nu / h1))
        if self.epsilon is None:
            self.epsilon = 0.9 * self.ceiling
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.enforce_ceiling and self.epsilon > self.ceiling:
            raise ConfigurationError(f"epsilon={self.epsilon!r} exceeds the ceiling {self.ceiling!r}")
        self.C = series_constant(self.hedge, self.offset, self.horizon)
        self.C_weighted = float(zeta(self.weight_power, 1.0))
        self.priced = PricedHedge(self.hedge, float(self.nu))

    @classmethod
    def from_measure(cls, hedge: HedgeKind, measure: PricingMeasure, **kw) -> "SingleHedgeContext":
        return cls(hedge, price_hedge(measure, hedge), **kw)

    def index(self, n):
        return np.asarray(n, dtype=float) + self.offset

    def h(self, x):
        return np.asarray(eval_hedge(self.hedge, x), dtype=float)

    def game_config(self) -> GameConfig:
        return GameConfig(protocol="single", hedge=self.priced)


class _LazyLadder:
    """A ladder that grows (from its source measure) when deeper prices are needed."""

    def __init__(self, ladder: PriceLadder):
        self.ladder = ladder

    def ensure(self, depth: int) -> PriceLadder:
        if depth > self.ladder.depth:
            self.ladder = self.ladder.extended(depth)
        return self.ladder


@dataclass
class CountableHedgeContext:
    """Call-option ladder ``nu_k`` and the epsilon of the hedged-move bets."""

    ladder: PriceLadder
    epsilon: Optional[float] = None
    enforce_ceiling: bool = True
    ceiling: float = field(init=False)

    def __post_init__(self):
        if self.ladder.family != "call":
            raise ConfigurationError("CountableHedgeContext needs a call ladder")
        self._lazy = _LazyLadder(self.ladder)
        self.nu0 = float(self.ladder.nu(0))
        if not self.nu0 > 0:
            raise ConfigurationError("nu_0 must be > 0")
        self.ceiling = 1.0 / (2.0 * (1.0 + self.nu0))
        if self.epsilon is None:
            self.epsilon = 0.9 * self.ceiling
        if self.enforce_ceiling and not 0 < self.epsilon < self.ceiling:
            raise ConfigurationError(f"epsilon must lie in (0, {self.ceiling!r}), got {self.epsilon!r}")

    @classmethod
    def from_measure(cls, measure: PricingMeasure, depth: int = 64, **kw) -> "CountableHedgeContext":
        return cls(build_ladder(measure, "call", depth), **kw)

    def calls(self, depth: int) -> PriceLadder:
        return self._lazy.ensure(depth)


@dataclass
class MZContext:
    """Ladders for ``1 < r < 2``: powered calls on ``|x|**r`` and calls at strikes ``k**(1/r)``.

    ``denominator`` selects the epsilon bet's scale: ``"root"`` (n**(1/r),
    default) or ``"linear"`` (n). ``weight_exponent`` is the trapezoid
    weight exponent, default 2/r; 2 gives the literal (k+1)**2 weights,
    whose total price is not covered by the divisor.
    """

    r: float
    ladder_1r: PriceLadder
    ladder_2r: PriceLadder
    epsilon: Optional[float] = None
    denominator: str = "root"
    weight_exponent: Optional[float] = None
    enforce_ceiling: bool = True
    ceiling: float = field(init=False)

    def __post_init__(self):
        if not 1.0 < self.r < 2.0:
            raise ConfigurationError(f"r must lie in (1, 2), got {self.r!r}")
        if self.ladder_1r.family != "powered_call" or self.ladder_1r.r != self.r:
            raise ConfigurationError("ladder_1r must be a powered_call ladder with the same r")
        if self.ladder_2r.family != "root_call" or self.ladder_2r.r != self.r:
            raise ConfigurationError("ladder_2r must be a root_call ladder with the same r")
        if self.denominator not in ("root", "linear"):
            raise ConfigurationError(f"denominator: expected 'root' or 'linear', got {self.denominator!r}")
        if self.weight_exponent is None:
            self.weight_exponent = 2.0 / self.r
        self._lazy1 = _LazyLadder(self.ladder_1r)
        self._lazy2 = _LazyLadder(self.ladder_2r)
        self.nu0 = float(self.ladder_2r.nu(0))
        self.nu0r = float(self.ladder_1r.nu(0))
        if not (self.nu0 > 0 and self.nu0r > 0):
            raise ConfigurationError("nu_0 and nu_0r must be > 0")
        self.ceiling = 1.0 / (2.0 * (1.0 + self.nu0))
        if self.epsilon is None:
            self.epsilon = 0.9 * self.ceiling
        if self.enforce_ceiling and not 0 < self.epsilon < self.ceiling:
            raise ConfigurationError(f"epsilon must lie in (0, {self.ceiling!r}), got {self.epsilon!r}")

    @classmethod
    def from_measure(cls, measure: PricingMeasure, r: float, depth: int = 64, **kw) -> "MZContext":
        return cls(r, build_ladder(measure, "powered_call", depth, r=r),
                   build_ladder(measure, "root_call", depth, r=r), **kw)

    def powered(self, depth: int) -> PriceLadder:
        return self._lazy1.ensure(depth)

    def roots(self, depth: int) -> PriceLadder:
        return self._lazy2.ensure(depth)


# --------------------------------------------------------------------------
# helpers for the vectorised route


def _rounds(moves):
    m = np.asarray(moves, dtype=float)
    if m.ndim not in (1, 2):
        raise ConfigurationError("moves must be 1-D (one run) or 2-D (runs x rounds)")
    flat = m.ndim == 1
    m2 = np.ascontiguousarray(np.atleast_2d(m))
    n = np.arange(1, m2.shape[1] + 1, dtype=float)
    return m2, n, flat


def _pack(flat, moves, stakes, costs, capital, log_capital=None) -> Trajectory:
    stakes = np.broadcast_to(stakes, moves.shape).copy()
    costs = np.broadcast_to(costs, moves.shape).copy()
    if flat:
        return Trajectory(moves[0], stakes[0], costs[0], capital[0], None if log_capital is None else log_capital[0])
    return Trajectory(moves, stakes, costs, capital, log_capital)


def _running(values: np.ndarray) -> np.ndarray:
    """Prefix sums with a leading 0 column."""
    out = np.zeros((values.shape[0], values.shape[1] + 1))
    np.cumsum(values, axis=1, out=out[:, 1:])
    return out


def _flatten(a, flat):
    return a[0] if flat else a


class NullStrategy(SkepticStrategy):
    name = "null"

    def bet(self, history):
        return NULL_BET

    def _fast(self, moves):
        m, n, flat = _rounds(moves)
        return _pack(flat, m, 0.0, 0.0, np.ones((m.shape[0], m.shape[1] + 1)))


# --------------------------------------------------------------------------
# Borel-Cantelli type (additive) strategies


class _Additive(SkepticStrategy):
    """Capital ``1 + sum_i (g_i(x_i) - p_i) / D``; subclasses give g, p and D."""

    divisor = 1.0

    def payoff_price(self, m: np.ndarray, n: np.ndarray):
        raise NotImplementedError

    def _fast(self, moves):
        m, n, flat = _rounds(moves)
        g, p = self.payoff_price(m, n)
        inc = (g - p) / self.divisor
        cap = kernels.kahan_cumsum(self.initial_capital, inc)
        return _pack(flat, m, 0.0, p / self.divisor, cap)

    def payoff_bound(self, moves) -> np.ndarray:
        """``(1/D) sum_{i<=n} g_i(x_i)``: capital minus unspent budget."""
        m, n, flat = _rounds(moves)
        g, _ = self.payoff_price(m, n)
        return _flatten(_running(g / self.divisor), flat)

    def total_spend(self, horizon: int) -> float:
        n = np.arange(1, horizon + 1, dtype=float)
        _, p = self.payoff_price(np.zeros((1, horizon)), n)
        return math.fsum(np.broadcast_to(p, (1, horizon))[0]) / self.divisor


class BorelCantelliSingle(_Additive):
    """``M_n = 0``, ``V_n = 1 / (C nu h(a_n))``.

    Capital: ``K_n = 1 - (1/C) sum 1/h(a_i) + (1/(C nu)) sum h(x_i)/h(a_i)``.
    """

    name = "bc_single"

    def __init__(self, ctx: SingleHedgeContext):
        self.ctx = ctx
        self.divisor = ctx.C * ctx.nu

    def game_config(self):
        return self.ctx.game_config()

    def units(self, n):
        return 1.0 / (self.divisor * self.ctx.h(self.ctx.index(n)))

    def bet(self, history):
        n = history.n + 1
        return RoundBet(0.0, HedgePortfolio(((self.ctx.priced, float(self.units(n))),)))

    def payoff_price(self, m, n):
        ha = self.ctx.h(self.ctx.index(n))
        return self.ctx.h(m) / ha, self.ctx.nu / ha

    def lower_bound(self, moves):
        """``(1/(C nu)) sum_{i<=n} h(x_i)/h(a_i)``."""
        return self.payoff_bound(moves)


class WeightedBorelCantelli(_Additive):
    """``V_n = n**-p / (C' nu)`` with ``C' = zeta(p)``; bound ``(1/(C' nu)) sum h(x_i)/i**p``."""

    name = "weighted_bc_single"

    def __init__(self, ctx: SingleHedgeContext, power: Optional[float] = None):
        p = ctx.weight_power if power is None else float(power)
        if not p > 1:
            raise ConfigurationError(f"weights n^-{p:g} are not summable")
        self.ctx = ctx
        self.power = p
        self.divisor = float(zeta(p, 1.0)) * ctx.nu

    def game_config(self):
        return self.ctx.game_config()

    def bet(self, history):
        n = history.n + 1
        return RoundBet(0.0, HedgePortfolio(((self.ctx.priced, float(n) ** -self.power / self.divisor),)))

    def payoff_price(self, m, n):
        w = n**-self.power
        return self.ctx.h(m) * w, self.ctx.nu * w

    def lower_bound(self, moves):
        return self.payoff_bound(moves)


class GenericBorelCantelli(_Additive):
    """Buys ``g_n / total`` at round n, where ``sum_n price(g_n) <= total``.

    ``portfolio_fn(n)`` gives ``g_n`` as a portfolio (generic route);
    ``payoff_fn(x, n)`` and ``price_fn(n)`` give its payoff and price on
    arrays (vectorised route).
    """

    def __init__(self, portfolio_fn: Callable[[int], HedgePortfolio], payoff_fn, price_fn, total: float,
                 name: str = "generic_bc"):
        if not (math.isfinite(total) and total > 0):
            raise ConfigurationError(f"total price must be finite and > 0, got {total!r}")
        self.portfolio_fn = portfolio_fn
        self.payoff_fn = payoff_fn
        self.price_fn = price_fn
        self.divisor = float(total)
        self.name = name

    def bet(self, history):
        return RoundBet(0.0, self.portfolio_fn(history.n + 1).scaled(1.0 / self.divisor))

    def payoff_price(self, m, n):
        return self.payoff_fn(m, n), self.price_fn(n)

    def check_summable(self, depth: int) -> float:
        """Spend over ``depth`` rounds; raises if it exceeds the declared total."""
        spent = self.total_spend(depth)
        if spent > 1.0 + 1e-12:
            raise ConfigurationError(f"prices over {depth} rounds sum to {spent * self.divisor!r} > total {self.divisor!r}")
        return spent


def generic_borel_cantelli(portfolio_fn, payoff_fn, price_fn, total: float, name: str = "generic_bc"):
    return GenericBorelCantelli(portfolio_fn, payoff_fn, price_fn, total, name)


class _SpreadForcer(_Additive):
    """Bull spread of level ``n-1`` on round n; total price ``nu_0`` of the ladder.

    Forces finitely many ``u(x_n) >= n`` where u is the ladder's underlying.
    """

    def _ladder(self, depth: int) -> PriceLadder:
        raise NotImplementedError

    def bet(self, history):
        n = history.n + 1
        return RoundBet(0.0, bull_spread(self._ladder(n), n - 1).scaled(1.0 / self.divisor))

    def payoff_price(self, m, n):
        lad = self._ladder(int(n[-1]))
        k = n.astype(np.int64) - 1
        prices = lad.prices[k] - lad.prices[k + 1]
        return spread_value(lad.underlying(m), n - 1.0), prices

    def lower_bound(self, moves):
        """``(1/nu_0) sum_{i<=n} I(u(x_i) >= i)``."""
        m, n, flat = _rounds(moves)
        lad = self._ladder(int(n[-1]))
        ind = (lad.underlying(m) >= n).astype(float)
        return _flatten(_running(ind / self.divisor), flat)


class E2Forcer(_SpreadForcer):
    name = "e2_forcer"

    def __init__(self, ctx: CountableHedgeContext):
        self.ctx = ctx
        self.divisor = ctx.nu0

    def _ladder(self, depth):
        return self.ctx.calls(depth + 1)


class MZE2rForcer(_SpreadForcer):
    name = "mz_e2r"

    def __init__(self, ctx: MZContext):
        self.ctx = ctx
        self.divisor = ctx.nu0r

    def _ladder(self, depth):
        return self.ctx.powered(depth + 1)


def trapezoid_divisor(nu0: float, p: float) -> float:
    """Bound on ``sum_n n**-p sum_{k<n} (k+1)**p mu_k`` for ``1 < p <= 2``.

    ``sum_{n>k} n**-p <= 2**(p-1)/(p-1) * (k+1)**(1-p)`` and
    ``sum_k (k+1) mu_k = 1 + 2 nu_0``; the ``3 nu_0`` term keeps the
    classical constant when ``nu_0 >= 1``.
    """
    c_p = 2.0 ** (p - 1.0) / (p - 1.0)
    return c_p * max(3.0 * nu0, 1.0 + 2.0 * nu0)


class _TrapezoidForcer(_Additive):
    """Round n buys ``(k+1)**w / (D n**p)`` trapezoids ``T_k`` for ``k < n``.

    Payoff dominates ``x**2 I(u(x) <= n) / (D n**p)`` (u the underlying).
    """

    weight = 2.0
    power = 2.0

    def _ladder(self, depth: int) -> PriceLadder:
        raise NotImplementedError

    def bet(self, history):
        n = history.n + 1
        lad = self._ladder(n + 2)
        scale = 1.0 / (self.divisor * float(n) ** self.power)
        pairs = []
        for k in range(n):
            u = (k + 1.0) ** self.weight * scale
            pairs.extend((h, u * v) for h, v in trapezoid(lad, k).entries)
        return RoundBet(0.0, HedgePortfolio.of(pairs))

    def round_prices(self, horizon: int) -> np.ndarray:
        """``P_n = sum_{k<n} (k+1)**w mu_k`` for ``n = 1..horizon``."""
        lad = self._ladder(horizon + 2)
        mu = lad.mu_array(horizon)
        return np.cumsum((np.arange(1, horizon + 1, dtype=float) ** self.weight) * mu)

    def payoff_price(self, m, n):
        horizon = int(n[-1])
        lad = self._ladder(horizon + 2)
        g = kernels.trapezoid_sums(lad.underlying(m), self.weight)
        d = n**self.power
        return g / d, self.round_prices(horizon) / d

    def lower_bound(self, moves):
        """``(1/D) sum_{i<=n} x_i**2 I(u(x_i) <= i) / i**p``."""
        m, n, flat = _rounds(moves)
        lad = self._ladder(int(n[-1]) + 2)
        term = np.where(lad.underlying(m) <= n, m * m, 0.0) / n**self.power
        return _flatten(_running(term / self.divisor), flat)


class E3Forcer(_TrapezoidForcer):
    """Weights ``(k+1)**2 / n**2``; divisor ``max(6 nu_0, 2 + 4 nu_0)``."""

    name = "e3_forcer"

    def __init__(self, ctx: CountableHedgeContext):
        self.ctx = ctx
        self.divisor = trapezoid_divisor(ctx.nu0, 2.0)

    def _ladder(self, depth):
        return self.ctx.calls(depth)


class MZE3rForcer(_TrapezoidForcer):
    """Trapezoids on ``|x|**r`` with weights ``(k+1)**w / n**(2/r)``.

    With the default ``w = 2/r`` the divisor ``c_p max(3 nu_0r, 1 + 2 nu_0r)``
    (``p = 2/r``) covers the total price. With ``w = 2`` the divisor is
    ``B_r nu_0r``, ``B_r = 3 2**(p-1)/(p-1)``, which does not.
    """

    name = "mz_e3r"

    def __init__(self, ctx: MZContext):
        self.ctx = ctx
        self.power = 2.0 / ctx.r
        self.weight = float(ctx.weight_exponent)
        if self.weight == self.power:
            self.divisor = trapezoid_divisor(ctx.nu0r, self.power)
        else:
            self.divisor = 3.0 * 2.0 ** (self.power - 1.0) / (self.power - 1.0) * ctx.nu0r

    def _ladder(self, depth):
        return self.ctx.powered(depth)


# --------------------------------------------------------------------------
# epsilon (multiplicative) strategies


class _Multiplicative(SkepticStrategy):
    """``K_n = K_{n-1} (1 + eps y_n)`` with ``y_n = s x_n / d_n + (g_n(x_n) - p_n) / e_n``.

    Subclasses give the per-round quantities; the bet is ``M_n = s eps K / d_n``
    and ``eps K / e_n`` units of the round's hedge.
    """

    sign = 1.0
    epsilon = 0.1

    def terms(self, m, n):
        """``(y, 1/d, price/e)`` on arrays."""
        raise NotImplementedError

    def hedge_for(self, n: int):
        """``(PricedHedge, 1/e_n, 1/d_n)`` for the generic route."""
        raise NotImplementedError

    def bet(self, history):
        n = history.n + 1
        k = history.last_capital
        hedge, inv_e, inv_d = self.hedge_for(n)
        return RoundBet(self.sign * self.epsilon * k * inv_d,
                        HedgePortfolio(((hedge, self.epsilon * k * inv_e),)))

    def factors(self, moves) -> np.ndarray:
        m, n, flat = _rounds(moves)
        y, _, _ = self.terms(m, n)
        return _flatten(self.epsilon * y, flat)

    def _fast(self, moves):
        m, n, flat = _rounds(moves)
        y, inv_d, cost = self.terms(m, n)
        f = self.epsilon * y
        cap = kernels.product_capital(self.initial_capital, f)
        logk = np.empty_like(cap)
        logk[:, 0] = math.log(self.initial_capital)
        with np.errstate(divide="ignore", invalid="ignore"):
            np.cumsum(np.log1p(f), axis=1, out=logk[:, 1:])
        logk[:, 1:] += logk[:, :1]
        kprev = cap[:, :-1]
        with np.errstate(invalid="ignore"):
            # overflowed capital times a price that underflowed to 0
            costs = np.where(cost == 0.0, 0.0, self.epsilon * kprev * cost)
        return _pack(flat, m, self.sign * self.epsilon * kprev * inv_d, costs, cap, logk)

    def log_sandwich(self, moves):
        """``(upper, lower)`` with ``upper = log K_0 + eps S_n`` and ``lower = upper - eps**2 Q_n``."""
        m, n, flat = _rounds(moves)
        y, _, _ = self.terms(m, n)
        s = _running(y)
        q = _running(y * y)
        upper = math.log(self.initial_capital) + self.epsilon * s
        return _flatten(upper, flat), _flatten(upper - self.epsilon**2 * q, flat)


class EpsilonSingle(_Multiplicative):
    """Factor ``1 + s eps x/a_n + eps (h(x) - nu)/h(a_n)``; s = +1 or -1."""

    def __init__(self, ctx: SingleHedgeContext, sign: int = 1, epsilon: Optional[float] = None):
        if sign not in (1, -1):
            raise ConfigurationError("sign must be +1 or -1")
        self.ctx = ctx
        self.sign = float(sign)
        self.epsilon = float(ctx.epsilon if epsilon is None else epsilon)
        if ctx.enforce_ceiling and not 0 < self.epsilon <= ctx.ceiling:
            raise ConfigurationError(f"epsilon={self.epsilon!r} outside (0, {ctx.ceiling!r}]")
        self.name = "epsilon_single_" + ("plus" if sign == 1 else "minus")

    def game_config(self):
        return self.ctx.game_config()

    def terms(self, m, n):
        a = self.ctx.index(n)
        ha = self.ctx.h(a)
        y = self.sign * m / a + (self.ctx.h(m) - self.ctx.nu) / ha
        return y, 1.0 / a, self.ctx.nu / ha

    def hedge_for(self, n):
        a = float(self.ctx.index(n))
        return self.ctx.priced, 1.0 / float(self.ctx.h(a)), 1.0 / a


def hedged_move(x, n, ladder: PriceLadder, mirror: bool = False):
    """``(+-x + (|x| - strike_n)_+, nu_n)``; the value is >= -strike_n."""
    strike = ladder.strike(n)
    s = -1.0 if mirror else 1.0
    val = s * np.asarray(x, dtype=float) + np.maximum(np.abs(x) - strike, 0.0)
    val = val[()] if np.ndim(val) == 0 else val
    return val, ladder.nu(np.asarray(n, dtype=np.int64))


class _HedgedMoveEpsilon(_Multiplicative):
    """Bets ``eps K_{n-1} / d_n`` on ``x_{n,n} - nu_n`` (mirror: ``-x`` in place of x)."""

    def _ladder(self, depth: int) -> PriceLadder:
        raise NotImplementedError

    def denom(self, n):
        return np.asarray(n, dtype=float)

    def terms(self, m, n):
        lad = self._ladder(int(n[-1]))
        val, nu = hedged_move(m, n.astype(np.int64), lad, self.sign < 0)
        inv_d = 1.0 / self.denom(n)
        return (val - nu) * inv_d, inv_d, nu * inv_d

    def hedge_for(self, n):
        lad = self._ladder(n)
        inv_d = 1.0 / float(self.denom(n))
        return lad.hedge(n), inv_d, inv_d


class E4PrimeEpsilon(_HedgedMoveEpsilon):
    def __init__(self, ctx: CountableHedgeContext, mirror: bool = False):
        self.ctx = ctx
        self.sign = -1.0 if mirror else 1.0
        self.epsilon = float(ctx.epsilon)
        self.name = "e4prime_" + ("mirror" if mirror else "plain")

    def _ladder(self, depth):
        return self.ctx.calls(depth)


class MZE4rEpsilon(_HedgedMoveEpsilon):
    def __init__(self, ctx: MZContext, mirror: bool = False):
        self.ctx = ctx
        self.sign = -1.0 if mirror else 1.0
        self.epsilon = float(ctx.epsilon)
        self.name = "mz_e4r_" + ("mirror" if mirror else "plain")

    def _ladder(self, depth):
        return self.ctx.roots(depth)

    def denom(self, n):
        n = np.asarray(n, dtype=float)
        return n ** (1.0 / self.ctx.r) if self.ctx.denominator == "root" else n


# --------------------------------------------------------------------------
# theorem mixtures


def borel_cantelli_single(ctx):
    return BorelCantelliSingle(ctx)


def weighted_bc_single(ctx, power=None):
    return WeightedBorelCantelli(ctx, power)


def epsilon_single(ctx, sign=1, epsilon=None):
    return EpsilonSingle(ctx, sign, epsilon)


def e2_forcer(ctx):
    return E2Forcer(ctx)


def e3_forcer(ctx):
    return E3Forcer(ctx)


def e4prime_epsilon(ctx, mirror=False):
    return E4PrimeEpsilon(ctx, mirror)


def mz_e2r_forcer(ctx):
    return MZE2rForcer(ctx)


def mz_e3r_forcer(ctx):
    return MZE3rForcer(ctx)


def mz_e4r_epsilon(ctx, mirror=False):
    return MZE4rEpsilon(ctx, mirror)


def _equal(parts, name) -> Mixture:
    w = 1.0 / len(parts)
    return combine_strategies([(p, w) for p in parts], name=name)


def theorem1_strategy(ctx: SingleHedgeContext) -> Mixture:
    return _equal([BorelCantelliSingle(ctx), WeightedBorelCantelli(ctx), EpsilonSingle(ctx, 1),
                   EpsilonSingle(ctx, -1)], "theorem1")


def theorem2_strategy(ctx: CountableHedgeContext) -> Mixture:
    return _equal([E2Forcer(ctx), E3Forcer(ctx), E4PrimeEpsilon(ctx), E4PrimeEpsilon(ctx, True)], "theorem2")


def theorem5_strategy(ctx: MZContext) -> Mixture:
    return _equal([MZE2rForcer(ctx), MZE3rForcer(ctx), MZE4rEpsilon(ctx), MZE4rEpsilon(ctx, True)], "theorem5")


# --------------------------------------------------------------------------
# upcrossings


class UpcrossingStrategy(SkepticStrategy):
    """Copies the target's bet from when its capital is <= a until it is >= b.

    Each completed upcrossing of [a, b] gains at least ``b - a``; an
    unfinished one loses at most a (the target's capital cannot go below
    0), so initial capital a suffices.
    """

    def __init__(self, target: SkepticStrategy, a: float, b: float, initial_capital: Optional[float] = None):
        if not 0 <= a < b:
            raise ConfigurationError(f"need 0 <= a < b, got a={a!r}, b={b!r}")
        self.target = target
        self.a = float(a)
        self.b = float(b)
        k0 = initial_capital if initial_capital is not None else (self.a if self.a > 0 else 1.0)
        if not k0 >= self.a or not k0 > 0:
            raise ConfigurationError("initial capital must be >= a and > 0")
        self.initial_capital = float(k0)
        self.name = f"upcrossing({target.name},{a:g},{b:g})"
        self.reset()

    def game_config(self):
        return self.target.game_config()

    def reset(self):
        from .game import GameHistory

        self.target.reset()
        self._sub = GameHistory(self.target.initial_capital)
        self._active = False
        self._pending = None

    def bet(self, history):
        k = self._sub.last_capital
        if not self._active and k <= self.a:
            self._active = True
        elif self._active and k >= self.b:
            self._active = False
        self._pending = self.target.bet(self._sub)
        return self._pending if self._active else NULL_BET

    def observe(self, history):
        self._sub.record(self._pending, history.moves[-1])
        self.target.observe(self._sub)

    @staticmethod
    def active_mask(capital: np.ndarray, a: float, b: float) -> np.ndarray:
        """Whether the overlay holds the target's bet in each round."""
        cap = np.atleast_2d(capital)
        prev = cap[:, :-1]
        out = np.zeros(prev.shape, dtype=bool)
        for r in range(prev.shape[0]):
            row = prev[r]
            i, on = 0, False
            while i < len(row):
                hits = np.nonzero(row[i:] >= b)[0] if on else np.nonzero(row[i:] <= a)[0]
                if len(hits) == 0:
                    out[r, i:] = on
                    break
                j = i + hits[0]
                out[r, i:j] = on
                # the switch takes effect in the round that starts at j
                on = not on
                i = j
        return out if np.ndim(capital) == 2 else out[0]

    def _fast(self, moves):
        t = self.target.trajectory(moves)
        cap = kernels.upcrossing_overlay(t.capital, self.a, self.b, self.initial_capital)
        act = self.active_mask(t.capital, self.a, self.b)
        return Trajectory(t.moves, np.where(act, t.stakes, 0.0), np.where(act, t.costs, 0.0), cap)


def upcrossing_strategy(target: SkepticStrategy, a: float, b: float, initial_capital: Optional[float] = None):
    return UpcrossingStrategy(target, a, b, initial_capital)


# --------------------------------------------------------------------------
# registry

SINGLE_IDS = ("bc_single", "weighted_bc_single", "epsilon_single_plus", "epsilon_single_minus", "theorem1")
COUNTABLE_IDS = ("e2_forcer", "e3_forcer", "e4prime_plain", "e4prime_mirror", "theorem2")
MZ_IDS = ("mz_e2r", "mz_e3r", "mz_e4r_plain", "mz_e4r_mirror", "theorem5")
STRATEGY_IDS = ("null",) + SINGLE_IDS + COUNTABLE_IDS + MZ_IDS


def build_strategy(sid: str, ctx=None) -> SkepticStrategy:
    """Strategy by its stable identifier, on a context of the matching family."""
    if sid == "null":
        return NullStrategy()
    single = {
        "bc_single": BorelCantelliSingle,
        "weighted_bc_single": WeightedBorelCantelli,
        "epsilon_single_plus": lambda c: EpsilonSingle(c, 1),
        "epsilon_single_minus": lambda c: EpsilonSingle(c, -1),
        "theorem1": theorem1_strategy,
    }
    countable = {
        "e2_forcer": E2Forcer,
        "e3_forcer": E3Forcer,
        "e4prime_plain": E4PrimeEpsilon,
        "e4prime_mirror": lambda c: E4PrimeEpsilon(c, True),
        "theorem2": theorem2_strategy,
    }
    mz = {
        "mz_e2r": MZE2rForcer,
        "mz_e3r": MZE3rForcer,
        "mz_e4r_plain": MZE4rEpsilon,
        "mz_e4r_mirror": lambda c: MZE4rEpsilon(c, True),
        "theorem5": theorem5_strategy,
    }
    for table, kind in ((single, SingleHedgeContext), (countable, CountableHedgeContext), (mz, MZContext)):
        if sid in table:
            if not isinstance(ctx, kind):
                raise ConfigurationError(f"strategy {sid!r} needs a {kind.__name__}")
            return table[sid](ctx)
    raise ConfigurationError(f"strategy.id: unknown {sid!r}")
