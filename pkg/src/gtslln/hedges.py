"""Hedge payoffs, portfolios, price ladders and pricing measures.

Every payoff here is a non-negative even function of Reality's move. Prices
are induced from a symmetric zero-mean :class:`PricingMeasure`, which makes
the posted prices coherent by construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, NumericError, PricingError


# --------------------------------------------------------------------------
# hedge kinds


@dataclass(frozen=True)
class PowerHedge:
    """Absolute moment hedge ``|x|**exponent``."""

    exponent: float

    def __post_init__(self):
        if not self.exponent > 0:
            raise ConfigurationError(f"PowerHedge exponent must be > 0, got {self.exponent}")

    def payoff(self, x):
        return np.abs(x) ** self.exponent

    @property
    def label(self) -> str:
        return f"|x|^{self.exponent:g}"


@dataclass(frozen=True, eq=False)
class GeneralSymmetric:
    """Even hedge ``h(|x|)`` given by a function of ``|x|``.

    ``func`` must accept a numpy array of non-negative values. When the
    function is ``t**power * log(t)**log_power`` pass ``closed_form=(power,
    log_power)`` so that summability can be decided exactly. ``table`` marks
    hedges interpolated from finite data.
    """

    func: Callable[[np.ndarray], np.ndarray]
    name: str = "h"
    closed_form: Optional[tuple] = None
    table: Optional[tuple] = None

    def payoff(self, x):
        t = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self.func(t), dtype=float)
        return out[()] if out.ndim == 0 else out

    @property
    def label(self) -> str:
        return self.name

    @classmethod
    def log_power(cls, power: float = 1.0, log_power: float = 2.0) -> "GeneralSymmetric":
        """``|x|**power * (log|x|)**log_power`` with ``h(0) = 0``."""

        def f(t):
            t = np.asarray(t, dtype=float)
            safe = np.where(t > 0, t, 1.0)
            return np.where(t > 0, safe**power * np.abs(np.log(safe)) ** log_power, 0.0)

        return cls(f, f"|x|^{power:g}(log|x|)^{log_power:g}", closed_form=(power, log_power))

    @classmethod
    def tabulated(cls, ts: Sequence[float], hs: Sequence[float], name: str = "tabulated"):
        ts = np.asarray(ts, dtype=float)
        hs = np.asarray(hs, dtype=float)
        if np.any(hs < 0) or np.any(np.diff(ts) <= 0):
            raise ConfigurationError("tabulated hedge needs increasing abscissae and h >= 0")
        slope = (hs[-1] - hs[-2]) / (ts[-1] - ts[-2])

        def f(t):
            t = np.asarray(t, dtype=float)
            inner = np.interp(t, ts, hs)
            return np.where(t > ts[-1], hs[-1] + slope * (t - ts[-1]), inner)

        return cls(f, name, table=(tuple(ts), tuple(hs)))


@dataclass(frozen=True)
class Call:
    """Symmetric call (strangle) ``(|x| - strike)_+``."""

    strike: float

    def __post_init__(self):
        if self.strike < 0:
            raise ConfigurationError("call strike must be non-negative")

    def payoff(self, x):
        return np.maximum(np.abs(x) - self.strike, 0.0)

    @property
    def label(self) -> str:
        return f"(|x|-{self.strike:g})+"


@dataclass(frozen=True)
class PoweredCall:
    """``(|x|**r - level)_+`` for ``1 < r < 2``."""

    r: float
    level: int

    def __post_init__(self):
        if not 1.0 < self.r < 2.0:
            raise ConfigurationError(f"PoweredCall needs 1 < r < 2, got {self.r}")
        if self.level < 0:
            raise ConfigurationError("PoweredCall level must be non-negative")

    def payoff(self, x):
        return np.maximum(np.abs(x) ** self.r - self.level, 0.0)

    @property
    def label(self) -> str:
        return f"(|x|^{self.r:g}-{self.level})+"


@dataclass(frozen=True)
class Constant:
    """The sure payoff; priced at its value by coherence."""

    value: float = 1.0

    def payoff(self, x):
        return np.full(np.shape(x), self.value)[()]

    @property
    def label(self) -> str:
        return f"{self.value:g}"


HedgeKind = Union[PowerHedge, GeneralSymmetric, Call, PoweredCall, Constant]


def eval_hedge(h: HedgeKind, x):
    """Payoff of ``h`` at move(s) ``x``. Scalars in, float out."""
    out = h.payoff(x)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# priced hedges and portfolios


@dataclass(frozen=True)
class PricedHedge:
    kind: HedgeKind
    price: float

    def __post_init__(self):
        if not math.isfinite(self.price) or self.price < 0:
            raise PricingError(f"price of {self.kind.label} must be finite and >= 0, got {self.price}")

    def payoff(self, x):
        return self.kind.payoff(x)


@dataclass(frozen=True)
class HedgePortfolio:
    """Finite signed combination of priced hedges."""

    entries: tuple = ()

    @classmethod
    def of(cls, pairs: Iterable[tuple]) -> "HedgePortfolio":
        """Build a portfolio, merging units held in the same hedge."""
        merged: dict = {}
        for hedge, units in pairs:
            merged[hedge] = merged.get(hedge, 0.0) + float(units)
        return cls(tuple((h, u) for h, u in merged.items() if u != 0.0))

    @property
    def total_price(self) -> float:
        return math.fsum(u * h.price for h, u in self.entries)

    def payoff(self, x):
        if not self.entries:
            return np.zeros(np.shape(x))[()]
        return sum(u * h.payoff(x) for h, u in self.entries)

    def increment(self, x: float) -> float:
        """Capital change ``sum_i V_i (h_i(x) - price_i)`` for one move."""
        total = 0.0
        for h, u in self.entries:
            total += u * (float(h.payoff(x)) - h.price)
        return total

    def scaled(self, c: float) -> "HedgePortfolio":
        return HedgePortfolio(tuple((h, c * u) for h, u in self.entries))

    def __add__(self, other: "HedgePortfolio") -> "HedgePortfolio":
        return HedgePortfolio.of(list(self.entries) + list(other.entries))

    def __len__(self):
        return len(self.entries)


EMPTY_PORTFOLIO = HedgePortfolio()


# --------------------------------------------------------------------------
# pricing measures


class PricingMeasure:
    """Symmetric law of a single move; all prices are expectations under it."""

    name = "measure"

    def has_moment(self, p: float) -> bool:
        raise NotImplementedError

    def call_price(self, strike):
        """``E(|x| - strike)_+`` (vectorised over strikes)."""
        raise NotImplementedError

    def powered_call_price(self, r: float, level):
        """``E(|x|**r - level)_+`` (vectorised over levels)."""
        raise NotImplementedError

    def power_moment(self, p: float) -> float:
        raise NotImplementedError

    def abs_tail(self, t: np.ndarray) -> np.ndarray:
        """``P(|x| > t)``."""
        raise NotImplementedError

    def abs_quantile(self, q: float) -> float:
        """Smallest t with ``P(|x| > t) <= 1 - q``."""
        raise NotImplementedError

    def sample_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF draw; one uniform per move keeps streams chunk-invariant."""
        raise NotImplementedError

    def expect(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class DiscreteMeasure(PricingMeasure):
    points: tuple
    masses: tuple
    name: str = field(default="discrete", init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        ms = np.asarray(self.masses, dtype=float)
        if pts.shape != ms.shape or pts.ndim != 1 or len(pts) == 0:
            raise ConfigurationError("discrete measure needs equal-length points and masses")
        if np.any(ms < 0) or abs(ms.sum() - 1.0) > 1e-12:
            raise ConfigurationError("discrete masses must be non-negative and sum to 1")
        for p, m in zip(pts, ms):
            mirror = ms[np.isclose(pts, -p, rtol=0, atol=1e-12)].sum()
            if abs(mirror - m) > 1e-12 and p != 0:
                raise ConfigurationError("discrete measure must be symmetric about 0")
        object.__setattr__(self, "points", tuple(pts.tolist()))
        object.__setattr__(self, "masses", tuple(ms.tolist()))

    @classmethod
    def uniform(cls, points: Sequence[float]) -> "DiscreteMeasure":
        return cls(tuple(points), tuple([1.0 / len(points)] * len(points)))

    @property
    def _abs(self):
        return np.abs(np.asarray(self.points)), np.asarray(self.masses)

    def has_moment(self, p):
        return True

    def expect(self, func):
        a, m = self._abs
        vals = np.asarray(func(a), dtype=float)
        return math.fsum((m * vals).tolist())

    def call_price(self, strike):
        a, m = self._abs
        s = np.asarray(strike, dtype=float)
        out = np.maximum(a[None, :] - s.reshape(-1, 1), 0.0) @ m
        return out.reshape(s.shape)[()] if s.ndim == 0 else out.reshape(s.shape)

    def powered_call_price(self, r, level):
        a, m = self._abs
        k = np.asarray(level, dtype=float)
        out = np.maximum(a[None, :] ** r - k.reshape(-1, 1), 0.0) @ m
        return out.reshape(k.shape)[()] if k.ndim == 0 else out.reshape(k.shape)

    def power_moment(self, p):
        return self.expect(lambda a: a**p)

    def abs_tail(self, t):
        a, m = self._abs
        t = np.asarray(t, dtype=float)
        return (a[None, :] > t.reshape(-1, 1)) @ m

    def abs_quantile(self, q):
        a, m = self._abs
        order = np.argsort(a)
        cum = np.cumsum(m[order])
        idx = int(np.searchsorted(cum, q - 1e-15))
        return float(a[order][min(idx, len(a) - 1)])

    def sample_from_uniform(self, u):
        pts = np.asarray(self.points)
        cum = np.cumsum(self.masses)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, u, side="right")
        return pts[np.minimum(idx, len(pts) - 1)]

    def describe(self):
        return {"kind": "discrete", "points": list(self.points), "masses": list(self.masses)}


@dataclass(frozen=True)
class LaplaceMeasure(PricingMeasure):
    """Two-sided exponential: ``|x| ~ Exp(rate)`` with a fair random sign."""

    rate: float = 1.0
    name: str = field(default="laplace", init=False)

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigurationError("Laplace rate must be > 0")

    def has_moment(self, p):
        return True

    def call_price(self, strike):
        s = np.asarray(strike, dtype=float)
        out = np.exp(-self.rate * s) / self.rate
        return out[()] if out.ndim == 0 else out

    def powered_call_price(self, r, level):
        # int_k^inf P(|x|^r > t) dt = (r / lam^r) Gamma(r) Q(r, lam k^{1/r})
        k = np.asarray(level, dtype=float)
        lam = self.rate
        out = (r / lam**r) * special.gamma(r) * special.gammaincc(r, lam * k ** (1.0 / r))
        return out[()] if out.ndim == 0 else out

    def power_moment(self, p):
        return float(special.gamma(p + 1.0) / self.rate**p)

    def abs_tail(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def abs_quantile(self, q):
        return float(-math.log1p(-q) / self.rate) if q < 1 else math.inf

    def abs_density(self, t):
        return self.rate * np.exp(-self.rate * t)

    def sample_from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        lo = u < 0.5
        mag = np.where(lo, -np.log(np.where(lo, 2.0 * u, 1.0)), -np.log(np.where(lo, 1.0, 2.0 * (1.0 - u))))
        mag = mag / self.rate
        return np.where(lo, -mag, mag)

    def expect(self, func):
        return _quad_abs(self, func)

    def describe(self):
        return {"kind": "laplace", "rate": self.rate}


@dataclass(frozen=True)
class ParetoMeasure(PricingMeasure):
    """Symmetrised Pareto: ``P(|x| > t) = (scale/t)**tail`` for ``t >= scale``."""

    tail: float
    scale: float = 1.0
    name: str = field(default="pareto", init=False)

    def __post_init__(self):
        if not self.tail > 1:
            raise ConfigurationError("Pareto tail index must be > 1 for a finite price of |x|")
        if not self.scale > 0:
            raise ConfigurationError("Pareto scale must be > 0")

    def has_moment(self, p):
        return p < self.tail

    @staticmethod
    def _excess(sigma, beta, k):
        # E(Y - k)_+ for Y ~ Pareto(scale sigma, index beta > 1)
        k = np.asarray(k, dtype=float)
        mean = beta * sigma / (beta - 1.0)
        safe_k = np.where(k > sigma, k, sigma)
        far = sigma**beta * safe_k ** (1.0 - beta) / (beta - 1.0)
        out = np.where(k <= sigma, mean - k, far)
        return out[()] if out.ndim == 0 else out

    def call_price(self, strike):
        return self._excess(self.scale, self.tail, strike)

    def powered_call_price(self, r, level):
        if not self.has_moment(r):
            raise PricingError(f"E|x|^{r} is infinite for Pareto tail {self.tail}")
        return self._excess(self.scale**r, self.tail / r, level)

    def power_moment(self, p):
        if not self.has_moment(p):
            raise PricingError(f"E|x|^{p} is infinite for Pareto tail {self.tail}")
        return self.tail * self.scale**p / (self.tail - p)

    def abs_tail(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.scale, 1.0, (self.scale / np.maximum(t, self.scale)) ** self.tail)

    def abs_quantile(self, q):
        return float(self.scale * (1.0 - q) ** (-1.0 / self.tail)) if q < 1 else math.inf

    def abs_density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.scale, 0.0, self.tail * self.scale**self.tail / np.maximum(t, self.scale) ** (self.tail + 1))

    def sample_from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        lo = u < 0.5
        v = np.where(lo, 2.0 * u, 2.0 * (1.0 - u))
        v = np.where(v > 0, v, np.finfo(float).tiny)
        mag = self.scale * v ** (-1.0 / self.tail)
        return np.where(lo, -mag, mag)

    def expect(self, func):
        return _quad_abs(self, func, lower=self.scale)

    def describe(self):
        return {"kind": "pareto", "tail": self.tail, "scale": self.scale}


def _quad_abs(m, func, lower: float = 0.0) -> float:
    """``E func(|x|)`` by adaptive quadrature, tail cut where mass < 1e-12."""
    upper = m.abs_quantile(1.0 - 1e-12)
    f = lambda t: float(np.asarray(func(np.asarray(t)), dtype=float)) * float(m.abs_density(t))
    pts = np.unique(np.geomspace(max(lower, 1e-12), upper, 30)) if upper > lower else None
    total = 0.0
    edges = np.concatenate([[lower], pts[1:-1], [upper]]) if pts is not None and len(pts) > 2 else [lower, upper]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err, info = integrate.quad(f, lo, hi, epsrel=1e-10, epsabs=0.0, limit=200, full_output=True)[:3]
        if err > 1e-8 * max(1.0, abs(val)) or not math.isfinite(val):
            raise NumericError(f"quadrature did not converge on [{lo:g}, {hi:g}]: value={val!r} err={err!r}")
        total += val
    return total


def price_hedge(m: PricingMeasure, h: HedgeKind) -> float:
    """Coherent price of ``h`` as its expectation under ``m``."""
    if isinstance(h, Constant):
        return float(h.value)
    if isinstance(h, Call):
        if not m.has_moment(1.0):
            raise PricingError("call prices need E|x| < inf")
        return float(m.call_price(h.strike))
    if isinstance(h, PoweredCall):
        if not m.has_moment(h.r):
            raise PricingError(f"powered call needs E|x|^{h.r} < inf")
        return float(m.powered_call_price(h.r, h.level))
    if isinstance(h, PowerHedge):
        if not m.has_moment(h.exponent):
            raise PricingError(f"E|x|^{h.exponent} is infinite under {m.name}")
        return float(m.power_moment(h.exponent))
    if isinstance(h, GeneralSymmetric):
        if h.closed_form is not None and not m.has_moment(h.closed_form[0] + (1e-9 if h.closed_form[1] > 0 else 0.0)):
            raise PricingError(f"{h.label} has no finite expectation under {m.name}")
        return m.expect(h.func)
    raise PricingError(f"unsupported hedge kind {h!r}")


def measure_from_config(cfg: dict) -> PricingMeasure:
    kind = cfg.get("kind")
    if kind == "discrete":
        if "masses" in cfg:
            return DiscreteMeasure(tuple(cfg["points"]), tuple(cfg["masses"]))
        return DiscreteMeasure.uniform(cfg["points"])
    if kind == "laplace":
        return LaplaceMeasure(float(cfg.get("rate", 1.0)))
    if kind == "pareto":
        return ParetoMeasure(float(cfg["tail"]), float(cfg.get("scale", 1.0)))
    raise ConfigurationError(f"measure.kind: unknown kind {kind!r}")


# --------------------------------------------------------------------------
# price ladders

FAMILIES = ("call", "powered_call", "root_call")


@dataclass(frozen=True, eq=False)
class PriceLadder:
    """Prices ``nu_0, nu_1, ...`` of one call family.

    ``call``: strikes k on |x|. ``powered_call``: levels k on |x|**r.
    ``root_call``: strikes k**(1/r) on |x|. ``source`` (optional) lets the
    ladder be extended on demand.
    """

    family: str
    prices: np.ndarray
    r: Optional[float] = None
    source: Optional[PricingMeasure] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown ladder family {self.family!r}")
        if self.family != "call" and not (self.r is not None and 1.0 < self.r < 2.0):
            raise ConfigurationError(f"{self.family} ladder needs 1 < r < 2")
        p = np.array(self.prices, dtype=float)
        if p.ndim != 1 or len(p) == 0:
            raise ConfigurationError("ladder needs at least one price")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise PricingError("ladder prices must be finite and non-negative")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)

    @property
    def depth(self) -> int:
        return len(self.prices) - 1

    def nu(self, k):
        if np.any(np.asarray(k) > self.depth):
            raise ConfigurationError(f"ladder too short: need index {np.max(k)}, depth {self.depth}")
        return self.prices[k]

    def nu_ext(self, k: int) -> float:
        """``nu_k`` with ``nu_{-1} = nu_0 + 1`` (price of ``h_0 + 1``)."""
        if k == -1:
            return float(self.prices[0]) + 1.0
        return float(self.nu(k))

    def mu(self, k: int) -> float:
        """Trapezoid price ``nu_{k+2} - nu_{k+1} - nu_k + nu_{k-1}``."""
        if k < 0:
            raise ConfigurationError("trapezoid index must be >= 0")
        return self.nu_ext(k + 2) - self.nu_ext(k + 1) - self.nu_ext(k) + self.nu_ext(k - 1)

    def mu_array(self, upto: int) -> np.ndarray:
        """``mu_0 .. mu_{upto-1}`` vectorised."""
        if upto + 1 > self.depth:
            raise ConfigurationError(f"ladder too short for {upto} trapezoids (depth {self.depth})")
        ext = np.concatenate([[self.prices[0] + 1.0], self.prices[: upto + 2]])
        return ext[3:] - ext[2:-1] - ext[1:-2] + ext[:-3]

    def strike(self, k):
        k = np.asarray(k, dtype=float)
        out = k ** (1.0 / self.r) if self.family == "root_call" else k
        return out[()] if out.ndim == 0 else out

    def hedge(self, k: int) -> PricedHedge:
        if self.family == "call":
            kind = Call(float(k))
        elif self.family == "powered_call":
            kind = PoweredCall(self.r, int(k))
        else:
            kind = Call(float(k) ** (1.0 / self.r))
        return PricedHedge(kind, float(self.nu(k)))

    def underlying(self, x):
        """The quantity the family's strikes apply to: |x|, or |x|**r."""
        a = np.abs(x)
        return a**self.r if self.family == "powered_call" else a

    def extended(self, depth: int) -> "PriceLadder":
        if depth <= self.depth:
            return self
        if self.source is None:
            raise ConfigurationError(f"ladder too short: need depth {depth}, have {self.depth} and no source measure")
        return build_ladder(self.source, self.family, max(depth, 2 * self.depth), r=self.r)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "nu_k", "mu_k"])
            for k in range(self.depth + 1):
                mu = format(self.mu(k), ".17g") if k + 2 <= self.depth else ""
                w.writerow([k, format(float(self.prices[k]), ".17g"), mu])


def build_ladder(m: PricingMeasure, family: str, depth: int, r: Optional[float] = None) -> PriceLadder:
    """Prices ``nu_0 .. nu_depth`` of a call family under ``m``."""
    if depth < 4:
        raise ConfigurationError("ladder depth must be >= 4")
    ks = np.arange(depth + 1, dtype=float)
    if family == "call":
        if not m.has_moment(1.0):
            raise PricingError("call ladder needs E|x| < inf")
        prices = m.call_price(ks)
    elif family == "powered_call":
        if r is None or not m.has_moment(r):
            raise PricingError(f"powered call ladder needs E|x|^r < inf (r={r})")
        prices = m.powered_call_price(r, ks)
    elif family == "root_call":
        if r is None:
            raise ConfigurationError("root_call ladder needs r")
        prices = m.call_price(ks ** (1.0 / r))
    else:
        raise ConfigurationError(f"unknown ladder family {family!r}")
    prices = np.maximum(np.asarray(prices, dtype=float), 0.0)
    return PriceLadder(family, prices, r=r, source=m)


# --------------------------------------------------------------------------
# spreads and trapezoids


def bull_spread(ladder: PriceLadder, k: int) -> HedgePortfolio:
    """``h_k - h_{k+1}``: 0 below strike k, 1 above strike k+1."""
    if k < 0:
        raise ConfigurationError("bull spread index must be >= 0")
    if k + 1 > ladder.depth:
        raise ConfigurationError(f"ladder too short for bull spread {k} (depth {ladder.depth})")
    return HedgePortfolio(((ladder.hedge(k), 1.0), (ladder.hedge(k + 1), -1.0)))


def trapezoid(ladder: PriceLadder, k: int) -> HedgePortfolio:
    """Trapezoid ``T_k``: rises on [k-1, k], flat 1 on [k, k+1], falls on [k+1, k+2]."""
    if k < 0:
        raise ConfigurationError("trapezoid index must be >= 0")
    if k + 2 > ladder.depth:
        raise ConfigurationError(f"ladder too short for trapezoid {k} (depth {ladder.depth})")
    if k == 0:
        return HedgePortfolio(
            (
                (PricedHedge(Constant(1.0), 1.0), 1.0),
                (ladder.hedge(1), -1.0),
                (ladder.hedge(2), 1.0),
            )
        )
    return HedgePortfolio(
        (
            (ladder.hedge(k - 1), 1.0),
            (ladder.hedge(k), -1.0),
            (ladder.hedge(k + 1), -1.0),
            (ladder.hedge(k + 2), 1.0),
        )
    )


def trapezoid_r(ladder: PriceLadder, k: int, r: float) -> HedgePortfolio:
    """Trapezoid on the ``|x|**r`` scale, built from powered calls."""
    if ladder.family != "powered_call" or ladder.r != r:
        raise ConfigurationError("trapezoid_r needs a powered_call ladder with the same r")
    return trapezoid(ladder, k)


def trapezoid_value(t, k: int):
    """Closed-form trapezoid of the underlying ``t`` (|x| or |x|**r)."""
    t = np.asarray(t, dtype=float)
    if k == 0:
        out = 1.0 - np.clip(t - 1.0, 0.0, 1.0)
    else:
        out = np.where(
            t <= k - 1,
            0.0,
            np.where(t <= k, t - (k - 1), np.where(t <= k + 1, 1.0, np.where(t <= k + 2, k + 2 - t, 0.0))),
        )
    return out[()] if out.ndim == 0 else out


def spread_value(t, k: int):
    """Closed-form bull spread ``clip(t - k, 0, 1)``."""
    out = np.clip(np.asarray(t, dtype=float) - k, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    a1: str
    a2: str
    a3: str
    c_effective: float
    ratio_increasing: Optional[bool]
    quadratic_ratio: Optional[str]
    a3_method: str
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.a1 == "pass" and self.a2 == "pass" and self.a3 == "pass"


_ALPHAS = tuple(np.round(np.arange(1.0, 3.0001, 0.25), 10))


def _onset(ok: np.ndarray, grid: np.ndarray) -> Optional[float]:
    """First grid point after which ``ok`` holds throughout, or None."""
    bad = np.nonzero(~ok)[0]
    if len(bad) == 0:
        return float(grid[0])
    last = bad[-1]
    if last >= len(grid) - 1 - len(grid) // 10:
        return None
    return float(grid[last + 1])


def _monotone_onset(vals: np.ndarray, grid: np.ndarray, rtol=1e-12):
    d = np.diff(vals)
    scale = np.maximum(np.abs(vals[1:]), np.abs(vals[:-1])) * rtol
    inc = _onset(d >= -scale, grid[1:])
    dec = _onset(d <= scale, grid[1:])
    cands = [(c, i, d) for i, (c, d) in enumerate(((inc, "increasing"), (dec, "decreasing"))) if c is not None]
    if not cands:
        return None, None
    c, _, d = min(cands)
    return c, d


def validate_single_hedge(h: HedgeKind, c: float = 0.0) -> ValidationReport:
    """Sampling check of (A1) h >= |x|, (A2) monotone h/|x|^alpha, (A3) sum 1/h(n) < inf."""
    lo = max(c, 1e-3)
    grid = np.unique(np.concatenate([np.geomspace(lo, 1e6, 4000), np.arange(max(1.0, np.ceil(lo)), 200.0)]))
    grid = grid[grid >= lo]
    hv = np.asarray(h.payoff(grid), dtype=float)
    notes = ["(A1)/(A2) checked on a sampled grid up to 1e6; not a proof"]

    a1_on = _onset(hv >= grid * (1 - 1e-12), grid)
    a1 = "pass" if a1_on is not None else "fail"

    onsets = []
    directions = {}
    for alpha in sorted(set(_ALPHAS) | {1.0, 2.0}):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = hv / grid**alpha
        on, direction = _monotone_onset(ratio, grid)
        directions[alpha] = direction
        onsets.append(on)
    a2 = "pass" if all(o is not None for o in onsets) else "fail"
    a2_on = max(o for o in onsets if o is not None) if any(o is not None for o in onsets) else None
    ratio_increasing = directions.get(1.0) == "increasing" if directions.get(1.0) else None
    quadratic = directions.get(2.0)

    a3, method = _a3_check(h, c)
    if isinstance(h, GeneralSymmetric) and h.table is not None:
        if a3 != "fail":
            a3 = "inconclusive"
        notes.append("tabulated hedge: behaviour beyond the table is extrapolated")
    if method == "heuristic":
        notes.append("(A3) decided by partial sums to 1e6 (heuristic)")

    c_eff = max([c] + [v for v in (a1_on,) if v is not None])
    return ValidationReport(a1, a2, a3, float(c_eff), ratio_increasing, quadratic, method, notes)


def _a3_check(h: HedgeKind, c: float):
    if isinstance(h, PowerHedge):
        return ("pass" if h.exponent > 1 else "fail"), "closed-form"
    if isinstance(h, PoweredCall):
        return "pass", "closed-form"
    if isinstance(h, (Call, Constant)):
        return "fail", "closed-form"
    if h.closed_form is not None:
        a, b = h.closed_form
        ok = a > 1 or (a == 1 and b > 1)
        return ("pass" if ok else "fail"), "closed-form"
    n = np.arange(int(math.floor(c)) + 1, 10**6 + 1, dtype=float)
    with np.errstate(divide="ignore"):
        inv = 1.0 / np.asarray(h.payoff(n), dtype=float)
    if not np.all(np.isfinite(inv)):
        return "fail", "heuristic"
    partial = np.cumsum(inv)
    total = partial[-1]
    decade = total - partial[len(partial) // 10]
    return ("pass" if decade < 0.01 * total else "fail"), "heuristic"


@dataclass
class CoherenceReport:
    ok: bool
    failures: list
    depth: int

    def __bool__(self):
        return self.ok


def check_coherence(ladder: PriceLadder, tol: float = 1e-9, xs: Optional[Sequence[float]] = None) -> CoherenceReport:
    """Monotone, convex and vanishing prices; spreads telescope to the underlying."""
    p = ladder.prices
    failures = []
    scale = tol * max(1.0, float(p[0]))
    for k in range(len(p) - 1):
        if p[k + 1] > p[k] + scale:
            failures.append(f"monotonicity at k={k}: nu_{k}={p[k]!r} < nu_{k + 1}={p[k + 1]!r}")
            break
    for k in range(1, len(p) - 2):
        if ladder.mu(k) < -scale:
            failures.append(f"convexity at k={k}: mu_{k}={ladder.mu(k)!r}")
            break
    if p[-1] > tol:
        failures.append(f"tail decay at K={ladder.depth}: nu_K={p[-1]!r} > {tol}")
    if xs is None:
        xs = (0.0, 0.3, 1.0, 2.5, -2.5, 3.7, -0.9)
    top = float(ladder.strike(ladder.depth))
    for x in xs:
        u = float(ladder.underlying(x))
        if u >= top:
            continue
        partial = telescoping_partial(ladder, x, ladder.depth)
        if abs(partial - u) > 1e-9 * max(1.0, u):
            failures.append(f"telescoping at x={x}: {partial!r} != {u!r}")
    return CoherenceReport(not failures, failures, ladder.depth)


def telescoping_partial(ladder: PriceLadder, x: float, depth: int) -> float:
    """Sum of the first ``depth`` bull-spread payoffs ``h_k(x) - h_{k+1}(x)`` at ``x``."""
    u = float(ladder.underlying(x))
    total = 0.0
    for k in range(depth):
        if float(ladder.strike(k)) > u:
            break
        total += float(ladder.hedge(k).kind.payoff(x)) - float(ladder.hedge(k + 1).kind.payoff(x))
    return total
