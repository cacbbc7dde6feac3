"""Round-by-round protocols, capital bookkeeping and strategy composition.

Two protocols are supported. In the single-hedge game Skeptic announces a
stake ``M_n`` on the move and ``V_n >= 0`` units of one hedge; in the
hedge-set game he may hold any finite signed portfolio. After Reality moves,

    K_n = K_{n-1} + M_n x_n + sum_i V_ni (h_ni(x_n) - price_i).

Capital is accumulated with compensated summation, and every round is
checked against the collateral duty ``K_n >= 0``.
"""

from __future__ import annotations

import csv
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CollateralViolation, ConfigurationError, ProtocolError
from .hedges import EMPTY_PORTFOLIO, HedgePortfolio, PricedHedge

COLLATERAL_RTOL = 1e-9


def collateral_tolerance(k0: float) -> float:
    return COLLATERAL_RTOL * max(1.0, abs(k0))


@dataclass(frozen=True)
class RoundBet:
    stake: float = 0.0
    portfolio: HedgePortfolio = EMPTY_PORTFOLIO

    def increment(self, x: float) -> float:
        return self.stake * x + self.portfolio.increment(x)

    @property
    def cost(self) -> float:
        return self.portfolio.total_price

    def scaled(self, c: float) -> "RoundBet":
        return RoundBet(c * self.stake, self.portfolio.scaled(c))

    def __add__(self, other: "RoundBet") -> "RoundBet":
        return RoundBet(self.stake + other.stake, self.portfolio + other.portfolio)


NULL_BET = RoundBet()


@dataclass
class GameConfig:
    protocol: str = "set"
    hedge: Optional[PricedHedge] = None
    reveal_bet: bool = True
    max_portfolio_entries: int = 10**7

    def __post_init__(self):
        if self.protocol not in ("single", "set"):
            raise ConfigurationError(f"protocol: expected 'single' or 'set', got {self.protocol!r}")
        if self.protocol == "single" and self.hedge is None:
            raise ConfigurationError("hedge: the single-hedge protocol needs its hedge")


class GameHistory:
    """Moves, bets and the capital process of one run."""

    def __init__(self, initial_capital: float = 1.0):
        if not initial_capital > 0:
            raise ConfigurationError("initial capital must be > 0")
        self.initial_capital = float(initial_capital)
        self.moves: list = []
        self.bets: list = []
        self.capital: list = [self.initial_capital]
        self._comp = 0.0

    @property
    def n(self) -> int:
        return len(self.moves)

    @property
    def last_capital(self) -> float:
        return self.capital[-1]

    def record(self, bet: RoundBet, x: float) -> float:
        s = self.capital[-1]
        y = bet.increment(x) - self._comp
        t = s + y
        self._comp = (t - s) - y
        self.moves.append(float(x))
        self.bets.append(bet)
        self.capital.append(t)
        return t

    def replay(self) -> list:
        """Capital recomputed from stored bets and moves."""
        fresh = GameHistory(self.initial_capital)
        for bet, x in zip(self.bets, self.moves):
            fresh.record(bet, x)
        return fresh.capital


class SkepticStrategy(ABC):
    """Policy emitting Skeptic's bet from the history of its own capital.

    ``initial_capital`` is the capital the strategy is designed to start
    from (the collateral duty is stated relative to it). Subclasses that
    know their capital process in closed form override :meth:`_fast` so
    long runs skip the object-level engine.
    """

    name = "skeptic"
    initial_capital = 1.0

    def reset(self) -> None:
        pass

    @abstractmethod
    def bet(self, history: GameHistory) -> RoundBet:
        ...

    def observe(self, history: GameHistory) -> None:
        pass

    def game_config(self) -> Optional["GameConfig"]:
        """Protocol this strategy plays; None means the hedge-set game."""
        return None

    def trajectory(self, moves) -> "Trajectory":
        moves = np.asarray(moves, dtype=float)
        fast = self._fast(moves)
        if fast is not None:
            return fast
        if moves.ndim == 1:
            return _engine_trajectory(self, moves)
        parts = [_engine_trajectory(self, row) for row in moves]
        return Trajectory.stack(parts)

    def _fast(self, moves: np.ndarray) -> Optional["Trajectory"]:
        return None


class RealityStrategy(ABC):
    """Policy choosing Reality's move; may see Skeptic's announced bet."""

    name = "reality"
    oblivious = True

    def reset(self, run: int = 0) -> None:
        pass

    @abstractmethod
    def move(self, history: GameHistory, bet: Optional[RoundBet]) -> float:
        ...

    def path(self, n_rounds: int, run: int = 0) -> np.ndarray:
        self.reset(run)
        h = GameHistory()
        out = np.empty(n_rounds)
        for i in range(n_rounds):
            out[i] = self.move(h, None)
            h.record(NULL_BET, out[i])
        return out


class FixedPath(RealityStrategy):
    """Replays a given sequence of moves."""

    name = "fixed"

    def __init__(self, moves: Sequence[float]):
        self.moves = np.asarray(moves, dtype=float)

    def move(self, history, bet):
        if history.n >= len(self.moves):
            raise ConfigurationError(f"fixed path has only {len(self.moves)} moves")
        return float(self.moves[history.n])

    def path(self, n_rounds, run=0):
        if n_rounds > len(self.moves):
            raise ConfigurationError(f"fixed path has only {len(self.moves)} moves")
        return self.moves[:n_rounds].copy()


def _check_bet(bet: RoundBet, config: GameConfig, n: int) -> None:
    if not math.isfinite(bet.stake):
        raise ProtocolError(f"round {n}: non-finite stake")
    if len(bet.portfolio) > config.max_portfolio_entries:
        raise ProtocolError(f"round {n}: portfolio has {len(bet.portfolio)} entries (cap {config.max_portfolio_entries})")
    if config.protocol == "single":
        if len(bet.portfolio) > 1:
            raise ProtocolError(f"round {n}: single-hedge game allows one hedge entry")
        for hedge, units in bet.portfolio.entries:
            if hedge != config.hedge:
                raise ProtocolError(f"round {n}: hedge {hedge.kind.label} is not the game's hedge")
            if units < 0:
                raise ProtocolError(f"round {n}: single-hedge game needs V_n >= 0, got {units!r}")


def play_round(history: GameHistory, skeptic: SkepticStrategy, reality: RealityStrategy,
               config: Optional[GameConfig] = None) -> GameHistory:
    """Play one round in place and return the history."""
    config = config or GameConfig()
    n = history.n + 1
    bet = skeptic.bet(history)
    _check_bet(bet, config, n)
    x = float(reality.move(history, bet if config.reveal_bet else None))
    if not math.isfinite(x):
        raise ProtocolError(f"round {n}: Reality emitted a non-finite move")
    k = history.record(bet, x)
    skeptic.observe(history)
    tol = collateral_tolerance(history.initial_capital)
    if k < -tol:
        raise CollateralViolation(n, k, history=history)
    if k < 0:
        warnings.warn(f"round {n}: capital {k!r} below zero within round-off tolerance")
    return history


@dataclass
class GameRun:
    history: GameHistory
    skeptic: str
    reality: str

    @property
    def trajectory(self) -> "Trajectory":
        return Trajectory.from_history(self.history)

    def to_csv(self, path) -> None:
        self.trajectory.to_csv(path)


def run_game(skeptic: SkepticStrategy, reality: RealityStrategy, n_rounds: int,
             config: Optional[GameConfig] = None, run: int = 0) -> GameRun:
    """Play ``n_rounds`` rounds; a collateral violation propagates with its history."""
    if n_rounds < 1:
        raise ConfigurationError("n_rounds must be >= 1")
    config = config or skeptic.game_config() or GameConfig()
    skeptic.reset()
    reality.reset(run)
    history = GameHistory(skeptic.initial_capital)
    for _ in range(n_rounds):
        play_round(history, skeptic, reality, config)
    return GameRun(history, skeptic.name, reality.name)


def _engine_trajectory(strategy: SkepticStrategy, moves: np.ndarray) -> "Trajectory":
    return run_game(strategy, FixedPath(moves), len(moves)).trajectory


def replay(strategy: SkepticStrategy, moves) -> "Trajectory":
    """Generic (object-level) route on a fixed path, one run or a batch."""
    moves = np.asarray(moves, dtype=float)
    if moves.ndim == 1:
        return _engine_trajectory(strategy, moves)
    return Trajectory.stack([_engine_trajectory(strategy, row) for row in moves])


# --------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Array view of a run (or a batch of runs, one per row)."""

    moves: np.ndarray
    stakes: np.ndarray
    costs: np.ndarray
    capital: np.ndarray
    log_capital: Optional[np.ndarray] = None

    @classmethod
    def from_history(cls, h: GameHistory) -> "Trajectory":
        return cls(
            np.asarray(h.moves, dtype=float),
            np.asarray([b.stake for b in h.bets], dtype=float),
            np.asarray([b.cost for b in h.bets], dtype=float),
            np.asarray(h.capital, dtype=float),
        )

    @classmethod
    def stack(cls, parts: Sequence["Trajectory"]) -> "Trajectory":
        logs = None
        if all(p.log_capital is not None for p in parts):
            logs = np.stack([p.log_capital for p in parts])
        return cls(*(np.stack([getattr(p, f) for p in parts]) for f in ("moves", "stakes", "costs", "capital")),
                   log_capital=logs)

    @property
    def log_k(self) -> np.ndarray:
        if self.log_capital is not None:
            return self.log_capital
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(self.capital, 0.0))

    def row(self, i: int) -> "Trajectory":
        if self.moves.ndim == 1:
            return self
        return Trajectory(self.moves[i], self.stakes[i], self.costs[i], self.capital[i],
                          None if self.log_capital is None else self.log_capital[i])

    def check_collateral(self, initial_capital: Optional[float] = None) -> None:
        """Raise :class:`CollateralViolation` for the first capital below tolerance."""
        cap = np.atleast_2d(self.capital)
        k0 = cap[:, 0] if initial_capital is None else np.full(cap.shape[0], initial_capital)
        tol = COLLATERAL_RTOL * np.maximum(1.0, np.abs(k0))
        bad = (cap < -tol[:, None]) | np.isnan(cap)
        if bad.any():
            run, idx = np.argwhere(bad)[0]
            raise CollateralViolation(int(idx), float(cap[run, idx]), run=int(run))
        if (cap < 0).any():
            warnings.warn("capital below zero within round-off tolerance")

    def to_csv(self, path, stride: int = 1) -> None:
        if self.moves.ndim != 1:
            raise ConfigurationError("write one run at a time")
        fmt = lambda v: format(float(v), ".17g")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "x_n", "M_n", "portfolio_cost_n", "K_n"])
            w.writerow([0, "", "", "", fmt(self.capital[0])])
            last = len(self.moves)
            for i in range(1, last + 1):
                if i % stride and i != last:
                    continue
                w.writerow([i, fmt(self.moves[i - 1]), fmt(self.stakes[i - 1]), fmt(self.costs[i - 1]),
                            fmt(self.capital[i])])


def combine_trajectories(parts: Sequence[tuple]) -> Trajectory:
    """Weighted sum of component trajectories on the same moves.

    Once opposite-signed components overflow, the summed stakes and costs
    are NaN; ``log_capital`` stays finite.
    """
    first = parts[0][1]
    with np.errstate(invalid="ignore"):
        stakes = sum(w * t.stakes for w, t in parts)
        costs = sum(w * t.costs for w, t in parts)
        capital = sum(w * t.capital for w, t in parts)
    logs = np.stack([math.log(w) + t.log_k for w, t in parts])
    with np.errstate(invalid="ignore"):
        top = np.max(logs, axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        log_capital = safe + np.log(np.sum(np.exp(logs - safe), axis=0))
    log_capital = np.where(np.isfinite(top), log_capital, top)
    return Trajectory(first.moves, stakes, costs, capital, log_capital)


# --------------------------------------------------------------------------
# composition


class Mixture(SkepticStrategy):
    """Weighted sum of strategies, each tracking its own capital."""

    def __init__(self, parts: Sequence[tuple], name: Optional[str] = None):
        if not parts:
            raise ConfigurationError("mixture needs at least one component")
        weights = [float(w) for _, w in parts]
        if any(not w > 0 for w in weights):
            raise ConfigurationError("mixture weights must be > 0")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ConfigurationError(f"mixture weights must sum to 1, got {math.fsum(weights)!r}")
        self.parts = [(s, w) for (s, _), w in zip(parts, weights)]
        self.name = name or "mix(" + ",".join(s.name for s, _ in self.parts) + ")"
        self.initial_capital = math.fsum(w * s.initial_capital for s, w in self.parts)
        self.reset()

    def reset(self):
        self._subs = []
        for s, _ in self.parts:
            s.reset()
            self._subs.append(GameHistory(s.initial_capital))
        self._pending = None

    def bet(self, history):
        bets = [s.bet(sub) for (s, _), sub in zip(self.parts, self._subs)]
        self._pending = bets
        total = NULL_BET
        for (_, w), b in zip(self.parts, bets):
            total = total + b.scaled(w)
        return total

    def observe(self, history):
        x = history.moves[-1]
        for (s, _), sub, b in zip(self.parts, self._subs, self._pending):
            sub.record(b, x)
            s.observe(sub)

    def game_config(self):
        return self.parts[0][0].game_config()

    @property
    def component_capitals(self) -> list:
        return [list(sub.capital) for sub in self._subs]

    def _fast(self, moves):
        return combine_trajectories([(w, s.trajectory(moves)) for s, w in self.parts])


def combine_strategies(parts: Sequence[tuple], name: Optional[str] = None) -> Mixture:
    """Mix ``(strategy, weight)`` pairs whose weights sum to 1."""
    return Mixture(parts, name)


def geometric_weights(depth: int) -> list:
    """``2**-j`` for ``j = 1..depth``, renormalised to sum to 1."""
    if depth < 1:
        raise ConfigurationError("mixture depth must be >= 1")
    raw = [2.0**-j for j in range(1, depth + 1)]
    total = math.fsum(raw)
    return [w / total for w in raw]


def countable_mixture(strategies: Sequence[SkepticStrategy], name: Optional[str] = None) -> Mixture:
    """Truncated countable mixture with geometric weights."""
    ws = geometric_weights(len(strategies))
    ws[-1] = 1.0 - math.fsum(ws[:-1])
    return Mixture(list(zip(strategies, ws)), name)


class Scaled(SkepticStrategy):
    """``delta * P``: every bet and the capital process scaled by delta."""

    def __init__(self, inner: SkepticStrategy, delta: float):
        if not delta > 0:
            raise ConfigurationError("scale factor must be > 0")
        self.inner = inner
        self.delta = float(delta)
        self.name = f"{delta:g}*{inner.name}"
        self.initial_capital = self.delta * inner.initial_capital
        self.reset()

    def reset(self):
        self.inner.reset()
        self._sub = GameHistory(self.inner.initial_capital)
        self._pending = None

    def bet(self, history):
        self._pending = self.inner.bet(self._sub)
        return self._pending.scaled(self.delta)

    def observe(self, history):
        self._sub.record(self._pending, history.moves[-1])
        self.inner.observe(self._sub)

    def game_config(self):
        return self.inner.game_config()

    def _fast(self, moves):
        t = self.inner.trajectory(moves)
        return Trajectory(t.moves, self.delta * t.stakes, self.delta * t.costs, self.delta * t.capital,
                          math.log(self.delta) + t.log_k)


def scale_strategy(s: SkepticStrategy, delta: float) -> SkepticStrategy:
    return Scaled(s, delta)
