"""Reality's move generators.

Randomised Realities draw one uniform per round from a counter-based
Philox stream keyed by ``(seed, run)`` and map it through an inverse CDF,
so a path is the same whether it is generated in one call, in chunks, or
round by round through the engine.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import digamma

from .errors import ConfigurationError
from .game import FixedPath, RealityStrategy
from .hedges import HedgeKind, PowerHedge, PricingMeasure, eval_hedge

RNG_NAME = "philox4x64-v1"


def make_generator(seed: int, run: int = 0) -> np.random.Generator:
    """Independent stream for run ``run`` of experiment ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(run),))))


class SeededReality(RealityStrategy):
    """Oblivious Reality whose move at round n is ``_from_uniform(u_n, n)``."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.reset(0)

    def reset(self, run: int = 0) -> None:
        self.run = int(run)
        self._gen = make_generator(self.seed, run)

    def move(self, history, bet):
        n = history.n + 1
        u = self._gen.random(1)
        return float(self._from_uniform(u, np.array([n], dtype=float))[0])

    def path(self, n_rounds: int, run: int = 0, start: int = 1) -> np.ndarray:
        """Moves for rounds ``start .. start + n_rounds - 1`` of run ``run``."""
        gen = make_generator(self.seed, run)
        if start > 1:
            gen.random(start - 1)
        u = gen.random(n_rounds)
        return self._from_uniform(u, np.arange(start, start + n_rounds, dtype=float))

    def paths(self, n_rounds: int, runs: Sequence[int]) -> np.ndarray:
        out = np.empty((len(runs), n_rounds))
        for i, run in enumerate(runs):
            out[i] = self.path(n_rounds, run)
        return out

    def _from_uniform(self, u: np.ndarray, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# --------------------------------------------------------------------------
# adversaries


@dataclass(frozen=True)
class AdversarySpec:
    """Three-point adversary: ``prop1`` (±n**(1/r)) or ``propA3`` (±n)."""

    variant: str
    nu: float
    r: Optional[float] = None
    hedge: Optional[HedgeKind] = None
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("prop1", "propA3"):
            raise ConfigurationError(f"variant: expected 'prop1' or 'propA3', got {self.variant!r}")
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ConfigurationError(f"nu must be a finite positive price, got {self.nu!r}")
        if self.variant == "prop1" and not (self.r is not None and self.r > 0):
            raise ConfigurationError("r: prop1 adversary needs r > 0")
        if self.variant == "propA3" and self.hedge is None:
            raise ConfigurationError("hedge: propA3 adversary needs the hedge")


class Adversary(SeededReality):
    """At active rounds: 0 w.p. ``1 - q_n``, ``±m_n`` w.p. ``q_n / 2`` each.

    ``prop1``: ``q_n = nu / n``, ``m_n = n**(1/r)``, active for ``n > nu``.
    ``propA3``: ``q_n = nu / h(n)``, ``m_n = n``, active for ``h(n) > nu``.
    Inactive rounds emit 0.
    """

    def __init__(self, spec: AdversarySpec):
        self.spec = spec
        self.name = f"adversary_{spec.variant}"
        super().__init__(spec.seed)

    def law(self, n):
        """``(q_n, m_n)`` as arrays; ``q_n = 0`` on inactive rounds."""
        n = np.asarray(n, dtype=float)
        s = self.spec
        if s.variant == "prop1":
            active = n > s.nu
            q = np.where(active, s.nu / np.where(active, n, 1.0), 0.0)
            m = n ** (1.0 / s.r)
        else:
            hn = np.asarray(eval_hedge(s.hedge, n), dtype=float)
            active = hn > s.nu
            q = np.where(active, s.nu / np.where(active, hn, 1.0), 0.0)
            m = n
        return q, m

    def _from_uniform(self, u, n):
        q, m = self.law(n)
        return np.where(u < 0.5 * q, m, np.where(u < q, -m, 0.0))

    def expected_count(self, horizon: int) -> float:
        """Expected number of non-zero moves in rounds ``1..horizon``."""
        q, _ = self.law(np.arange(1, horizon + 1))
        return math.fsum(q)


def adversary(spec: AdversarySpec) -> Adversary:
    return Adversary(spec)


# --------------------------------------------------------------------------
# samplers and deterministic paths


class IIDSampler(SeededReality):
    """i.i.d. draws from a pricing measure."""

    def __init__(self, measure: PricingMeasure, seed: int = 0):
        self.measure = measure
        self.name = "iid"
        super().__init__(seed)

    def _from_uniform(self, u, n):
        return np.asarray(self.measure.sample_from_uniform(u), dtype=float)


def iid_sampler(measure: PricingMeasure, seed: int = 0) -> IIDSampler:
    return IIDSampler(measure, seed)


PATH_KINDS = ("zeros", "constant", "alternating", "spike", "harmonic_drift", "linear")


class DeterministicPath(RealityStrategy):
    """Closed-form stress paths.

    ``zeros``; ``constant`` ``x_n = c``; ``alternating`` ``c, -c, c, ...``;
    ``spike`` ``x_n = c n`` on scheduled rounds (powers of two by default)
    and 0 elsewhere; ``harmonic_drift`` ``x_n = c H_n``; ``linear`` ``x_n = c n``.
    """

    def __init__(self, kind: str, c: float = 1.0, schedule: Optional[Sequence[int]] = None):
        if kind not in PATH_KINDS:
            raise ConfigurationError(f"kind: expected one of {PATH_KINDS}, got {kind!r}")
        self.kind = kind
        self.c = float(c)
        self.schedule = None if schedule is None else frozenset(int(s) for s in schedule)
        self.name = kind if kind == "zeros" else f"{kind}({self.c:g})"

    def values(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        c = self.c
        if self.kind == "zeros":
            return np.zeros_like(n)
        if self.kind == "constant":
            return np.full_like(n, c)
        if self.kind == "alternating":
            return np.where(np.mod(n, 2.0) == 1.0, c, -c)
        if self.kind == "linear":
            return c * n
        if self.kind == "harmonic_drift":
            return c * (digamma(n + 1.0) + np.euler_gamma)
        if self.schedule is None:
            ni = n.astype(np.int64)
            hit = (ni & (ni - 1)) == 0
        else:
            hit = np.isin(n.astype(np.int64), np.fromiter(self.schedule, dtype=np.int64))
        return np.where(hit, c * n, 0.0)

    def move(self, history, bet):
        return float(self.values(np.array([history.n + 1]))[0])

    def path(self, n_rounds, run=0, start: int = 1):
        return self.values(np.arange(start, start + n_rounds))

    def paths(self, n_rounds: int, runs: Sequence[int]) -> np.ndarray:
        return np.tile(self.path(n_rounds), (len(runs), 1))


def deterministic_path(kind: str, c: float = 1.0, schedule: Optional[Sequence[int]] = None) -> DeterministicPath:
    return DeterministicPath(kind, c, schedule)


class CSVPath(FixedPath):
    name = "csv"

    def paths(self, n_rounds, runs):
        return np.tile(self.path(n_rounds), (len(runs), 1))


def write_path_csv(path, moves) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "x_n"])
        for i, x in enumerate(np.asarray(moves, dtype=float), start=1):
            w.writerow([i, format(float(x), ".17g")])


def read_path_csv(path) -> CSVPath:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "x_n" not in rows[0]:
        raise ConfigurationError(f"{path}: missing column x_n")
    return CSVPath([float(r["x_n"]) for r in rows])


def reality_from_config(cfg: dict, seed: int = 0, measure: Optional[PricingMeasure] = None) -> RealityStrategy:
    """Build a Reality from ``{"id": ..., ...}``."""
    kind = cfg.get("id")
    if kind == "iid":
        if measure is None:
            raise ConfigurationError("reality.id=iid needs a pricing measure")
        return IIDSampler(measure, seed)
    if kind in ("prop1", "propA3"):
        hedge = None
        if kind == "propA3":
            from .strategies import hedge_from_config

            hedge = hedge_from_config(cfg.get("hedge", {"kind": "power", "exponent": 1.0}))
        return Adversary(AdversarySpec(kind, float(cfg.get("nu", 1.0)), cfg.get("r"), hedge, seed))
    if kind in PATH_KINDS:
        return DeterministicPath(kind, float(cfg.get("c", 1.0)), cfg.get("schedule"))
    if kind == "csv":
        return read_path_csv(cfg["path"])
    raise ConfigurationError(f"reality.id: unknown {kind!r}")
