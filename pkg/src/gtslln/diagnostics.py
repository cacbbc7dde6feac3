"""Finite-horizon diagnostics.

Event detectors keep the partial statistic that defines each event
(``sum h(x_n)/h(n)``, the count of ``|x_n| >= n``, and so on). Nothing
here decides an almost-sure statement: convergence claims use a Cauchy
window over ``[N/2, N]`` and are labelled as finite-horizon evidence.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from . import kernels
from .errors import ConfigurationError
from .game import SkepticStrategy
from .hedges import HedgeKind, PriceLadder, eval_hedge

EVENT_IDS = ("E1", "E1'", "E2", "E3", "E3'", "E3''", "E4", "E4'", "E5", "E2r", "E3r", "E3r'", "E4r'", "E5r")
NONNEGATIVE = frozenset(EVENT_IDS) - {"E4", "E4'", "E4r'"}
CAUCHY_TOL = 1e-3

SINGLE_EVENTS = ("E1", "E1'", "E2", "E3", "E4")
COUNTABLE_EVENTS = ("E2", "E3", "E3'", "E3''", "E4", "E4'", "E5")
MZ_EVENTS = ("E2r", "E3r", "E3r'", "E4r'", "E5r")


@dataclass(frozen=True)
class EventDetector:
    """Running statistic of one event; ``update`` returns a new detector.

    ``hedge`` (and ``c``) serve E1/E1'; ``ladder`` is the call ladder for
    E4'/E5 and the root-call ladder for E4r'/E5r; ``r`` serves the
    r-indexed events.
    """

    event_id: str
    hedge: Optional[HedgeKind] = None
    ladder: Optional[PriceLadder] = None
    r: Optional[float] = None
    c: float = 0.0
    n: int = 0
    partial: float = 0.0

    def __post_init__(self):
        if self.event_id not in EVENT_IDS:
            raise ConfigurationError(f"event_id: unknown {self.event_id!r}")
        e = self.event_id
        if e in ("E1", "E1'") and self.hedge is None:
            raise ConfigurationError(f"{e} needs the hedge")
        if e in ("E4'", "E5", "E4r'", "E5r") and self.ladder is None:
            raise ConfigurationError(f"{e} needs a price ladder")
        if e.endswith(("r", "r'")) and not (self.r is not None and 1 < self.r < 2):
            raise ConfigurationError(f"{e} needs 1 < r < 2")

    def term(self, x, n):
        """Defining term of the event's series (vectorised)."""
        x = np.asarray(x, dtype=float)
        n = np.asarray(n, dtype=float)
        e = self.event_id
        if e == "E1":
            a = n + math.ceil(self.c)
            return np.asarray(eval_hedge(self.hedge, x), dtype=float) / np.asarray(eval_hedge(self.hedge, a), dtype=float)
        if e == "E1'":
            return np.asarray(eval_hedge(self.hedge, x), dtype=float) / (n * n)
        if e == "E2":
            return (np.abs(x) >= n).astype(float)
        if e == "E3":
            return np.where(np.abs(x) <= n, x * x, 0.0) / (n * n)
        if e == "E4":
            return x / n
        if e in ("E3'", "E3''"):
            s = 1.0 if e == "E3'" else -1.0
            v = s * x + np.maximum(np.abs(x) - n, 0.0)
            return v * v / (n * n)
        if e in ("E4'", "E5"):
            v = x + np.maximum(np.abs(x) - n, 0.0) - self._nu(n)
            return v / n if e == "E4'" else v * v / (n * n)
        r = self.r
        if e == "E2r":
            return (np.abs(x) ** r >= n).astype(float)
        if e == "E3r":
            return np.where(np.abs(x) ** r <= n, x * x, 0.0) / n ** (2.0 / r)
        root = n ** (1.0 / r)
        v = x + np.maximum(np.abs(x) - root, 0.0)
        if e == "E3r'":
            return v * v / n ** (2.0 / r)
        v = v - self._nu(n)
        return v / root if e == "E4r'" else v * v / n ** (2.0 / r)

    def _nu(self, n):
        k = np.asarray(n).astype(np.int64)
        lad = self.ladder.extended(int(np.max(k))) if np.max(k) > self.ladder.depth else self.ladder
        return lad.prices[k]

    def update(self, x: float, n: int) -> "EventDetector":
        if n != self.n + 1:
            raise ConfigurationError(f"rounds must be consecutive: expected {self.n + 1}, got {n}")
        return replace(self, n=n, partial=self.partial + float(self.term(x, n)))

    def series(self, moves) -> np.ndarray:
        """Running statistic after rounds ``1..N`` (rows are runs)."""
        m = np.asarray(moves, dtype=float)
        n = np.arange(1, m.shape[-1] + 1, dtype=float)
        return np.cumsum(self.term(m, n), axis=-1)


def detectors_for(game: str, hedge=None, ladder=None, r=None, c=0.0) -> list:
    ids = {"single": SINGLE_EVENTS, "hedge_set": COUNTABLE_EVENTS, "mz": MZ_EVENTS}.get(game)
    if ids is None:
        raise ConfigurationError(f"game: unknown {game!r}")
    return [EventDetector(e, hedge=hedge, ladder=ladder, r=r, c=c) for e in ids]


def checkpoints(horizon: int) -> list:
    """1-2-5 checkpoints up to ``horizon`` plus the horizon itself."""
    out, dec = [], 1
    while dec <= horizon:
        out.extend(v for v in (dec, 2 * dec, 5 * dec) if v <= horizon)
        dec *= 10
    if not out or out[-1] != horizon:
        out.append(horizon)
    return sorted(set(out))


def write_detectors_csv(path, series: dict, horizon: int) -> None:
    """Long format ``n, event_id, partial_stat`` at :func:`checkpoints`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "event_id", "partial_stat"])
        for n in checkpoints(horizon):
            for eid, s in series.items():
                w.writerow([n, eid, format(float(s[n - 1]), ".17g")])


@dataclass
class Membership:
    """Finite-horizon reading of one event's partial statistic."""

    event_id: str
    partial: float
    last_decade_increment: float
    cauchy_increment: float
    converges: bool
    label: str = "finite-horizon evidence"


def event_membership(event_id: str, series: np.ndarray, tol: float = CAUCHY_TOL) -> Membership:
    s = np.asarray(series, dtype=float)
    N = len(s)
    last = float(s[-1])
    dec = last - float(s[max(N // 10 - 1, 0)])
    half = last - float(s[max(N // 2 - 1, 0)])
    if event_id in NONNEGATIVE:
        ok = abs(half) <= tol * max(1.0, abs(last))
    else:
        window = s[max(N // 2 - 1, 0):]
        ok = float(np.max(window) - np.min(window)) <= tol * max(1.0, abs(last))
    return Membership(event_id, last, dec, half, ok)


# --------------------------------------------------------------------------
# inclusion checks


@dataclass
class InclusionReport:
    ok: bool
    failures: list = field(default_factory=list)
    checked: int = 0


def inclusion_checks(h: HedgeKind, nu_values: Sequence[float] = (0.5, 1.0, 3.0), n_max: int = 50,
                     grid_step: float = 0.01, c: float = 0.0, tol: float = 1e-9) -> InclusionReport:
    """Pointwise dominances behind the event inclusions.

    * ``h(z)/h(n) >= I(z >= n)`` (``h`` increasing beyond c);
    * ``z**2/n**2 <= h(z)/h(n)`` for ``0 < z <= n`` when ``h(x)/x**2`` is decreasing;
    * ``(x - nu)**2 <= 2 x**2 + 2 nu**2``.
    """
    failures = []
    checked = 0
    start = max(1, math.ceil(c))
    z = np.arange(grid_step, 3.0 * n_max, grid_step)
    hz = np.asarray(eval_hedge(h, z), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio2 = hz / z**2
    quad_dec = bool(np.all(np.diff(ratio2[z >= start]) <= tol * np.abs(ratio2[z >= start][1:])))
    for n in range(start, n_max + 1):
        hn = float(eval_hedge(h, float(n)))
        lhs = hz / hn
        sel = z >= n
        bad = np.nonzero(lhs[sel] < 1.0 - tol)[0]
        checked += int(sel.sum())
        if len(bad):
            failures.append(f"h(z)/h(n) >= 1 fails at (z={z[sel][bad[0]]:.6g}, n={n})")
        if quad_dec:
            sel = (z >= start) & (z <= n)
            bad = np.nonzero(z[sel] ** 2 / n**2 > lhs[sel] + tol)[0]
            checked += int(sel.sum())
            if len(bad):
                failures.append(f"z^2/n^2 <= h(z)/h(n) fails at (z={z[sel][bad[0]]:.6g}, n={n})")
    xs = np.linspace(-3.0 * n_max, 3.0 * n_max, 6001)
    for nu in nu_values:
        bad = np.nonzero((xs - nu) ** 2 > 2 * xs**2 + 2 * nu**2 + tol)[0]
        checked += len(xs)
        if len(bad):
            failures.append(f"(x-nu)^2 <= 2x^2 + 2nu^2 fails at (x={xs[bad[0]]:.6g}, nu={nu})")
    return InclusionReport(not failures, failures, checked)


# --------------------------------------------------------------------------
# Kronecker and Cesaro


@dataclass
class KroneckerReport:
    weighted_sum: float
    average: float
    cauchy_increment: float
    series_stable: bool
    average_small: bool
    applicable: bool
    consistent: bool
    label: str = "finite-horizon evidence"


def kronecker_check(a, b, tol: float = CAUCHY_TOL, small: float = 0.05) -> KroneckerReport:
    """``sum a_n/b_n`` stable over [N/2, N] should go with ``(1/b_N) sum a_n`` near 0.

    When the weighted series is not stable the lemma does not apply and the
    report says so rather than failing.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.diff(b) < 0) or b[0] <= 0:
        raise ConfigurationError("b must be positive and non-decreasing")
    partial = np.cumsum(a / b)
    N = len(a)
    window = partial[N // 2 - 1 :] if N >= 2 else partial
    spread = float(np.max(window) - np.min(window))
    stable = spread <= tol * max(1.0, abs(float(partial[-1])))
    avg = math.fsum(a) / float(b[-1])
    avg_small = abs(avg) <= small
    return KroneckerReport(float(partial[-1]), avg, spread, stable, avg_small, stable, (not stable) or avg_small)


@dataclass
class CesaroReport:
    ok: bool
    failures: list
    averages: dict
    decreasing: bool


def cesaro_price_check(ladder_1r: PriceLadder, ladder_2r: PriceLadder, r: float, N: int,
                       tol: float = 1e-12) -> CesaroReport:
    """``nu_{n^{1/r}} <= n**(1/r - 1) nu_{nr}`` for ``n <= N`` and the average ``(1/N**(1/r)) sum nu_{i^{1/r}}``."""
    lad1 = ladder_1r.extended(N)
    lad2 = ladder_2r.extended(N)
    n = np.arange(1, N + 1, dtype=float)
    lhs = lad2.prices[1 : N + 1]
    rhs = n ** (1.0 / r - 1.0) * lad1.prices[1 : N + 1]
    bad = np.nonzero(lhs > rhs + tol * np.maximum(1.0, rhs))[0]
    failures = [f"price inequality fails at n={int(n[i])}: {lhs[i]!r} > {rhs[i]!r}" for i in bad[:5]]
    cs = np.cumsum(lhs) / n ** (1.0 / r)
    pts = checkpoints(N)
    averages = {p: float(cs[p - 1]) for p in pts}
    vals = [averages[p] for p in pts if p >= 10] or list(averages.values())
    decreasing = all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    return CesaroReport(not failures, failures, averages, decreasing)


def upcrossing_count(series, a: float, b: float) -> int:
    """Completed upcrossings of [a, b] by ``K_0, ..., K_N``."""
    if not a < b:
        raise ConfigurationError("need a < b")
    return kernels.upcrossing_count(np.asarray(series, dtype=float), a, b)


# --------------------------------------------------------------------------
# growth and Doob


@dataclass
class GrowthReport:
    log_final: float
    decade_slope: float
    max_over_final: float
    trend: str
    label: str = "finite-horizon evidence"


def growth_report(log_capital, margin: float = 0.1) -> GrowthReport:
    """``log K_N - log K_{N/10}`` and ``max K / K_N`` for one run."""
    lk = np.asarray(log_capital, dtype=float)
    N = len(lk) - 1
    slope = float(lk[-1] - lk[max(N // 10, 0)])
    ratio = float(np.exp(np.max(lk) - lk[-1])) if np.isfinite(lk[-1]) else math.inf
    trend = "growing" if slope > margin else ("flat" if slope > -margin else "declining")
    return GrowthReport(float(lk[-1]), slope, ratio, trend)


def wilson_interval(k: int, n: int, conf: float = 0.99):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ConfigurationError("need at least one trial")
    z = float(norm.ppf(0.5 + conf / 2.0))
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class DoobReport:
    c: float
    runs: int
    horizon: int
    hits: int
    estimate: float
    ci_low: float
    ci_high: float
    passes: bool
    mean_threshold_count: float
    expected_threshold_count: Optional[float]
    late_hit_fraction: float
    median_final: float
    median_max: float

    def summary(self) -> str:
        lines = [
            f"P(max_k K_k >= {self.c:g}) ~ {self.estimate:.6g} (99% Wilson [{self.ci_low:.6g}, {self.ci_high:.6g}])",
            f"Doob bound 1/c = {1 / self.c:.6g}: {'consistent' if self.passes else 'VIOLATED'}",
            f"mean count of threshold moves: {self.mean_threshold_count:.6g}"
            + ("" if self.expected_threshold_count is None else f" (expected {self.expected_threshold_count:.6g})"),
            f"runs with a threshold move in the last decade: {self.late_hit_fraction:.4g}",
            f"median final K: {self.median_final:.6g}; median max K: {self.median_max:.6g}",
        ]
        return "\n".join(lines)


def doob_check(strategy: SkepticStrategy, adversary, c: float, runs: int, horizon: int,
               batch: int = 250, conf: float = 0.99) -> DoobReport:
    """Monte Carlo estimate of ``P(max_{k<=N} K_k >= c)`` against Doob's ``1/c``.

    ``adversary`` must provide ``paths(n_rounds, runs)``; the threshold
    count is the number of non-zero moves (the adversary moves only to
    ``0`` or ``+-m_n``).
    """
    if not c > 1:
        raise ConfigurationError("c must be > 1")
    k0 = strategy.initial_capital
    hits = 0
    counts, late, finals, maxes = [], [], [], []
    for start in range(0, runs, batch):
        ids = range(start, min(runs, start + batch))
        x = adversary.paths(horizon, ids)
        t = strategy.trajectory(x)
        t.check_collateral(k0)
        lk = np.atleast_2d(t.log_k) - math.log(k0)
        top = np.max(lk, axis=1)
        hits += int(np.sum(top >= math.log(c)))
        nz = x != 0
        counts.append(nz.sum(axis=1))
        late.append(nz[:, horizon - horizon // 10 :].any(axis=1))
        finals.append(np.exp(lk[:, -1]))
        maxes.append(np.exp(top))
    counts = np.concatenate(counts)
    lo, hi = wilson_interval(hits, runs, conf)
    expected = adversary.expected_count(horizon) if hasattr(adversary, "expected_count") else None
    return DoobReport(
        c, runs, horizon, hits, hits / runs, lo, hi, lo <= 1.0 / c,
        float(np.sum(counts, dtype=float) / runs), expected, float(np.mean(np.concatenate(late))),
        float(np.median(np.concatenate(finals))), float(np.median(np.concatenate(maxes))),
    )
