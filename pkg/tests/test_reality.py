import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gtslln.errors import ConfigurationError
from gtslln.game import run_game
from gtslln.hedges import DiscreteMeasure, GeneralSymmetric, PowerHedge, eval_hedge
from gtslln.reality import (
    PATH_KINDS,
    RNG_NAME,
    Adversary,
    AdversarySpec,
    DeterministicPath,
    IIDSampler,
    make_generator,
    read_path_csv,
    reality_from_config,
    write_path_csv,
)
from gtslln.strategies import NullStrategy

LOGABS = GeneralSymmetric.log_power(1.0, 1.0)


def test_rng_name_is_pinned():
    assert RNG_NAME == "philox4x64-v1"
    assert isinstance(make_generator(1, 2).bit_generator, np.random.Philox)


def test_prop1_law_at_n_2():
    adv = Adversary(AdversarySpec("prop1", nu=1.0, r=1.0))
    q, m = adv.law(2)
    assert (q, m) == (0.5, 2.0)
    u = np.array([0.0, 0.2499, 0.25, 0.4999, 0.5, 0.99])
    assert list(adv._from_uniform(u, np.full(6, 2.0))) == [2.0, 2.0, -2.0, -2.0, 0.0, 0.0]


@pytest.mark.parametrize(
    "spec, h",
    [
        (AdversarySpec("prop1", 2.5, r=1.5), PowerHedge(1.5)),
        (AdversarySpec("prop1", 1.0, r=1.0), PowerHedge(1.0)),
        (AdversarySpec("propA3", 1.0, hedge=LOGABS), LOGABS),
        (AdversarySpec("propA3", 3.0, hedge=PowerHedge(2.0)), PowerHedge(2.0)),
    ],
)
def test_adversary_law_is_priced_exactly(spec, h):
    adv = Adversary(spec)
    n = np.arange(1, 2001, dtype=float)
    q, m = adv.law(n)
    active = q > 0
    assert np.all(q <= 1)
    # symmetric three-point law: mean zero, E h(x) = nu when active
    hm = np.asarray(eval_hedge(h, m), dtype=float)
    assert np.allclose((q * hm)[active], spec.nu, rtol=1e-12)
    # a bet (M, V h) has zero expected increment
    for stake, v in [(3.0, 0.7), (-1.0, 2.0)]:
        ev = 0.5 * q * (stake * m + v * (hm - spec.nu)) + 0.5 * q * (-stake * m + v * (hm - spec.nu)) + (1 - q) * v * (0 - spec.nu)
        assert np.allclose(ev[active], 0.0, atol=1e-12 * (1 + np.abs(stake * m[active])))


def test_inactive_rounds_emit_zero():
    adv = Adversary(AdversarySpec("prop1", 5.0, r=1.0, seed=3))
    x = adv.path(5000)
    assert np.all(x[:5] == 0)
    assert np.all(np.isin(np.abs(x[x != 0]), np.arange(6, 5001)))


def test_adversary_count_matches_expectation():
    adv = Adversary(AdversarySpec("prop1", 1.0, r=1.2, seed=11))
    counts = (adv.paths(2000, range(400)) != 0).sum(axis=1)
    assert abs(counts.mean() - adv.expected_count(2000)) < 4 * counts.std() / 20


def test_adversary_spec_validation():
    with pytest.raises(ConfigurationError):
        AdversarySpec("prop2", 1.0)
    with pytest.raises(ConfigurationError):
        AdversarySpec("prop1", 1.0)
    with pytest.raises(ConfigurationError):
        AdversarySpec("propA3", 1.0)
    with pytest.raises(ConfigurationError):
        AdversarySpec("prop1", -1.0, r=1.0)


@given(seed=st.integers(0, 2**32), cut=st.integers(1, 299))
def test_streams_are_chunk_invariant(seed, cut):
    adv = Adversary(AdversarySpec("prop1", 1.0, r=1.0, seed=seed))
    whole = adv.path(300, run=2)
    parts = np.concatenate([adv.path(cut, run=2), adv.path(300 - cut, run=2, start=cut + 1)])
    assert np.array_equal(whole, parts)


def test_engine_moves_match_path(laplace):
    for reality in (IIDSampler(laplace, 9), Adversary(AdversarySpec("prop1", 1.0, r=1.0, seed=9))):
        run = run_game(NullStrategy(), reality, 200, run=4)
        assert np.array_equal(np.array(run.history.moves), reality.path(200, run=4))


def test_runs_and_seeds_are_independent_and_reproducible(laplace):
    a = IIDSampler(laplace, 1)
    assert np.array_equal(a.path(50, run=3), IIDSampler(laplace, 1).path(50, run=3))
    assert not np.array_equal(a.path(50, run=3), a.path(50, run=4))
    assert not np.array_equal(a.path(50), IIDSampler(laplace, 2).path(50))


def test_iid_sample_moments(laplace, three_point):
    x = IIDSampler(laplace, 5).path(200000)
    assert abs(x.mean()) < 4 * math.sqrt(2 / 200000)
    assert np.mean(np.abs(x)) == pytest.approx(1.0, abs=0.01)
    y = IIDSampler(three_point, 5).path(30000)
    assert set(np.unique(y)) == {-2.0, 0.0, 2.0}
    assert np.mean(y == 0) == pytest.approx(1 / 3, abs=0.01)


def test_point_mass_gives_zeros():
    assert np.all(IIDSampler(DiscreteMeasure.uniform([0.0]), 0).path(100) == 0)


def test_pareto_tail_index(pareto):
    a = np.sort(np.abs(IIDSampler(pareto, 8).path(200000)))[::-1]
    k = 5000
    hill = 1 / np.mean(np.log(a[:k] / a[k]))
    assert hill == pytest.approx(1.5, rel=0.06)


def test_deterministic_kinds():
    n = np.arange(1, 9)
    assert np.all(DeterministicPath("zeros").values(n) == 0)
    assert np.all(DeterministicPath("constant", 2.0).values(n) == 2.0)
    assert list(DeterministicPath("alternating").values(n[:4])) == [1, -1, 1, -1]
    assert list(DeterministicPath("spike").values(n)) == [1, 2, 0, 4, 0, 0, 0, 8]
    assert list(DeterministicPath("spike", 0.5, schedule=[3, 5]).values(n[:5])) == [0, 0, 1.5, 0, 2.5]
    assert list(DeterministicPath("linear", 3.0).values(n[:3])) == [3, 6, 9]
    h = DeterministicPath("harmonic_drift").values(n)
    assert np.allclose(h, np.cumsum(1 / n), rtol=1e-14)
    with pytest.raises(ConfigurationError):
        DeterministicPath("sawtooth")


def test_deterministic_engine_matches_values():
    for kind in PATH_KINDS:
        p = DeterministicPath(kind, 1.5)
        run = run_game(NullStrategy(), p, 40)
        assert np.array_equal(run.history.moves, p.path(40))


def test_csv_round_trip(tmp_path, rng):
    x = rng.standard_cauchy(100)
    f = tmp_path / "p.csv"
    write_path_csv(f, x)
    assert open(f).readline().strip() == "n,x_n"
    assert np.array_equal(read_path_csv(f).path(100), x)
    bad = tmp_path / "bad.csv"
    bad.write_text("n,y\n1,2\n")
    with pytest.raises(ConfigurationError):
        read_path_csv(bad)


def test_reality_from_config(laplace):
    assert isinstance(reality_from_config({"id": "iid"}, 1, laplace), IIDSampler)
    adv = reality_from_config({"id": "propA3", "nu": 1.0}, 1)
    assert adv.spec.hedge == PowerHedge(1.0)
    assert reality_from_config({"id": "spike", "c": 2}).c == 2.0
    with pytest.raises(ConfigurationError):
        reality_from_config({"id": "iid"})
    with pytest.raises(ConfigurationError):
        reality_from_config({"id": "martian"})
