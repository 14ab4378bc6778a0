import random
from fractions import Fraction

import numpy as np
import pytest

from demvar import MemorylessScheduler, MixWeight, mix_variance, pair_variance, wr_moments
from demvar.errors import BudgetError
from demvar.oracle import (enumerate_md, exact_demvar, hull_maxvar, md_points, sample_payoffs,
                           simulate_mixture, simulate_pair, upper_hull)

from conftest import EXACT, FLOAT, load


def test_enumeration_order_and_cap():
    m = load("fig1_n")
    keys = [s.key()[m.initial] for s in enumerate_md(m)]
    assert [m.actions[a] for a in keys] == ["alpha", "beta", "gamma"]
    with pytest.raises(BudgetError):
        list(enumerate_md(m, cap=2))


def test_upper_hull():
    pts = [(0, 0), (1, 3), (2, 2), (3, 0), (1, 1), (2, 2)]
    assert upper_hull(pts) == [(0, 0), (1, 3), (2, 2), (3, 0)]
    assert upper_hull([(0, 0), (1, 1), (2, 2)]) == [(0, 0), (2, 2)]
    assert upper_hull([(1, 0), (1, 5)]) == [(1, 5)]


def test_fig1_oracles():
    m = load("fig1_n")
    assert hull_maxvar(m, EXACT) == 4
    v, (k1, k2) = exact_demvar(m, EXACT)
    assert v == 5
    assert {m.actions[k1[m.initial]], m.actions[k2[m.initial]]} == {"alpha", "gamma"}
    assert exact_demvar(m, FLOAT)[0] == pytest.approx(5)


def test_md_points_cached():
    m = load("fig2c")
    a = md_points(m, EXACT)
    assert md_points(m, EXACT) is a


def test_sampling_reproducible():
    m = load("fig1_n")
    s = MemorylessScheduler.first_action(m)
    a = sample_payoffs(m, s, 5000, seed=7)
    b = sample_payoffs(m, s, 5000, seed=7)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 4.0}


def test_simulated_pair_close():
    m = load("fig1_n")
    al = MemorylessScheduler.deterministic(
        [m.action_index("alpha") if s == m.initial else m.enabled[s][0] for s in range(m.n)])
    ga = MemorylessScheduler.deterministic(
        [m.action_index("gamma") if s == m.initial else m.enabled[s][0] for s in range(m.n)])
    est = simulate_pair(m, al, ga, 50_000, seed=1)
    exact = pair_variance(wr_moments(m, al, EXACT), wr_moments(m, ga, EXACT))
    assert exact == 5
    assert abs(est.mean - 5) < 5 * est.stderr
    mix = simulate_mixture(m, al, ga, Fraction(1, 2), 50_000, seed=2)
    want = mix_variance(wr_moments(m, al, EXACT), wr_moments(m, ga, EXACT), MixWeight(Fraction(1, 2)))
    assert want == 4
    assert abs(mix.mean - 4) < 5 * mix.stderr


def test_reward_sampling_counts_rewards():
    m = load("tm1")
    s = MemorylessScheduler.first_action(m)
    x = sample_payoffs(m, s, 1000, seed=0)
    assert np.all(x == 2)
