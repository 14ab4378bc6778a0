"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly as ``python tests/test_acceptance.py``.
"""

import math
import random
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from demvar import (MemorylessScheduler, MixWeight, acc_demonic_variance, acc_max_variance,
                    analyze, demonic_variance, max_variance, mix_variance, pair_variance,
                    product, product_scheduler, wr_moments)
from demvar.accrew import prepare, schedule_moments, unfold
from demvar.chain import acc_moments
from demvar.oracle import (exact_demvar, hull_maxvar, md_points, sample_pairs,
                           simulate_mixture)
from demvar.randmodels import random_transition_system, random_wr_model

from conftest import EXACT, FLOAT, REWARD, WEIGHTED, load

TOL = 1e-6
RESULTS = {}


def report(n, ok, detail):
    """Record and print the criterion line; conftest repeats them in the summary."""
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _fig2_models():
    return ["fig2a", "fig2b", "fig2c", "fig2d"]


def _random_models():
    return [random_wr_model(seed) for seed in range(200)]


def _random_ms(m, rng, den=4):
    choice = []
    for e in m.enabled:
        ws = [rng.randint(1, den) for _ in e]
        choice.append({a: Fraction(w, sum(ws)) for a, w in zip(e, ws)})
    return MemorylessScheduler(tuple(choice))


def _random_md(m, rng):
    return MemorylessScheduler.deterministic([rng.choice(e) for e in m.enabled])


# --- 1 ------------------------------------------------------------------------

def test_criterion_1_fig1_golden():
    t0 = time.perf_counter()
    want = {"fig1_m": (4, 4, 0), "fig1_n": (4, 5, Fraction(1, 4))}
    problems = []
    for name, (mx, dm, nd) in want.items():
        m = load(name)
        ex = analyze(m, EXACT)
        if (ex.maxvar, ex.demvar, ex.nds) != (mx, dm, nd):
            problems.append(f"{name} rational {ex.maxvar} {ex.demvar} {ex.nds}")
        fl = analyze(m, FLOAT)
        if max(abs(fl.maxvar - mx), abs(fl.demvar - dm), abs(fl.nds - float(nd))) > TOL:
            problems.append(f"{name} double {fl.maxvar} {fl.demvar} {fl.nds}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1:
        problems.append(f"runtime {elapsed:.3f}s")
    ok = report(1, not problems, f"fig1 golden values, {elapsed:.3f}s " + "; ".join(problems))
    assert ok


# --- 2 ------------------------------------------------------------------------

def test_criterion_2_nds_ladder():
    nds_want = [0, Fraction(23, 73), Fraction(2397, 2601), 1]
    mx_want = [Fraction(19, 18), Fraction(73, 64), Fraction(2601, 1764), Fraction(9, 4)]
    problems = []
    got = []
    for name, nd, mx in zip(_fig2_models(), nds_want, mx_want):
        m = load(name)
        fl = analyze(m, FLOAT)
        ex = analyze(m, EXACT)
        got.append(f"{fl.nds:.5f}")
        if abs(fl.nds - float(nd)) > TOL or ex.nds != nd:
            problems.append(f"{name} nds {fl.nds}")
        if hull_maxvar(m, EXACT) != mx or ex.maxvar != mx or abs(fl.maxvar - float(mx)) > TOL:
            problems.append(f"{name} maxvar {ex.maxvar}")
    ok = report(2, not problems, "NDS ladder " + " / ".join(got) + " " + "; ".join(problems))
    assert ok


# --- 3 ------------------------------------------------------------------------

def test_criterion_3_oracle_equivalence():
    t0 = time.perf_counter()
    cfg = FLOAT.with_(auto_oracle=False)
    worst_mx = worst_dm = 0.0
    bad = []
    for seed, m in enumerate(_random_models()):
        dmx = abs(max_variance(m, cfg).value - hull_maxvar(m, cfg))
        ddm = abs(demonic_variance(m, cfg).value - exact_demvar(m, cfg)[0])
        worst_mx, worst_dm = max(worst_mx, dmx), max(worst_dm, ddm)
        if dmx > TOL or ddm > TOL:
            bad.append(seed)
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    report(3, ok, f"200 random models, max gaps {worst_mx:.2e} / {worst_dm:.2e}, "
                  f"{elapsed:.1f}s, failing seeds {bad[:10]}")
    assert ok


# --- 4 ------------------------------------------------------------------------

def test_criterion_4_sandwich():
    models = [load(n) for n in ["fig1_m", "fig1_n"] + _fig2_models()] + _random_models()
    bad = []
    for i, m in enumerate(models):
        mx, dm = max_variance(m, FLOAT).value, demonic_variance(m, FLOAT).value
        if not (mx - 1e-9 <= dm <= 2 * mx + 1e-7):
            bad.append(i)
    for name in REWARD:
        r = analyze(load(name), FLOAT, need_nds=False)
        if not (r.maxvar - 1e-9 <= r.demvar <= 2 * r.maxvar + 1e-7):
            bad.append(name)
    ok = report(4, not bad, f"{len(models) + len(REWARD)} models, violations {bad}")
    assert ok


# --- 5 ------------------------------------------------------------------------

def test_criterion_5_identities():
    n = 200_000
    rng = random.Random(2024)
    worst_sigma = 0.0
    worst_prod = 0.0
    bad = []
    for i in range(50):
        m = random_wr_model(1000 + i, max_inner=4)
        s, t = _random_ms(m, rng), _random_ms(m, rng)
        m1, m2 = wr_moments(m, s, EXACT), wr_moments(m, t, EXACT)
        p = Fraction(rng.randint(1, 15), 16)
        want = float(mix_variance(m1, m2, MixWeight(p)))
        est = simulate_mixture(m, s, t, p, n, seed=i)
        z = abs(est.mean - want) / est.stderr if est.stderr > 0 else (0 if est.mean == want else math.inf)
        worst_sigma = max(worst_sigma, z)
        pr = product(m, m)
        second = wr_moments(pr, product_scheduler(s, t, len(m.actions)), FLOAT).e2
        gap = abs(float(pair_variance(m1, m2)) - second / 2)
        worst_prod = max(worst_prod, gap)
        if z > 4 or gap > 1e-9:
            bad.append(i)
    ok = report(5, not bad, f"50 pairs, mixture worst {worst_sigma:.2f} sigma, "
                            f"product gap {worst_prod:.1e}, failing {bad}")
    assert ok


# --- 6 ------------------------------------------------------------------------

def test_criterion_6_chebyshev():
    n = 100_000
    ks = (1.5, 2.0, 3.0)
    rng = random.Random(7)
    bad = []
    worst = -math.inf
    for name in WEIGHTED + REWARD:
        m = load(name)
        dm = float(analyze(m, FLOAT, need_nds=False).demvar)
        for j in range(20):
            s, t = _random_md(m, rng), _random_md(m, rng)
            xy = sample_pairs(m, s, t, n, seed=j)
            diff = np.abs(xy[:, 0] - xy[:, 1])
            for k in ks:
                bound = min(1.0, 2 / k ** 2)
                freq = float((diff >= k * math.sqrt(dm)).mean()) if dm > 0 else 0.0
                sigma = math.sqrt(bound * (1 - bound) / n)
                worst = max(worst, freq - bound)
                if freq > bound + 4 * sigma:
                    bad.append((name, j, k, freq))
    # the two fig1_n witnesses differ by at most 4 < 2 * sqrt(5)
    m = load("fig1_n")
    pair = demonic_variance(m, FLOAT).witness
    xy = sample_pairs(m, pair[0], pair[1], n, seed=99)
    freq_n = float((np.abs(xy[:, 0] - xy[:, 1]) >= 2 * math.sqrt(5)).mean())
    if freq_n != 0:
        bad.append(("fig1_n witness", freq_n))
    ok = report(6, not bad, f"{len(WEIGHTED + REWARD)} models x 20 pairs, max excess over bound "
                            f"{worst:+.4f}, fig1_n k=2 frequency {freq_n}, failing {bad[:5]}")
    assert ok


# --- 7 ------------------------------------------------------------------------

def _memoryless_grid_best(m, step=Fraction(1, 64)):
    """Best variance over memoryless schedulers with probabilities on a grid."""
    prep = prepare(m, EXACT)
    pm = prep.collapsed
    choice_states = [s for s in range(pm.n) if len(pm.enabled[s]) > 1]
    assert all(len(pm.enabled[s]) == 2 for s in choice_states)
    grid = [step * i for i in range(int(1 / step) + 1)]
    best = None
    for ps in __import__("itertools").product(grid, repeat=len(choice_states)):
        choice = [{pm.enabled[s][0]: 1} for s in range(pm.n)]
        for s, p in zip(choice_states, ps):
            a, b = pm.enabled[s]
            choice[s] = {k: v for k, v in ((a, p), (b, 1 - p)) if v}
        v = acc_moments(pm, MemorylessScheduler(tuple(choice)), EXACT).variance
        best = v if best is None else max(best, v)
    return best


def test_criterion_7_accumulated():
    problems = []
    notes = []
    for name in ("tm1", "acc_memory"):
        m = load(name)
        prep = prepare(m, EXACT)
        ctx = prep.ctx
        mx = acc_max_variance(m, EXACT, prep)
        dm = acc_demonic_variance(m, EXACT.with_(auto_oracle=False), prep)
        if mx.info["heuristic_bound"] or dm.info["heuristic_bound"]:
            problems.append(f"{name} used a heuristic bound")
        u = unfold(prep.collapsed, ctx, mx.info["bound"], EXACT)
        ud = unfold(prep.collapsed, ctx, dm.info["bound"], EXACT)
        h = hull_maxvar(u.mdp, EXACT, u.payoff)
        e = exact_demvar(ud.mdp, EXACT, ud.payoff)[0]
        if abs(mx.value - h) > TOL or abs(dm.value - e) > TOL:
            problems.append(f"{name} {mx.value} vs {h}, {dm.value} vs {e}")
        notes.append(f"{name} B={ctx.B} B'={ctx.Bprime} maxvar={mx.value} demvar={dm.value}")
        if name == "acc_memory":
            if not mx.witness.is_reward_dependent:
                problems.append("acc_memory witness is not reward-dependent")
            if schedule_moments(prep.collapsed, mx.witness, EXACT).variance != mx.value:
                problems.append("acc_memory witness does not attain the value")
            grid = _memoryless_grid_best(m)
            notes.append(f"best memoryless {grid}")
            if not mx.value - grid > 0:
                problems.append(f"memoryless {grid} not beaten")
    ok = report(7, not problems, "; ".join(notes + problems))
    assert ok


# --- 8 ------------------------------------------------------------------------

def test_criterion_8_transition_systems():
    models = [("fig2d", load("fig2d"))] + [(f"ts{i}", random_transition_system(i)) for i in range(10)]
    problems = []
    for name, m in models:
        pts = md_points(m, EXACT)
        emin, emax = min(p.e1 for p in pts), max(p.e1 for p in pts)
        r = demonic_variance(m, EXACT)
        s, t = r.witness
        if not (s.is_deterministic and t.is_deterministic):
            problems.append(f"{name} witness randomized")
        ms, mt = wr_moments(m, s, EXACT), wr_moments(m, t, EXACT)
        if max(ms.variance, mt.variance) > 1e-9:
            problems.append(f"{name} witness variance {ms.variance} {mt.variance}")
        if sorted([ms.e1, mt.e1]) != [emin, emax]:
            problems.append(f"{name} expectations {ms.e1}, {mt.e1} vs {emin}, {emax}")
        if analyze(m, EXACT).nds != 1:
            problems.append(f"{name} nds != 1")
    ok = report(8, not problems, f"{len(models)} transition systems; " + "; ".join(problems))
    assert ok


if __name__ == "__main__":
    fns = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for fn in fns:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
