"""Ground truth by brute force: MD enumeration, hull maximization, simulation.

None of this shares code with the LP-based analyses beyond the chain solver,
so agreement between the two is meaningful evidence.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import product as cartesian
from typing import NamedTuple, Tuple

import numpy as np

from .chain import wr_moments
from .config import DEFAULT
from .errors import AssumptionError, BudgetError
from .model import MemorylessScheduler, MixWeight, md_count

MAX_STEPS = 10**7
CHUNK = 1 << 14


class HullPoint(NamedTuple):
    e1: object
    e2: object
    key: Tuple[int, ...]


class SimEstimate(NamedTuple):
    mean: float
    var: float          # variance of the estimator
    n: int
    seed: int

    @property
    def stderr(self):
        return math.sqrt(self.var)


def enumerate_md(m, cap=DEFAULT.md_cap):
    """Every memoryless deterministic scheduler, in lexicographic order."""
    count = md_count(m)
    if cap is not None and count > cap:
        raise BudgetError(f"{count} deterministic schedulers exceed the cap of {cap}", required=count)
    for keys in cartesian(*m.enabled):
        yield MemorylessScheduler.deterministic(keys)


def md_points(m, config=DEFAULT, payoff=None, cap=DEFAULT.md_cap):
    """Moments of every MD scheduler. Cached on the model for the default payoff."""
    ck = ("md_points", config.exact) if payoff is None else None
    if ck is not None and ck in m._cache:
        return m._cache[ck]
    out = []
    memo = {}
    terminals = m.terminals
    for sched in enumerate_md(m, cap):
        # schedulers differing only on unreachable states share their moments
        key = sched.key()
        reach = _reach_key(m, key, terminals)
        if reach not in memo:
            mom = wr_moments(m, sched, config, payoff)
            memo[reach] = (mom.e1, mom.e2)
        e1, e2 = memo[reach]
        out.append(HullPoint(e1, e2, key))
    if ck is not None:
        m._cache[ck] = out
    return out


def _reach_key(m, key, terminals):
    seen = {m.initial}
    stack = [m.initial]
    while stack:
        s = stack.pop()
        if s in terminals:
            continue
        for t, _ in m.trans[s, key[s]]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return tuple(sorted((s, key[s]) for s in seen))


def exact_demvar(m, config=DEFAULT, payoff=None, cap=DEFAULT.md_cap):
    """Best pair of MD schedulers by exhaustive search: ``(value, (key1, key2))``.

    Ties go to the lexicographically smallest pair ``key1 <= key2``.
    """
    pts = md_points(m, config, payoff, cap)
    if config.exact:
        best = None
        for i, p in enumerate(pts):
            vp = p.e2 - p.e1 * p.e1
            for q in pts[i:]:
                d = p.e1 - q.e1
                v = (vp + q.e2 - q.e1 * q.e1 + d * d) / 2
                if best is None or v > best[0]:
                    best = (v, (p.key, q.key))
        return best
    e1 = np.array([float(p.e1) for p in pts])
    var = np.array([float(p.e2) for p in pts]) - e1 * e1
    vals = (var[:, None] + var[None, :] + (e1[:, None] - e1[None, :]) ** 2) / 2
    vals = np.triu(vals) + np.tril(np.full_like(vals, -np.inf), -1)
    top = vals.max()
    i, j = np.argwhere(vals >= top - config.tol * max(1.0, abs(top)))[0]
    return float(vals[i, j]), (pts[i].key, pts[j].key)


def upper_hull(points):
    """Upper convex hull of ``(e1, e2)`` points, left to right (monotone chain)."""
    pts = sorted(set((p[0], p[1]) for p in points))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly above the chord
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    # equal e1: only the highest e2 belongs to the upper hull
    dedup = []
    for p in hull:
        if dedup and dedup[-1][0] == p[0]:
            dedup[-1] = max(dedup[-1], p)
        else:
            dedup.append(p)
    return dedup


def hull_maxvar_detail(m, config=DEFAULT, payoff=None, cap=DEFAULT.md_cap):
    """``(value, e1, left vertex, right vertex)`` of the best point on the hull."""
    pts = md_points(m, config, payoff, cap)
    hull = upper_hull([(p.e1, p.e2) for p in pts])
    best = None
    for v in hull:
        val = v[1] - v[0] * v[0]
        if best is None or val > best[0]:
            best = (val, v[0], v, v)
    for (a1, a2), (b1, b2) in zip(hull, hull[1:]):
        lam = (b2 - a2) / (b1 - a1)
        c = min(max(lam / 2, a1), b1)
        val = a2 + lam * (c - a1) - c * c
        if val > best[0]:
            best = (val, c, (a1, a2), (b1, b2))
    return best


def hull_maxvar(m, config=DEFAULT, payoff=None, cap=DEFAULT.md_cap):
    """Maximal variance via the upper hull of MD moment points."""
    return hull_maxvar_detail(m, config, payoff, cap)[0]


# --- simulation --------------------------------------------------------------

class _Tables:
    """Padded sampling tables for vectorized trajectory simulation."""

    def __init__(self, m, payoff_terminal):
        self.m = m
        pairs = [(s, a) for s in range(m.n) for a in m.enabled[s]]
        self.pair_id = {p: i for i, p in enumerate(pairs)}
        width = max(len(m.trans[p]) for p in pairs)
        self.succ = np.zeros((len(pairs), width), dtype=np.int64)
        self.cum = np.ones((len(pairs), width))
        self.rew = np.zeros(len(pairs))
        for i, p in enumerate(pairs):
            dist = m.trans[p]
            acc = 0.0
            for k, (t, pr) in enumerate(dist):
                acc += float(pr)
                self.succ[i, k] = t
                self.cum[i, k] = acc
            self.cum[i, len(dist) - 1:] = 1.0
            self.succ[i, len(dist):] = dist[-1][0]
            self.rew[i] = float(m.rew(*p))
        self.terminal = np.zeros(m.n, dtype=bool)
        self.weight = np.zeros(m.n)
        for q in m.terminals:
            self.terminal[q] = True
            if payoff_terminal:
                self.weight[q] = float(m.terminal_weight.get(q, 0))


class _Policy:
    """Action sampling table indexed by (state, counter level)."""

    def __init__(self, tables, sched):
        m = tables.m
        if isinstance(sched, MemorylessScheduler):
            levels = [sched.choice]
            self.cap = 0
        else:
            levels, self.cap = sched.levels(m)
        width = max(len(d) for lv in levels for d in lv)
        self.pair = np.zeros((len(levels), m.n, width), dtype=np.int64)
        self.cum = np.ones((len(levels), m.n, width))
        for w, lv in enumerate(levels):
            for s, d in enumerate(lv):
                items = sorted(d.items())
                acc = 0.0
                for k, (a, p) in enumerate(items):
                    acc += float(p)
                    self.pair[w, s, k] = tables.pair_id[s, a]
                    self.cum[w, s, k] = acc
                self.cum[w, s, len(items) - 1:] = 1.0
                self.pair[w, s, len(items):] = self.pair[w, s, len(items) - 1]


def _pick(cum, u):
    return (u[:, None] > cum).sum(axis=1).clip(max=cum.shape[1] - 1)


def _run(tables, policy, n, rng):
    """Sample ``n`` payoffs under one schedule."""
    state = np.full(n, tables.m.initial, dtype=np.int64)
    acc = np.zeros(n)
    active = np.nonzero(~tables.terminal[state])[0]
    steps = 0
    while len(active):
        steps += 1
        if steps > MAX_STEPS:
            raise AssumptionError(
                f"trajectory exceeded {MAX_STEPS} steps; an end component was not collapsed")
        s = state[active]
        lvl = np.minimum(acc[active], policy.cap).astype(np.int64)
        k = _pick(policy.cum[lvl, s], rng.random(len(active)))
        pair = policy.pair[lvl, s, k]
        acc[active] += tables.rew[pair]
        j = _pick(tables.cum[pair], rng.random(len(active)))
        state[active] = tables.succ[pair, j]
        active = active[~tables.terminal[state[active]]]
    return acc + tables.weight[state]


def _workers():
    try:
        return max(1, int(os.environ.get("DEMVAR_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(n, seed, job):
    """Run ``job(size, rng)`` over fixed-size chunks with per-chunk streams.

    Chunk ``i`` always draws from ``Philox(SeedSequence([seed, i]))``, so the
    samples do not depend on how many workers run the chunks.
    """
    sizes = [min(CHUNK, n - i) for i in range(0, n, CHUNK)]

    def one(i):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, i])))
        return job(sizes[i], rng)

    workers = min(_workers(), len(sizes))
    if workers <= 1:
        parts = [one(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    return np.concatenate(parts) if parts else np.zeros(0)


def sample_payoffs(m, sched, n, seed=0):
    """``n`` independent payoff samples under one schedule."""
    tables = _Tables(m, m.terminal_weight is not None)
    policy = _Policy(tables, sched)
    return _chunked(n, seed, lambda k, rng: _run(tables, policy, k, rng))


def sample_pairs(m, s, t, n, seed=0):
    """``n`` samples of ``(X1, X2)`` from two independent copies."""
    tables = _Tables(m, m.terminal_weight is not None)
    ps, pt = _Policy(tables, s), _Policy(tables, t)

    def job(k, rng):
        x1 = _run(tables, ps, k, rng)
        x2 = _run(tables, pt, k, rng)
        return np.stack([x1, x2], axis=1)

    out = _chunked(n, seed, job)
    return out.reshape(-1, 2)


def simulate_pair(m, s, t, n, seed=0):
    """Estimate ``E[(X1 - X2)^2] / 2`` for independent runs under ``s`` and ``t``."""
    if n < 1:
        raise ValueError("need at least one sample")
    xy = sample_pairs(m, s, t, n, seed)
    z = 0.5 * (xy[:, 0] - xy[:, 1]) ** 2
    mean = math.fsum(z) / n
    var = float(np.var(z, ddof=1)) / n if n > 1 else 0.0
    return SimEstimate(mean, var, n, seed)


def simulate_mixture(m, s, t, p, n, seed=0):
    """Estimate the payoff variance when a p-coin picks ``s`` (else ``t``) up front."""
    if n < 1:
        raise ValueError("need at least one sample")
    if isinstance(p, MixWeight):
        p = p.p
    p = float(p)
    tables = _Tables(m, m.terminal_weight is not None)
    ps, pt = _Policy(tables, s), _Policy(tables, t)

    def job(k, rng):
        coin = rng.random(k) < p
        x = np.empty(k)
        n1 = int(coin.sum())
        x[coin] = _run(tables, ps, n1, rng) if n1 else 0
        x[~coin] = _run(tables, pt, k - n1, rng) if k - n1 else 0
        return x

    x = _chunked(n, seed, job)
    mu = math.fsum(x) / n
    d = x - mu
    m2 = math.fsum(d * d) / n
    m4 = math.fsum(d ** 4) / n
    est = m2 * n / (n - 1) if n > 1 else 0.0
    return SimEstimate(est, max(m4 - m2 * m2, 0.0) / n, n, seed)


def exact_value(x):
    """Render an oracle value for reports (exact strings for fractions)."""
    return str(x) if isinstance(x, Fraction) else x
