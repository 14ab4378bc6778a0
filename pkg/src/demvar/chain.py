"""Markov chains induced by memoryless schedulers: reachability and moments.

Everything here solves ``(I - P_sigma) v = r`` over the non-terminal states
reachable under the scheduler. A singular system means some reachable set of
states never reaches a terminal, i.e. an end component survived preprocessing.
"""

from typing import NamedTuple

from . import numeric
from .config import DEFAULT
from .model import MixWeight


class Moments(NamedTuple):
    e1: object
    e2: object

    @property
    def variance(self):
        return self.e2 - self.e1 * self.e1


def _support_reach(m, sched, terminals):
    seen = {m.initial}
    stack = [m.initial]
    while stack:
        s = stack.pop()
        if s in terminals:
            continue
        for a in sched[s]:
            for t, _ in m.trans[s, a]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
    return seen


def _system(m, sched, cfg, terminals, everywhere=False):
    """Rows of ``I - P_sigma`` over the reachable (or all) non-terminals."""
    num = cfg.num
    reach = range(m.n) if everywhere else _support_reach(m, sched, terminals)
    inner = sorted(s for s in reach if s not in terminals)
    idx = {s: i for i, s in enumerate(inner)}
    rows = []
    for s in inner:
        row = {idx[s]: num(1)}
        for a, pa in sched[s].items():
            pa = num(pa)
            for t, p in m.trans[s, a]:
                if t in idx:
                    row[idx[t]] = row.get(idx[t], 0) - pa * num(p)
        rows.append(row)
    return inner, idx, rows


def occupation(m, sched, config=DEFAULT):
    """Expected number of visits to each reachable non-terminal state."""
    terminals = m.terminals
    inner, idx, rows = _system(m, sched, config, terminals)
    if not inner:
        return {}
    # visits solve nu (I - P) = 1_init, i.e. the transposed system
    trows = [dict() for _ in inner]
    for i, row in enumerate(rows):
        for j, v in row.items():
            trows[j][i] = v
    rhs = [[config.num(1 if s == m.initial else 0)] for s in inner]
    x = numeric.solve(trows, rhs, exact=config.exact)
    return {s: x[i][0] for i, s in enumerate(inner)}


def reach_probs(m, sched, config=DEFAULT):
    """Probability of ending in each terminal state (all terminals listed)."""
    terminals = m.terminals
    num = config.num
    out = {q: num(0) for q in sorted(terminals)}
    if m.initial in terminals:
        out[m.initial] = num(1)
        return out
    visits = occupation(m, sched, config)
    for s, v in visits.items():
        for a, pa in sched[s].items():
            for t, p in m.trans[s, a]:
                if t in terminals:
                    out[t] += v * num(pa) * num(p)
    return out


def wr_moments(m, sched, config=DEFAULT, payoff=None):
    """Expectation and second moment of the weighted-reachability payoff.

    ``payoff`` optionally overrides the per-terminal contributions as a pair
    of maps ``(a, b)`` with e1 = sum y_q a_q and e2 = sum y_q b_q.
    """
    num = config.num
    if payoff is None:
        a = {q: num(w) for q, w in m.terminal_weight.items()}
        b = {q: x * x for q, x in a.items()}
    else:
        a, b = payoff.a, payoff.b
    y = reach_probs(m, sched, config)
    e1 = sum((y[q] * num(a.get(q, 0)) for q in y), num(0))
    e2 = sum((y[q] * num(b.get(q, 0)) for q in y), num(0))
    return Moments(e1, e2)


def acc_moments(m, sched, config=DEFAULT):
    """Expectation and second moment of the total accumulated reward.

    With ``r = rew(s, a)`` and successor values ``e1(t)``, ``e2(t)``:
    ``e1(s) = sum_a sigma(a) (r + sum_t P e1(t))`` and
    ``e2(s) = sum_a sigma(a) (r^2 + 2 r sum_t P e1(t) + sum_t P e2(t))``.
    """
    per_state = acc_moments_all(m, sched, config)
    return per_state[m.initial]


def acc_moments_all(m, sched, config=DEFAULT, everywhere=False):
    """Per-state :class:`Moments` of the accumulated reward (0 on terminals).

    Only states reachable under ``sched`` are solved unless ``everywhere``.
    """
    num = config.num
    terminals = m.terminals
    zero = Moments(num(0), num(0))
    inner, idx, rows = _system(m, sched, config, terminals, everywhere)
    out = {s: zero for s in range(m.n)}
    if not inner:
        return out
    r1 = []
    for s in inner:
        r1.append([sum((num(p) * num(m.rew(s, a)) for a, p in sched[s].items()), num(0))])
    x1 = numeric.solve(rows, r1, exact=config.exact)
    e1 = {s: x1[i][0] for i, s in enumerate(inner)}
    r2 = []
    for s in inner:
        acc = num(0)
        for a, pa in sched[s].items():
            r = num(m.rew(s, a))
            if r:
                nxt = sum((num(p) * e1.get(t, 0) for t, p in m.trans[s, a]), num(0))
                acc += num(pa) * (r * r + 2 * r * nxt)
        r2.append([acc])
    x2 = numeric.solve(rows, r2, exact=config.exact)
    for i, s in enumerate(inner):
        out[s] = Moments(e1[s], x2[i][0])
    return out


def total_reward(m, sched, rew, config=DEFAULT, everywhere=True):
    """Per-state expected total of ``rew[(s, a)]`` until a terminal (0 there)."""
    num = config.num
    inner, idx, rows = _system(m, sched, config, m.terminals, everywhere)
    out = {s: num(0) for s in range(m.n)}
    if not inner:
        return out
    rhs = [[sum((num(p) * num(rew.get((s, a), 0)) for a, p in sched[s].items()), num(0))]
           for s in inner]
    x = numeric.solve(rows, rhs, exact=config.exact)
    for i, s in enumerate(inner):
        out[s] = x[i][0]
    return out


def variance(mom):
    return mom.e2 - mom.e1 * mom.e1


def mix_variance(m1, m2, p):
    """Variance of the payoff under the p-mixture of two schedulers."""
    if isinstance(p, MixWeight):
        p = p.p
    d = m1.e1 - m2.e1
    return p * variance(m1) + (1 - p) * variance(m2) + p * (1 - p) * d * d


def pair_variance(m1, m2):
    """Half the expected squared difference of two independent runs."""
    d = m1.e1 - m2.e1
    return (variance(m1) + variance(m2) + d * d) / 2
