"""Variance analyses for accumulated rewards.

The total reward is reduced to weighted reachability on a finite unfolding
that tracks the reward collected so far. Once the counter exceeds a bound B
it is safe to stop tracking: from then on an optimal scheduler only uses
expectation-maximizing actions, and among those it follows a fixed
memoryless scheduler U that maximizes the second moment. The unfolding's
overflow terminals therefore carry the first two moments of "counter value
plus what U collects afterwards" as their payoff.
"""

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

from . import wreach
from .chain import acc_moments, acc_moments_all, total_reward
from .config import DEFAULT
from .errors import AssumptionError, BudgetError, InfiniteExpectationError, InvariantViolation
from .model import Mdp, MemorylessScheduler
from .preprocess import check_finite, collapse

VI_SWEEPS = 10_000
VI_RESIDUAL = 1e-12


@dataclass(frozen=True)
class RewardAnalysisContext:
    M: object
    delta: Optional[object]
    Q: Fraction
    B: Fraction
    Bprime: Fraction
    act_max: Tuple[Tuple[int, ...], ...]
    u_sched: MemorylessScheduler
    e_max: Tuple[object, ...]
    e2_u: Tuple[object, ...]
    n_states: int
    max_reward: int
    p_min: Fraction

    @property
    def trivial(self):
        """No reachable action loses expectation, so every scheduler is optimal in mean."""
        return self.delta is None


@dataclass(frozen=True)
class RewardSchedule:
    """Scheduler depending on the state and the reward collected so far.

    ``entries`` maps ``(state, counter)`` to an action distribution for
    counters up to ``bound``; everything else follows ``fallback``.
    """

    entries: Dict[Tuple[int, int], Dict[int, object]]
    bound: int
    fallback: MemorylessScheduler

    def choice(self, s, w):
        if w <= self.bound:
            d = self.entries.get((s, w))
            if d is not None:
                return d
        return self.fallback[s]

    def levels(self, m):
        """Per-counter tables ``[level][state] -> dist`` plus the cap level index."""
        top = max((w for _, w in self.entries), default=-1) + 1
        out = []
        for w in range(top):
            out.append(tuple(self.choice(s, w) for s in range(m.n)))
        out.append(tuple(self.fallback.choice))
        return out, top

    @property
    def is_reward_dependent(self):
        seen = {}
        for (s, w), d in self.entries.items():
            if s in seen and seen[s] != d:
                return True
            seen.setdefault(s, d)
        return False

    @property
    def is_deterministic(self):
        return all(len(d) == 1 for d in self.entries.values()) and self.fallback.is_deterministic

    def labelled(self, m):
        out = {}
        for (s, w), d in sorted(self.entries.items()):
            out.setdefault(m.states[s], {})[str(w)] = {m.actions[a]: p for a, p in sorted(d.items())}
        out["*"] = {m.states[s]: {m.actions[a]: p for a, p in d.items()}
                    for s, d in enumerate(self.fallback.choice)}
        return out


@dataclass(frozen=True)
class UnfoldedMdp:
    mdp: Mdp
    payoff: "wreach.Payoff"
    back: Tuple[Tuple[int, int], ...]       # unfolded index -> (state, counter)
    index: Dict[Tuple[int, int], int]
    bound: int
    t1: frozenset                            # original terminals within the bound
    t2: frozenset                            # counter exceeded the bound
    base: Mdp

    def schedule(self, sched, fallback):
        """Map a memoryless scheduler of the unfolding back to a RewardSchedule."""
        entries = {}
        for i, (s, w) in enumerate(self.back):
            if i in self.t1 or i in self.t2:
                continue
            entries[s, w] = dict(sched[i])
        return RewardSchedule(entries, self.bound, fallback)

    def scheduler_for(self, rs):
        """Memoryless scheduler of the unfolding that realizes ``rs``."""
        m = self.mdp
        choice = []
        for i, (s, w) in enumerate(self.back):
            if i in self.t1 or i in self.t2:
                choice.append({m.enabled[i][0]: 1})
            else:
                choice.append(dict(rs.choice(s, w)))
        return MemorylessScheduler(tuple(choice))


def _q_values(m, s, v, rew):
    return {a: rew.get((s, a), 0) + sum(p * v[t] for t, p in m.trans[s, a]) for a in m.enabled[s]}


def _optimize(m, allowed, rew, config):
    """Maximize the expected total of ``rew`` using only ``allowed`` actions.

    Float value iteration gives a starting policy; policy iteration in the
    configured arithmetic then settles the exact optimum. Ties go to the
    lowest action index.
    """
    terminals = m.terminals
    num = config.num
    rewf = {k: float(v) for k, v in rew.items()}
    probs = {k: tuple((t, float(p)) for t, p in d) for k, d in m.trans.items()}
    v = [0.0] * m.n
    for _ in range(VI_SWEEPS):
        res = 0.0
        for s in range(m.n):
            if s in terminals:
                continue
            best = max(rewf.get((s, a), 0.0) + sum(p * v[t] for t, p in probs[s, a]) for a in allowed[s])
            res = max(res, abs(best - v[s]))
            v[s] = best
        if res < VI_RESIDUAL:
            break
    policy = []
    for s in range(m.n):
        acts = allowed[s]
        q = {a: rewf.get((s, a), 0.0) + sum(p * v[t] for t, p in probs[s, a]) for a in acts}
        top = max(q.values())
        policy.append(min(a for a in acts if q[a] >= top - 1e-9 * (1 + abs(top))))
    rewn = {k: num(x) for k, x in rew.items()}
    strict = 0 if config.exact else 1e-12
    for _ in range(10 * m.n + 100):
        sched = MemorylessScheduler.deterministic(policy)
        val = total_reward(m, sched, rewn, config)
        changed = False
        for s in range(m.n):
            if s in terminals:
                continue
            q = _q_values(m, s, val, rewn)
            q = {a: q[a] for a in allowed[s]}
            top = max(q.values())
            cur = q[policy[s]]
            if top > cur + strict * (1 + abs(cur)):
                policy[s] = min(a for a in allowed[s] if q[a] == top)
                changed = True
        if not changed:
            return val, sched
    raise InvariantViolation("policy iteration did not converge")


def context(pm, config=DEFAULT):
    """Bounds and auxiliary scheduler for a collapsed, finite reward model."""
    num = config.num
    terminals = pm.terminals
    reach = pm.reachable()
    rew = {(s, a): pm.rew(s, a) for s in range(pm.n) for a in pm.enabled[s]}
    allowed = {s: pm.enabled[s] for s in range(pm.n)}
    e_max, _ = _optimize(pm, allowed, rew, config)
    tol = 0 if config.exact else 1e-9

    act_max = []
    gaps = []
    for s in range(pm.n):
        q = _q_values(pm, s, e_max, {k: num(v) for k, v in rew.items() if k[0] == s})
        keep = tuple(a for a in pm.enabled[s] if q[a] >= e_max[s] - tol * (1 + abs(e_max[s])))
        if not keep:
            raise InvariantViolation(f"state {pm.states[s]}: no maximizing action")
        act_max.append(keep)
        if s in reach and s not in terminals:
            gaps.extend(e_max[s] - q[a] for a in pm.enabled[s] if a not in keep)
    delta = min(gaps) if gaps else None

    n_states = len(reach)
    M = max(e_max[s] for s in reach)
    R = max([pm.rew(s, a) for s in reach for a in pm.enabled[s]] + [0])
    p_min = min(Fraction(p) for s in reach for a in pm.enabled[s] for _, p in pm.trans[s, a])
    Q = Fraction(2 * n_states * n_states * R * R) / p_min ** (2 * n_states)

    rew2 = {}
    for s in range(pm.n):
        for a in act_max[s]:
            r = num(pm.rew(s, a))
            if r:
                rew2[s, a] = r * r + 2 * r * sum(num(p) * e_max[t] for t, p in pm.trans[s, a])
    u_vals, u_sched = _optimize(pm, {s: act_max[s] for s in range(pm.n)}, rew2, config)
    moms = acc_moments_all(pm, u_sched, config, everywhere=True)
    e2_u = tuple(moms[s].e2 for s in range(pm.n))
    for s in range(pm.n):
        if abs(moms[s].e1 - e_max[s]) > tol * (1 + abs(e_max[s])) * 1e3:
            raise InvariantViolation(f"auxiliary scheduler is not expectation-optimal at {pm.states[s]}")

    if delta is None:
        B = Bp = Fraction(0)
    else:
        Mf, df = Fraction(M), Fraction(delta)
        B = (Q + Fraction(5, 2) * Mf * Mf) / df + 2 * Mf + 1
        Bp = Q / (2 * df) + 2 * Mf + 1
        if Bp > B:
            raise InvariantViolation("B' exceeds B")
    return RewardAnalysisContext(
        M=M, delta=delta, Q=Q, B=B, Bprime=Bp, act_max=tuple(act_max), u_sched=u_sched,
        e_max=tuple(e_max[s] for s in range(pm.n)), e2_u=e2_u,
        n_states=n_states, max_reward=R, p_min=p_min,
    )


def unfold(pm, ctx, bound, config=DEFAULT):
    """Product of the model with a reward counter saturating above ``bound``."""
    num = config.num
    terminals = pm.terminals
    cap = config.max_unfold_states
    estimate = ctx.n_states * (bound + ctx.max_reward + 1)
    index = {(pm.initial, 0): 0}
    back = [(pm.initial, 0)]
    queue = deque([0])
    edges = {}
    while queue:
        i = queue.popleft()
        s, w = back[i]
        if s in terminals or w > bound:
            continue
        for a in pm.enabled[s]:
            nw = w + pm.rew(s, a)
            dist = {}
            for t, p in pm.trans[s, a]:
                key = (t, nw)
                if key not in index:
                    if len(back) >= cap:
                        raise BudgetError(
                            f"unfolding needs more than {cap} states (up to about {estimate}); "
                            "pass a smaller bound override to analyze heuristically",
                            required=estimate)
                    index[key] = len(back)
                    back.append(key)
                    queue.append(index[key])
                dist[index[key]] = dist.get(index[key], 0) + p
            edges[i, a] = tuple(sorted(dist.items()))

    actions = list(pm.actions)
    if "loop" not in actions:
        actions.append("loop")
    loop = actions.index("loop")
    enabled = []
    trans = {}
    a_pay, b_pay = {}, {}
    t1, t2 = set(), set()
    one = Fraction(1) if all(isinstance(p, Fraction) for d in pm.trans.values() for _, p in d) else 1.0
    for i, (s, w) in enumerate(back):
        if s in terminals or w > bound:
            enabled.append((loop,))
            trans[i, loop] = ((i, one),)
            em, e2 = ctx.e_max[s], ctx.e2_u[s]
            wn = num(w)
            if w > bound:
                t2.add(i)
                a_pay[i] = wn + em
                b_pay[i] = wn * wn + 2 * wn * em + e2
            else:
                t1.add(i)
                a_pay[i] = wn
                b_pay[i] = wn * wn
        else:
            enabled.append(tuple(pm.enabled[s]))
            for a in pm.enabled[s]:
                trans[i, a] = edges[i, a]
    names = tuple(f"{pm.states[s]}__{w}" for s, w in back)
    mdp = Mdp(names, tuple(actions), 0, tuple(enabled), trans, dict(a_pay), None)
    return UnfoldedMdp(mdp, wreach.Payoff(a_pay, b_pay), tuple(back), index, bound,
                       frozenset(t1), frozenset(t2), pm)


def schedule_moments(pm, rs, config=DEFAULT):
    """Moments of the accumulated reward under a RewardSchedule, computed directly.

    The schedule is run on the model paired with a counter that saturates to
    a single "over" level above ``rs.bound`` (where ``rs`` follows its
    fallback), and the resulting chain is solved with the plain recursion.
    """
    over = rs.bound + 1
    index = {(pm.initial, 0): 0}
    back = [(pm.initial, 0)]
    queue = deque([0])
    trans, enabled, choice, reward = {}, [], [], {}
    terminals = pm.terminals
    while queue:
        i = queue.popleft()
        s, w = back[i]
        d = rs.choice(s, w) if w < over else rs.fallback[s]
        acts = tuple(sorted(d)) if s not in terminals else pm.enabled[s]
        enabled.append(acts)
        choice.append(dict(d) if s not in terminals else {acts[0]: 1})
        for a in acts:
            nw = min(w + pm.rew(s, a), over) if w < over else over
            out = {}
            for t, p in pm.trans[s, a]:
                key = (t, nw) if s not in terminals else (s, w)
                if key not in index:
                    index[key] = len(back)
                    back.append(key)
                    queue.append(index[key])
                out[index[key]] = out.get(index[key], 0) + p
            trans[i, a] = tuple(sorted(out.items()))
            if pm.rew(s, a):
                reward[i, a] = pm.rew(s, a)
    names = tuple(f"{pm.states[s]}__{w}" for s, w in back)
    chain = Mdp(names, pm.actions, 0, tuple(enabled), trans, None, reward)
    return acc_moments(chain, MemorylessScheduler(tuple(choice)), config)


# --- pipeline ------------------------------------------------------------------

@dataclass(frozen=True)
class Prepared:
    model: Mdp
    collapsed: Mdp
    ctx: RewardAnalysisContext


def prepare(m, config=DEFAULT):
    if m.mode != "reward":
        raise AssumptionError("accumulated-reward analysis needs a reward model")
    if not check_finite(m):
        raise InfiniteExpectationError(
            "maximal expected accumulated reward is infinite: a reachable end component "
            "collects positive reward")
    pm, _ = collapse(m)
    return Prepared(m, pm, context(pm, config))


def _bound(ctx, sound, config):
    sound_floor = math.floor(sound)
    if config.bound_override is None:
        return sound_floor, False
    return config.bound_override, config.bound_override < sound_floor


def _trivial_variance(prep, config):
    ctx, pm = prep.ctx, prep.collapsed
    e1 = ctx.e_max[pm.initial]
    return ctx.e2_u[pm.initial] - e1 * e1


def acc_max_variance(m, config=DEFAULT, prepared=None):
    """Maximal variance of the accumulated reward with a reward-based witness."""
    prep = prepared or prepare(m, config)
    ctx, pm = prep.ctx, prep.collapsed
    if ctx.trivial:
        rs = RewardSchedule({}, 0, ctx.u_sched)
        return wreach.Result(_trivial_variance(prep, config), rs,
                             {"bound": 0, "short_circuit": True, "heuristic_bound": False})
    bound, heuristic = _bound(ctx, ctx.B, config)
    u = unfold(pm, ctx, bound, config)
    res = wreach.max_variance(u.mdp, config, u.payoff)
    info = dict(res.info, bound=bound, unfolded_states=u.mdp.n, heuristic_bound=heuristic)
    return wreach.Result(res.value, u.schedule(res.witness, ctx.u_sched), info)


def acc_demonic_variance(m, config=DEFAULT, prepared=None):
    """Demonic variance of the accumulated reward with deterministic reward-based witnesses."""
    prep = prepared or prepare(m, config)
    ctx, pm = prep.ctx, prep.collapsed
    if ctx.trivial:
        rs = RewardSchedule({}, 0, ctx.u_sched)
        return wreach.Result(_trivial_variance(prep, config), (rs, rs),
                             {"bound": 0, "short_circuit": True, "heuristic_bound": False})
    bound, heuristic = _bound(ctx, ctx.Bprime, config)
    u = unfold(pm, ctx, bound, config)
    res = wreach.demonic_variance(u.mdp, config, u.payoff)
    info = dict(res.info, bound=bound, unfolded_states=u.mdp.n, heuristic_bound=heuristic)
    pair = tuple(u.schedule(s, ctx.u_sched) for s in res.witness)
    return wreach.Result(res.value, pair, info)


def analyze_rewards(m, config=DEFAULT, need_nds=True):
    prep = prepare(m, config)
    ctx = prep.ctx
    mx = acc_max_variance(m, config, prep)
    dm = acc_demonic_variance(m, config, prep)
    extra = {
        "B": ctx.B,
        "B_prime": ctx.Bprime,
        "Q": ctx.Q,
        "delta": ctx.delta,
        "heuristic_bound": bool(mx.info.get("heuristic_bound") or dm.info.get("heuristic_bound")),
    }
    report = wreach.build_report("reward", prep.collapsed, mx, dm, config, need_nds,
                                 labeller=lambda rs: rs.labelled(prep.collapsed), extra=extra)
    report.diagnostics["bounds"] = {
        "B": str(ctx.B), "B_prime": str(ctx.Bprime), "Q": str(ctx.Q),
        "delta": str(ctx.delta), "M": str(ctx.M),
    }
    return report
