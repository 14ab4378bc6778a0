"""Core MDP representation, memoryless schedulers, and synchronous products.

States and actions are interned to dense integer indices. An action index
refers to the global action table ``Mdp.actions``; ``enabled[s]`` lists the
indices available in state ``s``. Distributions are sparse tuples of
``(target, probability)`` with strictly positive probabilities.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as _cartesian
from typing import Dict, Optional, Tuple

from .errors import BudgetError, ModelError

WEIGHTED = "weighted"
REWARD = "reward"


@dataclass(frozen=True, eq=False)
class Mdp:
    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    initial: int
    enabled: Tuple[Tuple[int, ...], ...]
    trans: Dict[Tuple[int, int], Tuple[Tuple[int, object], ...]]
    terminal_weight: Optional[Dict[int, object]] = None
    reward: Optional[Dict[Tuple[int, int], int]] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self):
        return len(self.states)

    @property
    def mode(self):
        if self.terminal_weight is not None:
            return WEIGHTED
        if self.reward is not None:
            return REWARD
        return None

    def rew(self, s, a):
        if self.reward is None:
            return 0
        return self.reward.get((s, a), 0)

    def is_absorbing(self, s):
        return all(self.trans[s, a] == ((s, 1),) or _is_self_loop(self.trans[s, a], s)
                   for a in self.enabled[s])

    @property
    def terminals(self):
        """Absorbing target states: weighted states, or zero-reward sinks."""
        if "terminals" not in self._cache:
            if self.terminal_weight is not None:
                t = frozenset(self.terminal_weight)
            else:
                t = frozenset(
                    s for s in range(self.n)
                    if self.is_absorbing(s) and all(self.rew(s, a) == 0 for a in self.enabled[s])
                )
            self._cache["terminals"] = t
        return self._cache["terminals"]

    def state_index(self, name):
        if "sidx" not in self._cache:
            self._cache["sidx"] = {x: i for i, x in enumerate(self.states)}
        return self._cache["sidx"][name]

    def action_index(self, name):
        if "aidx" not in self._cache:
            self._cache["aidx"] = {x: i for i, x in enumerate(self.actions)}
        return self._cache["aidx"][name]

    def successors(self, s):
        out = set()
        for a in self.enabled[s]:
            out.update(t for t, _ in self.trans[s, a])
        return out

    def reachable(self, start=None):
        start = self.initial if start is None else start
        seen = {start}
        stack = [start]
        while stack:
            s = stack.pop()
            for t in self.successors(s):
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return seen

    def pair_count(self):
        return sum(len(e) for e in self.enabled)

    def structurally_equal(self, other):
        if (self.states, self.initial, self.mode) != (other.states, other.initial, other.mode):
            return False
        for s in range(self.n):
            mine = {self.actions[a] for a in self.enabled[s]}
            theirs = {other.actions[a] for a in other.enabled[s]}
            if mine != theirs:
                return False
            for a in self.enabled[s]:
                b = other.action_index(self.actions[a])
                if dict(self.trans[s, a]) != dict(other.trans[s, b]):
                    return False
                if self.rew(s, a) != other.rew(s, b):
                    return False
        if self.terminal_weight != other.terminal_weight:
            return False
        return True


def _is_self_loop(dist, s):
    return len(dist) == 1 and dist[0][0] == s and dist[0][1] == 1


def validate(m, tol_prob=1e-9):
    """Return a list of invariant violations; an empty list means valid."""
    out = []
    if not 0 <= m.initial < m.n:
        out.append(f"initial state index {m.initial} out of range")
    if len(m.enabled) != m.n:
        out.append("enabled table does not cover every state")
        return out
    for s in range(m.n):
        name = m.states[s]
        if not m.enabled[s]:
            out.append(f"state {name}: no enabled action")
        for a in m.enabled[s]:
            where = f"state {name}, action {m.actions[a]}"
            dist = m.trans.get((s, a))
            if dist is None:
                out.append(f"{where}: missing distribution")
                continue
            total = 0
            for t, p in dist:
                if not 0 <= t < m.n:
                    out.append(f"{where}: target {t} out of range")
                if not p > 0:
                    out.append(f"{where}: nonpositive probability {p}")
                total += p
            exact = all(isinstance(p, (int, Fraction)) for _, p in dist)
            if (total != 1) if exact else abs(total - 1) > tol_prob:
                out.append(f"{where}: probability sum {total} != 1")
    if m.terminal_weight is not None and m.reward is not None:
        out.append("model carries both terminal weights and rewards")
    if m.terminal_weight is not None:
        for s in sorted(m.terminal_weight):
            if not 0 <= s < m.n:
                out.append(f"weighted state index {s} out of range")
            elif not m.is_absorbing(s):
                out.append(f"state {m.states[s]}: weighted state not absorbing")
    if m.reward is not None:
        for (s, a), r in sorted(m.reward.items()):
            if not (isinstance(r, int) and r >= 0):
                out.append(f"state {m.states[s]}, action {m.actions[a]}: reward {r} is not a nonnegative integer")
    return out


def check_valid(m, tol_prob=1e-9):
    problems = validate(m, tol_prob)
    if problems:
        raise ModelError("; ".join(problems))
    return m


@dataclass(frozen=True)
class MemorylessScheduler:
    """Per-state distributions over enabled actions (``action index -> prob``)."""

    choice: Tuple[Dict[int, object], ...]

    def __getitem__(self, s):
        return self.choice[s]

    def __len__(self):
        return len(self.choice)

    @property
    def is_deterministic(self):
        return all(len(d) == 1 for d in self.choice)

    def action(self, s):
        (a,) = self.choice[s]
        return a

    def key(self):
        """Tuple of chosen actions; only meaningful for deterministic schedulers."""
        return tuple(min(d) if len(d) == 1 else None for d in self.choice)

    @classmethod
    def deterministic(cls, actions):
        return cls(tuple({a: 1} for a in actions))

    @classmethod
    def first_action(cls, m):
        return cls.deterministic([m.enabled[s][0] for s in range(m.n)])

    @classmethod
    def uniform(cls, m):
        return cls(tuple({a: Fraction(1, len(m.enabled[s])) for a in m.enabled[s]}
                         for s in range(m.n)))

    def labelled(self, m):
        return {m.states[s]: {m.actions[a]: p for a, p in sorted(d.items())}
                for s, d in enumerate(self.choice)}

    def validate(self, m, tol=1e-9):
        out = []
        for s, d in enumerate(self.choice):
            if not set(d) <= set(m.enabled[s]):
                out.append(f"state {m.states[s]}: support outside enabled actions")
            total = sum(d.values())
            if abs(total - 1) > tol:
                out.append(f"state {m.states[s]}: probabilities sum to {total}")
        return out


@dataclass(frozen=True)
class MixWeight:
    p: object

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"mix weight {self.p} outside [0, 1]")


def product(a, b, max_states=1_000_000, weight=None, reward=None):
    """Synchronous product ``a (x) b`` over state pairs and action pairs.

    Weighted pairs of terminals get ``weight(wa, wb)`` (default ``wa - wb``,
    so the product's payoff is the difference of the two copies). Reward
    products combine rewards with ``reward(ra, rb)`` (default sum).
    """
    n = a.n * b.n
    if n > max_states:
        raise BudgetError(f"product has {n} states, cap is {max_states}", required=n)

    def pid(s, t):
        return s * b.n + t

    states = tuple(f"{x}__{y}" for x in a.states for y in b.states)
    actions = tuple(f"{x}__{y}" for x in a.actions for y in b.actions)

    def aid(x, y):
        return x * len(b.actions) + y

    enabled = []
    trans = {}
    rew = {} if (a.reward is not None and b.reward is not None) else None
    combine_r = reward or (lambda u, v: u + v)
    for s in range(a.n):
        for t in range(b.n):
            acts = []
            for x in a.enabled[s]:
                for y in b.enabled[t]:
                    k = aid(x, y)
                    acts.append(k)
                    trans[pid(s, t), k] = tuple(
                        (pid(u, v), p * q) for u, p in a.trans[s, x] for v, q in b.trans[t, y]
                    )
                    if rew is not None:
                        r = combine_r(a.rew(s, x), b.rew(t, y))
                        if r:
                            rew[pid(s, t), k] = r
            enabled.append(tuple(acts))
    tw = None
    if a.terminal_weight is not None and b.terminal_weight is not None:
        combine_w = weight or (lambda u, v: u - v)
        tw = {pid(s, t): combine_w(ws, wt)
              for s, ws in a.terminal_weight.items() for t, wt in b.terminal_weight.items()}
    return Mdp(states, actions, pid(a.initial, b.initial), tuple(enabled), trans, tw, rew)


def product_scheduler(sa, sb, b_actions=None):
    """Product of two memoryless schedulers, indexed like :func:`product`.

    ``b_actions`` is the size of the second model's action table.
    """
    nb_act = b_actions if b_actions is not None else 1 + max(
        (a for d in sb.choice for a in d), default=0)
    choice = []
    for ds in sa.choice:
        for dt in sb.choice:
            choice.append({x * nb_act + y: p * q for x, p in ds.items() for y, q in dt.items()})
    return MemorylessScheduler(tuple(choice))


def md_count(m):
    count = 1
    for e in m.enabled:
        count *= len(e)
    return count


def iter_md_keys(m):
    return _cartesian(*m.enabled)
