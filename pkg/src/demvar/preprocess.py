"""End components: maximal decomposition, collapsing, finiteness check."""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Tuple

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from .model import Mdp

TAU = "tau"
SINK = "tstar"


@dataclass(frozen=True)
class EndComponent:
    states: FrozenSet[int]
    actions: Dict[int, Tuple[int, ...]]


@dataclass(frozen=True)
class CollapseMap:
    state_map: Tuple[int, ...]   # original index -> collapsed index
    sink: int                    # index of t* in the collapsed model
    components: Tuple[EndComponent, ...]


def _sccs(n, edges):
    if not edges:
        return np.arange(n)
    src, dst = zip(*edges)
    g = scipy.sparse.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    _, labels = connected_components(g, directed=True, connection="strong")
    return labels


def mec_decompose(m):
    """Maximal end components by iterated SCC refinement."""
    allowed = {s: set(m.enabled[s]) for s in range(m.n)}
    alive = set(range(m.n))
    while True:
        edges = [(s, t) for s in alive for a in allowed[s] for t, _ in m.trans[s, a]]
        labels = _sccs(m.n, edges)
        changed = False
        for s in list(alive):
            for a in list(allowed[s]):
                if any(t not in alive or labels[t] != labels[s] for t, _ in m.trans[s, a]):
                    allowed[s].discard(a)
                    changed = True
            if not allowed[s]:
                alive.discard(s)
                changed = True
        if not changed:
            break
    groups = {}
    for s in sorted(alive):
        groups.setdefault(labels[s], []).append(s)
    out = []
    for members in sorted(groups.values()):
        out.append(EndComponent(
            frozenset(members),
            {s: tuple(a for a in m.enabled[s] if a in allowed[s]) for s in members},
        ))
    return out


def check_finite(m):
    """True iff every reachable end component only uses zero-reward actions."""
    reach = m.reachable()
    for ec in mec_decompose(m):
        if ec.states & reach:
            if any(m.rew(s, a) for s, acts in ec.actions.items() for a in acts):
                return False
    return True


def _fresh(name, taken):
    while name in taken:
        name += "_"
    return name


def collapse(m):
    """Collapse every non-terminal maximal end component into one state.

    The collapsed state offers each action leaving the component (renamed
    ``<state>__<action>``) plus ``tau`` into a fresh zero-payoff sink.
    Returns the new model and a :class:`CollapseMap`.
    """
    terminals = m.terminals
    comps = [ec for ec in mec_decompose(m) if not ec.states <= terminals]
    owner = {}
    for k, ec in enumerate(comps):
        for s in ec.states:
            owner[s] = k

    taken = set(m.states)
    names = []
    state_map = [None] * m.n
    comp_index = {}
    for s in range(m.n):
        if s in owner:
            k = owner[s]
            if k not in comp_index:
                first = min(comps[k].states)
                comp_index[k] = len(names)
                names.append(_fresh(f"ec_{m.states[first]}", taken))
                taken.add(names[-1])
            state_map[s] = comp_index[k]
        else:
            state_map[s] = len(names)
            names.append(m.states[s])
    sink = len(names)
    names.append(_fresh(SINK, taken))

    actions = []
    aidx = {}

    def act(name):
        if name not in aidx:
            aidx[name] = len(actions)
            actions.append(name)
        return aidx[name]

    def mapped(dist):
        acc = {}
        for t, p in dist:
            acc[state_map[t]] = acc.get(state_map[t], 0) + p
        return tuple(sorted(acc.items()))

    exact = all(isinstance(p, (int, Fraction)) for d in m.trans.values() for _, p in d)
    one = Fraction(1) if exact else 1.0
    enabled = [[] for _ in names]
    trans = {}
    reward = {} if m.reward is not None else None
    for s in range(m.n):
        ns = state_map[s]
        if s in owner:
            inside = set(comps[owner[s]].actions[s])
            for a in m.enabled[s]:
                if a in inside:
                    continue
                na = act(f"{m.states[s]}__{m.actions[a]}")
                enabled[ns].append(na)
                trans[ns, na] = mapped(m.trans[s, a])
                if reward is not None and m.rew(s, a):
                    reward[ns, na] = m.rew(s, a)
        else:
            for a in m.enabled[s]:
                na = act(m.actions[a])
                enabled[ns].append(na)
                trans[ns, na] = mapped(m.trans[s, a])
                if reward is not None and m.rew(s, a):
                    reward[ns, na] = m.rew(s, a)
    tau = act(TAU)
    for k in sorted(comp_index):
        ns = comp_index[k]
        enabled[ns].append(tau)
        trans[ns, tau] = ((sink, one),)
    loop = act("loop")
    enabled[sink].append(loop)
    trans[sink, loop] = ((sink, one),)

    weights = None
    if m.terminal_weight is not None:
        weights = {state_map[q]: w for q, w in m.terminal_weight.items()}
        weights[sink] = Fraction(0) if exact else 0.0
    out = Mdp(
        states=tuple(names),
        actions=tuple(actions),
        initial=state_map[m.initial],
        enabled=tuple(tuple(sorted(e)) for e in enabled),
        trans=trans,
        terminal_weight=weights,
        reward=reward,
    )
    return out, CollapseMap(tuple(state_map), sink, tuple(comps))
