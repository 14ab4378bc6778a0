"""Random model generators used by the property and acceptance suites.

Every generated model is free of end components apart from its absorbing
terminals: each action of non-terminal state ``i`` keeps some probability
on a state with a larger index, so no set of non-terminals is closed.
"""

import random
from fractions import Fraction

from .model import Mdp


def from_table(states, initial, trans, weights=None, rewards=None):
    """Build an :class:`Mdp` from names.

    ``trans`` maps ``(state, action)`` to ``{target: prob}``; absorbing
    states without transitions get a ``loop`` action.
    """
    sidx = {s: i for i, s in enumerate(states)}
    actions = []
    aidx = {}

    def act(a):
        if a not in aidx:
            aidx[a] = len(actions)
            actions.append(a)
        return aidx[a]

    enabled = [[] for _ in states]
    dist = {}
    rew = {} if weights is None else None
    for (s, a), d in trans.items():
        si, ai = sidx[s], act(a)
        enabled[si].append(ai)
        dist[si, ai] = tuple(sorted((sidx[t], p) for t, p in d.items()))
        if rew is not None and rewards and rewards.get((s, a)):
            rew[si, ai] = rewards[s, a]
    for si, e in enumerate(enabled):
        if not e:
            ai = act("loop")
            e.append(ai)
            dist[si, ai] = ((si, Fraction(1)),)
    tw = None if weights is None else {sidx[q]: Fraction(w) for q, w in weights.items()}
    return Mdp(tuple(states), tuple(actions), sidx[initial],
               tuple(tuple(sorted(e)) for e in enabled), dist, tw, rew)


def _split(rng, k, max_den):
    """Random distribution over ``k`` outcomes with a common denominator <= max_den."""
    den = rng.randint(k, max(k, max_den))
    cuts = sorted(rng.sample(range(1, den), k - 1)) if k > 1 else []
    parts = [b - a for a, b in zip([0] + cuts, cuts + [den])]
    return [Fraction(p, den) for p in parts]


def _forward_dist(rng, i, n_inner, n_total, max_support, max_den, backward=True):
    """Distribution from inner state ``i`` with at least one forward target."""
    forward = list(range(i + 1, n_total))
    anywhere = list(range(n_total)) if backward else forward
    k = rng.randint(1, min(max_support, max_den, len(anywhere)))
    first = rng.choice(forward)
    rest = [t for t in anywhere if t != first]
    targets = [first] + rng.sample(rest, min(k - 1, len(rest)))
    probs = _split(rng, len(targets), max_den)
    return dict(zip(targets, probs))


def random_wr_model(seed, max_inner=6, max_actions=3, max_terminals=5, max_den=8,
                    weight_range=(-4, 6), backward=True):
    """Random preprocessed weighted-reachability model."""
    rng = random.Random(seed)
    n_inner = rng.randint(1, max_inner)
    n_term = rng.randint(1, max_terminals)
    n = n_inner + n_term
    names = [f"s{i}" for i in range(n_inner)] + [f"q{j}" for j in range(n_term)]
    trans = {}
    for i in range(n_inner):
        for a in range(rng.randint(1, max_actions)):
            d = _forward_dist(rng, i, n_inner, n, 3, max_den, backward)
            trans[names[i], f"a{a}"] = {names[t]: p for t, p in d.items()}
    lo, hi = weight_range
    weights = {names[n_inner + j]: Fraction(rng.randint(lo, hi), rng.choice([1, 1, 1, 2]))
               for j in range(n_term)}
    return from_table(names, names[0], trans, weights=weights)


def random_transition_system(seed, max_inner=6, max_actions=3, max_terminals=5):
    """Random model whose transitions are all Dirac (probabilities 0/1)."""
    rng = random.Random(seed)
    n_inner = rng.randint(1, max_inner)
    n_term = rng.randint(2, max_terminals)
    n = n_inner + n_term
    names = [f"s{i}" for i in range(n_inner)] + [f"q{j}" for j in range(n_term)]
    trans = {}
    for i in range(n_inner):
        for a in range(rng.randint(1, max_actions)):
            trans[names[i], f"a{a}"] = {names[rng.randint(i + 1, n - 1)]: Fraction(1)}
    weights = {names[n_inner + j]: Fraction(rng.randint(-5, 5)) for j in range(n_term)}
    # make sure the initial state has a real choice between distinct payoffs
    trans[names[0], "lo"] = {names[n_inner]: Fraction(1)}
    trans[names[0], "hi"] = {names[n_inner + 1]: Fraction(1)}
    weights[names[n_inner]] = Fraction(-6)
    weights[names[n_inner + 1]] = Fraction(6)
    return from_table(names, names[0], trans, weights=weights)


def constant_mean_model(seed, max_inner=5, max_actions=3, max_den=8):
    """Random model where every scheduler has the same expected payoff."""
    rng = random.Random(seed)
    n_inner = rng.randint(1, max_inner)
    term_w = [Fraction(0), Fraction(8)] + [Fraction(rng.randint(0, 8)) for _ in range(rng.randint(0, 3))]
    n = n_inner + len(term_w)
    names = [f"s{i}" for i in range(n_inner)] + [f"q{j}" for j in range(len(term_w))]
    value = {n_inner + j: w for j, w in enumerate(term_w)}
    trans = {}
    for i in reversed(range(n_inner)):
        later = list(range(i + 1, n))
        k = rng.randint(1, min(3, len(later)))
        targets = rng.sample(later, k)
        if i == 0:
            # the default action already spreads over both extreme payoffs
            targets = [n_inner, n_inner + 1] + [t for t in targets if t not in (n_inner, n_inner + 1)][:1]
            k = len(targets)
        probs = _split(rng, k, max_den)
        value[i] = sum(p * value[t] for t, p in zip(targets, probs))
        trans[names[i], "a0"] = {names[t]: p for t, p in zip(targets, probs)}
        for a in range(1, rng.randint(1, max_actions)):
            below = [t for t in later if value[t] <= value[i]]
            above = [t for t in later if value[t] >= value[i]]
            t1, t2 = rng.choice(below), rng.choice(above)
            if value[t1] == value[t2]:
                d = {names[t1]: Fraction(1)}
            else:
                p = (value[t2] - value[i]) / (value[t2] - value[t1])
                d = {names[t1]: p, names[t2]: 1 - p} if t1 != t2 else {names[t1]: Fraction(1)}
                d = {k2: v for k2, v in d.items() if v > 0}
            trans[names[i], f"a{a}"] = d
    weights = {names[n_inner + j]: w for j, w in enumerate(term_w)}
    return from_table(names, names[0], trans, weights=weights)


def random_reward_model(seed, max_inner=4, max_actions=2, max_reward=3, max_den=4, backward=True):
    """Random reward model with finite expectations and one absorbing sink."""
    rng = random.Random(seed)
    n_inner = rng.randint(1, max_inner)
    n = n_inner + 1
    names = [f"s{i}" for i in range(n_inner)] + ["t"]
    trans = {}
    rewards = {}
    for i in range(n_inner):
        for a in range(rng.randint(1, max_actions)):
            d = _forward_dist(rng, i, n_inner, n, 2, max_den, backward)
            trans[names[i], f"a{a}"] = {names[t]: p for t, p in d.items()}
            rewards[names[i], f"a{a}"] = rng.randint(0, max_reward)
    return from_table(names, names[0], trans, rewards=rewards)
