"""Maximal variance, demonic variance and NDS for weighted reachability.

Both analyses work on the flow polytope of a preprocessed model. A payoff is
described by two maps over terminals, ``a`` and ``b``, so that the first two
moments are linear in the reachability vector: ``e1 = sum y_q a_q`` and
``e2 = sum y_q b_q``. Plain weighted reachability has ``a = w`` and ``b = w^2``;
the accumulated-reward pipeline supplies other ``(a, b)``.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple

import numpy as np

from . import oracle
from .chain import Moments, wr_moments
from .config import DEFAULT
from .errors import AssumptionError, InvariantViolation, ZeroVarianceError
from .lp import build_flow, extract_scheduler
from .model import MemorylessScheduler, md_count

SANDWICH_TOL = 1e-7


class Payoff(NamedTuple):
    a: Dict[int, object]
    b: Dict[int, object]

    @classmethod
    def from_weights(cls, m, config=DEFAULT):
        a = {q: config.num(w) for q, w in m.terminal_weight.items()}
        return cls(a, {q: v * v for q, v in a.items()})

    def convert(self, config):
        return Payoff({q: config.num(v) for q, v in self.a.items()},
                      {q: config.num(v) for q, v in self.b.items()})


class Result(NamedTuple):
    value: object
    witness: object
    info: dict


class _Point(NamedTuple):
    e1: object
    e2: object
    x: list


def _moments(fp, x, payoff, zero):
    e1, e2 = zero, zero
    for q in fp.yvars:
        y = x[fp.y_index[q]]
        if y:
            e1 += y * payoff.a.get(q, 0)
            e2 += y * payoff.b.get(q, 0)
    return e1, e2


class _Oracle:
    """LP calls against one flow polytope in one arithmetic."""

    def __init__(self, fp, payoff, config):
        self.fp = fp
        self.cfg = config
        self.payoff = payoff.convert(config)
        self.zero = config.num(0)
        self.a_row = fp.y_row(self.payoff.a)
        self.calls = 0

    def _point(self, weights, extra=()):
        self.calls += 1
        res = self.fp.solve(weights, self.cfg, extra)
        if res.status != "optimal":
            return None
        e1, e2 = _moments(self.fp, res.x, self.payoff, self.zero)
        return _Point(e1, e2, res.x)

    def extreme_e1(self, sign):
        return self._point({q: sign * v for q, v in self.payoff.a.items()})

    def top(self, c):
        """Highest second moment with the expectation pinned to ``c``."""
        p = self._point(self.payoff.b, [(self.a_row, c)])
        if p is not None:
            p = _Point(c, p.e2, p.x)
        return p

    def support(self, lam):
        """Vertex maximizing ``e2 - lam * e1``."""
        return self._point({q: self.payoff.b.get(q, 0) - lam * self.payoff.a.get(q, 0)
                            for q in self.fp.yvars})


def max_variance(m, config=DEFAULT, payoff=None):
    """Maximal variance over all schedulers, with a memoryless witness.

    The achievable (e1, e2) pairs form a polygon; the variance is maximized
    on its upper boundary, where ``e2 - e1^2`` is concave in e1. Starting
    from the two ends, each LP with objective ``e2 - lam e1`` (``lam`` the
    slope of the current chord) either certifies the chord as a boundary
    edge or yields a boundary vertex W. Since ``lam`` is a supergradient of
    the boundary at W, the sign of ``lam - 2 W.e1`` tells on which side of W
    the optimum lies. On the final edge the witness interpolates the
    occupation measures of its endpoints.
    """
    payoff = payoff or Payoff.from_weights(m, config)
    fp = build_flow(m)
    tol = config.tol
    orc = _Oracle(fp, payoff, config)
    hi_pt = orc.extreme_e1(1)
    lo_pt = orc.extreme_e1(-1)
    emin, emax = lo_pt.e1, hi_pt.e1
    info = {"e1_min": emin, "e1_max": emax}

    if emax - emin <= tol:
        p = orc.top(emax) or hi_pt
        sched = extract_scheduler(fp, p.x, tol)
        info.update(e1=p.e1, e2=p.e2, walk_steps=0, lp_solves=orc.calls)
        return Result(p.e2 - p.e1 * p.e1, sched, info)

    L = orc.top(emin) or lo_pt
    R = orc.top(emax) or hi_pt
    steps = 0
    while True:
        steps += 1
        lam = (R.e2 - L.e2) / (R.e1 - L.e1)
        W = orc.support(lam)
        gap = (W.e2 - lam * W.e1) - (L.e2 - lam * L.e1)
        scale = 1 + abs(L.e2) + abs(lam * L.e1)
        if gap <= tol * scale or not L.e1 < W.e1 < R.e1 or steps > 10_000:
            break
        slope = lam - 2 * W.e1
        if slope > 0:
            L = W
        elif slope < 0:
            R = W
        else:
            L = R = W
            break

    if L is R:
        c, val, x = L.e1, L.e2 - L.e1 * L.e1, L.x
    else:
        c = min(max(lam / 2, L.e1), R.e1)
        val = L.e2 + lam * (c - L.e1) - c * c
        p = (c - L.e1) / (R.e1 - L.e1)
        x = [(1 - p) * u + p * v for u, v in zip(L.x, R.x)]
    sched = extract_scheduler(fp, x, tol)
    info.update(e1=c, e2=val + c * c, walk_steps=steps, lp_solves=orc.calls)
    return Result(val, sched, info)


def _pair_value(m1, m2):
    return (m1[1] - 2 * m1[0] * m2[0] + m2[1]) / 2


def _normalized(k1, k2):
    return min((k1, k2), (k2, k1))


def demonic_variance(m, config=DEFAULT, payoff=None):
    """Demonic variance with a pair of memoryless deterministic witnesses.

    Alternating best response: with the other copy's moments ``(e1', e2')``
    fixed, the objective ``(e2 - 2 e1 e1' + e2') / 2`` is linear in ``y``, so
    each step is one LP. Every start (each initial action, plus seeded random
    deterministic schedulers) ascends to a local optimum; the best is kept.
    Small models are cross-checked against exhaustive enumeration.
    """
    payoff = (payoff or Payoff.from_weights(m, config)).convert(config)
    fp = build_flow(m)
    tol = config.tol
    zero = config.num(0)
    stop = 0 if config.exact else 1e-10

    def respond(other):
        w = {q: (payoff.b.get(q, 0) - 2 * payoff.a.get(q, 0) * other[0] + other[1]) / 2
             for q in fp.yvars}
        res = fp.solve(w, config)
        sched = extract_scheduler(fp, res.x, tol)
        return sched, _moments(fp, res.x, payoff, zero)

    starts = []
    first = [m.enabled[s][0] for s in range(m.n)]
    for a in m.enabled[m.initial]:
        keys = list(first)
        keys[m.initial] = a
        starts.append(keys)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.ascent_restarts):
        starts.append([e[int(rng.integers(len(e)))] for e in m.enabled])

    best = None
    total_steps = 0
    for keys in starts:
        s2 = MemorylessScheduler.deterministic(keys)
        m2 = tuple(wr_moments(m, s2, config, payoff))
        s1, m1 = respond(m2)
        val = _pair_value(m1, m2)
        for _ in range(1000):
            total_steps += 1
            s2, m2 = respond(m1)
            s1, m1 = respond(m2)
            v = _pair_value(m1, m2)
            if v - val <= stop:
                break
            val = v
        val = _pair_value(m1, m2)
        key = _normalized(s1.key(), s2.key())
        if best is None or val > best[0] + tol or (val >= best[0] - tol and key < best[1]):
            best = (val, key, s1, s2, m1, m2)
    value, _, s1, s2, m1, m2 = best
    info = {"ascent_restarts": len(starts), "ascent_steps": total_steps,
            "ascent_value": value}

    count = md_count(m)
    if config.auto_oracle and (config.exact_oracle or count <= config.md_cap):
        cap = None if config.exact_oracle else config.md_cap
        ov, (k1, k2) = oracle.exact_demvar(m, config, payoff, cap=cap)
        gap = ov - value
        info["oracle_value"] = ov
        info["oracle_gap"] = gap
        if gap > tol:
            info["oracle_replaced"] = True
            value = ov
            s1 = MemorylessScheduler.deterministic(k1)
            s2 = MemorylessScheduler.deterministic(k2)
    pair = tuple(sorted([s1, s2], key=lambda s: s.key()))
    return Result(value, pair, info)


def nds(maxvar, demvar, tol=1e-9):
    """Non-determinism score ``(demvar - maxvar) / maxvar``, clamped near [0, 1]."""
    if not maxvar > tol:
        raise ZeroVarianceError(
            "zero maximal variance: NDS undefined "
            "(assumption violated: maximal variance must be positive)")
    raw = (demvar - maxvar) / maxvar
    if raw < 0 and raw >= -tol:
        return raw * 0
    if raw > 1 and raw <= 1 + tol:
        return raw * 0 + 1
    return raw


def chebyshev_bound(k, maxvar_based=False):
    """Bound on Pr(|X1 - X2| >= k sqrt(V)) for two independent runs.

    With V the demonic variance the bound is ``min(1, 2/k^2)``; with V the
    maximal variance it weakens to ``min(1, 4/k^2)``.
    """
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    return min(1.0, (4.0 if maxvar_based else 2.0) / (k * k))


def chebyshev_table(demvar, maxvar, ks):
    out = []
    for k in ks:
        out.append({
            "k": k,
            "bound": chebyshev_bound(k),
            "bound_maxvar": chebyshev_bound(k, maxvar_based=True),
            "threshold": k * math.sqrt(float(demvar)),
            "threshold_maxvar": k * math.sqrt(float(maxvar)),
        })
    return out


def check_sandwich(maxvar, demvar):
    if not (float(maxvar) <= float(demvar) + SANDWICH_TOL
            and float(demvar) <= 2 * float(maxvar) + SANDWICH_TOL):
        raise InvariantViolation(
            f"expected maxvar <= demvar <= 2 maxvar, got maxvar={maxvar}, demvar={demvar}")


@dataclass
class VarianceReport:
    mode: str
    maxvar: object
    demvar: object
    nds: object
    scheduler_max: dict
    scheduler_pair: list
    chebyshev: list
    diagnostics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        d = {
            "mode": self.mode,
            "maxvar": self.maxvar,
            "demvar": self.demvar,
            "nds": self.nds,
            "scheduler_max": self.scheduler_max,
            "scheduler_pair": self.scheduler_pair,
            "chebyshev": self.chebyshev,
            "diagnostics": self.diagnostics,
        }
        d.update(self.extra)
        return d


def _exact_strings(d, config, keys):
    if config.exact:
        for k in keys:
            if k in d and d[k] is not None:
                d.setdefault("exact", {})[k] = str(d[k])


def analyze(m, config=DEFAULT, need_nds=True):
    """Full report for a parsed model (weighted or reward mode)."""
    if m.mode == "reward":
        from .accrew import analyze_rewards
        return analyze_rewards(m, config, need_nds=need_nds)
    if m.mode != "weighted":
        raise AssumptionError("model has neither terminal weights nor rewards")
    from .preprocess import collapse
    pm, _ = collapse(m)
    mx = max_variance(pm, config)
    dm = demonic_variance(pm, config)
    return build_report("weighted", pm, mx, dm, config, need_nds)


def build_report(mode, pm, mx, dm, config, need_nds, labeller=None, extra=None):
    check_sandwich(mx.value, dm.value)
    diag = {
        "tolerance": config.tol,
        "arithmetic": "rational" if config.exact else "double",
        "maxvar": {k: v for k, v in mx.info.items()},
        "demvar": {k: v for k, v in dm.info.items()},
    }
    if "oracle_gap" in dm.info:
        diag["oracle_gap"] = dm.info["oracle_gap"]
    nd = None
    if mx.value > config.tol:
        nd = nds(mx.value, dm.value, config.tol)
        diag["nds_raw"] = (dm.value - mx.value) / mx.value
    elif need_nds:
        nds(mx.value, dm.value, config.tol)
    label = labeller or (lambda s: s.labelled(pm))
    values = {"maxvar": mx.value, "demvar": dm.value, "nds": nd}
    _exact_strings(values, config, ["maxvar", "demvar", "nds"])
    if "exact" in values:
        diag["exact"] = values["exact"]
    return VarianceReport(
        mode=mode,
        maxvar=mx.value,
        demvar=dm.value,
        nds=nd,
        scheduler_max=label(mx.witness),
        scheduler_pair=[label(s) for s in dm.witness],
        chebyshev=chebyshev_table(dm.value, mx.value, config.ks),
        diagnostics=diag,
        extra=extra or {},
    )
