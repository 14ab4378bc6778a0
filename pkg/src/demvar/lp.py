"""Primal simplex over equality constraints, and the occupation-measure polytope.

The flow polytope of a model has one variable ``x[s,a]`` per non-terminal
state-action pair (expected number of times ``a`` is taken in ``s``) and one
variable ``y[q]`` per terminal (probability of ending in ``q``)::

    x >= 0
    sum_a x[s,a] - sum_{t,b} x[t,b] P(t,b,s) = [s = init]    (s non-terminal)
    y[q]         - sum_{t,b} x[t,b] P(t,b,q) = [q = init]    (q terminal)
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from . import numeric
from .config import DEFAULT
from .errors import BudgetError, InvariantViolation, SingularSystemError
from .model import MemorylessScheduler

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_CAP = 10**6
# float programs with more variables go to the sparse HiGHS solver
DENSE_VARS = 300
# refuse dense tableaux beyond this many entries (object entries count 8x)
TABLEAU_CAP = 5 * 10**7


@dataclass
class LinearProgram:
    """maximize c.x subject to A x = b, x >= 0 (rows of A are sparse dicts)."""

    c: List[object]
    rows: List[Dict[int, object]]
    b: List[object]
    names: List[str] = field(default_factory=list)
    row_names: List[str] = field(default_factory=list)

    @property
    def n(self):
        return len(self.c)

    def check(self):
        for r in self.rows:
            if any(not 0 <= j < self.n for j in r):
                raise InvariantViolation("constraint references unknown variable")
        if len(self.rows) != len(self.b):
            raise InvariantViolation("row and right-hand-side counts differ")


@dataclass
class LpResult:
    status: str
    x: Optional[list] = None
    value: object = None
    pivots: int = 0


def _pivot(T, i, j):
    T[i] = T[i] / T[i, j]
    col = T[:, j].copy()
    col[i] = 0
    nz = np.nonzero(col)[0]
    if len(nz):
        T[nz] -= np.outer(col[nz], T[i])


def _run(T, basis, m, ncols, tol, counter):
    """Optimize the objective stored in row ``m`` over columns ``< ncols``."""
    bland = False
    while True:
        obj = T[m, :ncols]
        if bland:
            cands = np.nonzero(obj < -tol)[0]
            if not len(cands):
                return OPTIMAL
            j = int(cands[0])
        else:
            j = int(np.argmin(obj))
            if not obj[j] < -tol:
                return OPTIMAL
        col = T[:m, j]
        rhs = T[:m, -1]
        best = None
        for i in np.nonzero(col > tol)[0]:
            ratio = rhs[i] / col[i]
            if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                best = (ratio, i)
        if best is None:
            return UNBOUNDED
        counter[0] += 1
        if counter[0] > PIVOT_CAP:
            raise BudgetError(f"simplex exceeded {PIVOT_CAP} pivots", required=counter[0])
        # a zero step means degeneracy: fall back to Bland's rule against cycling
        bland = bland or best[0] <= tol
        i = int(best[1])
        _pivot(T, i, j)
        basis[i] = j


def _crossover(p, basis, keep):
    """Certify a float-optimal basis exactly; ``None`` if it does not hold up."""
    n = p.n
    rows = [{j: Fraction(v) for j, v in p.rows[i].items()} for i in keep]
    col_of = {j: k for k, j in enumerate(basis)}
    bmat = [{col_of[j]: v for j, v in r.items() if j in col_of} for r in rows]
    try:
        xb = numeric.solve(bmat, [[Fraction(p.b[i])] for i in keep], exact=True)
    except SingularSystemError:
        return None
    x = [Fraction(0)] * n
    for k, j in enumerate(basis):
        if xb[k][0] < 0:
            return None
        x[j] = xb[k][0]
    # every original row, including the dropped redundant ones, must hold
    for r, bi in zip(p.rows, p.b):
        if sum((Fraction(v) * x[j] for j, v in r.items()), Fraction(0)) != Fraction(bi):
            return None
    c = [Fraction(v) for v in p.c]
    bt = [dict() for _ in basis]
    for i, r in enumerate(rows):
        for k, v in bmat[i].items():
            bt[k][i] = v
    try:
        pi = numeric.solve(bt, [[c[j]] for j in basis], exact=True)
    except SingularSystemError:
        return None
    reduced = [-c[j] for j in range(n)]
    for i, r in enumerate(rows):
        yi = pi[i][0]
        if yi:
            for j, v in r.items():
                reduced[j] += yi * v
    if any(reduced[j] < 0 for j in range(n) if j not in col_of):
        return None
    value = sum((c[j] * x[j] for j in range(n) if x[j]), Fraction(0))
    return x, value


def solve_lp(p, exact=False, tol=1e-9):
    """Two-phase primal simplex. Returns an :class:`LpResult`.

    Float programs with more than ``DENSE_VARS`` variables are solved by
    HiGHS instead; dense tableaux beyond ``TABLEAU_CAP`` entries are refused.

    In exact mode the program is first solved in floating point; if the
    final basis verifies exactly (primal feasible, no improving column in
    rational arithmetic) that answer is returned, otherwise the simplex is
    rerun on a rational tableau.
    """
    p.check()
    if not exact and p.n > DENSE_VARS:
        return _highs(p, tol)
    entries = (len(p.rows) + 1) * (p.n + len(p.rows) + 1) * (8 if exact else 1)
    if entries > TABLEAU_CAP:
        raise BudgetError(
            f"dense {'rational ' if exact else ''}tableau with {len(p.rows)} rows and {p.n} "
            "columns exceeds the memory budget; use double arithmetic or a smaller model",
            required=entries)
    if exact:
        warm, basis, keep = _simplex(p, False, tol)
        if warm.status == OPTIMAL:
            got = _crossover(p, basis, keep)
            if got is not None:
                return LpResult(OPTIMAL, got[0], got[1], warm.pivots)
    return _simplex(p, exact, tol)[0]


def _highs(p, tol):
    """Large float programs: sparse dual simplex from scipy (HiGHS)."""
    data, ri, ci = [], [], []
    for i, r in enumerate(p.rows):
        for j, v in r.items():
            ri.append(i)
            ci.append(j)
            data.append(float(v))
    A = csr_matrix((data, (ri, ci)), shape=(len(p.rows), p.n))
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = linprog(-np.array([float(v) for v in p.c]), A_eq=A, b_eq=[float(v) for v in p.b],
                  bounds=(0, None), method="highs-ds", options=opts)
    if res.status == 2:
        return LpResult(INFEASIBLE)
    if res.status == 3:
        return LpResult(UNBOUNDED)
    if res.status != 0:
        raise BudgetError(f"LP solver stopped: {res.message}", required=p.n)
    x = [max(float(v), 0.0) for v in res.x]
    value = sum(float(c) * v for c, v in zip(p.c, x) if v)
    return LpResult(OPTIMAL, x, value, int(getattr(res, "nit", 0)))


def _simplex(p, exact, tol):
    n = p.n
    mrows = len(p.rows)
    dtype = object if exact else float
    conv = Fraction if exact else float
    tol = 0 if exact else tol
    zero = conv(0)

    T = np.full((mrows + 1, n + mrows + 1), zero, dtype=dtype)
    for i, (r, bi) in enumerate(zip(p.rows, p.b)):
        sign = -1 if bi < 0 else 1
        for j, v in r.items():
            T[i, j] += conv(v) * sign
        T[i, -1] = conv(bi) * sign
        T[i, n + i] = conv(1)
    basis = list(range(n, n + mrows))
    counter = [0]

    # phase 1: maximize -(sum of artificials)
    for i in range(mrows):
        T[mrows] -= T[i]
    T[mrows, n:n + mrows] = zero
    _run(T, basis, mrows, n + mrows, tol, counter)
    scale = max([1] + [abs(float(v)) for v in p.b])
    if T[mrows, -1] < -tol * scale:
        return LpResult(INFEASIBLE, pivots=counter[0]), None, None

    # drive remaining artificials out of the basis; rows that cannot be
    # pivoted are redundant and dropped
    keep = []
    for i in range(mrows):
        if basis[i] >= n:
            cands = [j for j in range(n) if abs(T[i, j]) > tol]
            if cands:
                j = max(cands, key=lambda j: abs(T[i, j]))
                _pivot(T, i, j)
                basis[i] = j
            else:
                continue
        keep.append(i)
    T = np.concatenate([T[keep][:, :n], T[keep][:, -1:]], axis=1)
    T = np.concatenate([T, np.full((1, n + 1), zero, dtype=dtype)], axis=0)
    basis = [basis[i] for i in keep]
    m2 = len(keep)

    c = [conv(v) for v in p.c]
    cmax = max([1.0] + [abs(float(v)) for v in c])
    for j in range(n):
        T[m2, j] = -c[j]
    for i, j in enumerate(basis):
        if T[m2, j] != 0:
            T[m2] -= T[m2, j] * T[i]
    status = _run(T, basis, m2, n, tol * cmax, counter)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, pivots=counter[0]), None, None
    x = [zero] * n
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    if not exact:
        x = [max(float(v), 0.0) for v in x]
    value = sum((c[j] * x[j] for j in range(n) if x[j]), zero)
    return LpResult(OPTIMAL, x, value, counter[0]), list(basis), list(keep)


# --- flow polytope ---------------------------------------------------------

@dataclass
class FlowProgram:
    mdp: object
    lp: LinearProgram
    xvars: List[Tuple[int, int]]
    yvars: List[int]
    x_index: Dict[Tuple[int, int], int]
    y_index: Dict[int, int]

    @property
    def n_x(self):
        return len(self.xvars)

    def objective(self, weights):
        """Objective vector ``sum_q weights[q] * y[q]``."""
        c = [0] * self.lp.n
        for q, w in weights.items():
            if q in self.y_index:
                c[self.y_index[q]] = w
        return c

    def y_row(self, coef):
        return {self.y_index[q]: v for q, v in coef.items() if q in self.y_index and v != 0}

    def solve(self, weights, config=DEFAULT, extra=()):
        """Maximize ``sum_q weights[q] y[q]``; ``extra`` adds ``(row, rhs)`` equalities."""
        p = LinearProgram(
            self.objective(weights),
            self.lp.rows + [r for r, _ in extra],
            self.lp.b + [v for _, v in extra],
            self.lp.names,
            self.lp.row_names + [f"extra{i}" for i in range(len(extra))],
        )
        res = solve_lp(p, exact=config.exact, tol=config.value_tol)
        if res.status != OPTIMAL and not extra:
            raise InvariantViolation(f"flow program reported {res.status}")
        return res

    def y_of(self, x):
        return {q: x[self.y_index[q]] for q in self.yvars}


def build_flow(m):
    """Occupation-measure program of a preprocessed weighted model."""
    terminals = m.terminals
    xvars = [(s, a) for s in range(m.n) if s not in terminals for a in m.enabled[s]]
    yvars = sorted(terminals)
    x_index = {v: i for i, v in enumerate(xvars)}
    y_index = {q: len(xvars) + i for i, q in enumerate(yvars)}
    rows = {s: {} for s in range(m.n)}
    for k, (s, a) in enumerate(xvars):
        rows[s][k] = rows[s].get(k, 0) + 1
        for t, p in m.trans[s, a]:
            rows[t][k] = rows[t].get(k, 0) - p
    for q in yvars:
        rows[q][y_index[q]] = 1
    order = [s for s in range(m.n) if s not in terminals] + yvars
    lp_rows = [{j: v for j, v in rows[s].items() if v != 0} for s in order]
    b = [1 if s == m.initial else 0 for s in order]
    names = [f"x[{m.states[s]},{m.actions[a]}]" for s, a in xvars] + [f"y[{m.states[q]}]" for q in yvars]
    row_names = [f"flow[{m.states[s]}]" for s in order if s not in terminals] + \
                [f"reach[{m.states[q]}]" for q in yvars]
    lp = LinearProgram([0] * len(names), lp_rows, b, names, row_names)
    return FlowProgram(m, lp, xvars, yvars, x_index, y_index)


def extract_scheduler(f, x, tol=1e-9):
    """Memoryless scheduler realizing the occupation measure ``x``."""
    m = f.mdp
    choice = []
    for s in range(m.n):
        acts = m.enabled[s]
        if (s, acts[0]) not in f.x_index:
            choice.append({acts[0]: 1})
            continue
        mass = {a: x[f.x_index[s, a]] for a in acts}
        total = sum(mass.values())
        if total > tol:
            choice.append({a: v / total for a, v in mass.items() if v > tol * total})
            if not choice[-1]:
                choice[-1] = {acts[0]: 1}
        else:
            choice.append({acts[0]: 1})
    return MemorylessScheduler(tuple(choice))


def visit_vector(f, sched, config=DEFAULT):
    """Point of the flow polytope induced by a memoryless scheduler."""
    from .chain import occupation, reach_probs
    num = config.num
    visits = occupation(f.mdp, sched, config)
    x = [num(0)] * f.lp.n
    for (s, a), k in f.x_index.items():
        if s in visits:
            x[k] = visits[s] * num(sched[s].get(a, 0))
    for q, p in reach_probs(f.mdp, sched, config).items():
        x[f.y_index[q]] = p
    return x
