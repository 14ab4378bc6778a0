"""Linear-system solving over exact rationals or doubles.

Systems arrive as sparse rows (``list[dict[col, coef]]``) with a dense
right-hand side of ``k`` columns, which is how the chain code assembles
``(I - P) v = r``.
"""

from fractions import Fraction

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import SingularSystemError

DENSE_LIMIT = 2000


def solve(rows, rhs, exact=False):
    """Solve ``A X = B``; the solution comes back as a list of rows."""
    n = len(rows)
    if n == 0:
        return []
    if exact:
        return _solve_exact(rows, rhs)
    return _solve_float(rows, rhs)


def _solve_exact(rows, rhs):
    n = len(rows)
    rows = [{j: Fraction(v) for j, v in r.items() if v != 0} for r in rows]
    rhs = [[Fraction(v) for v in b] for b in rhs]
    k = len(rhs[0])
    # column -> rows having a nonzero there, kept in sync during elimination
    where = [set() for _ in range(n)]
    for i, r in enumerate(rows):
        for j in r:
            where[j].add(i)
    free = set(range(n))
    pivot_row = [None] * n
    for j in range(n):
        cands = where[j] & free
        if not cands:
            raise SingularSystemError(f"singular system (no pivot for unknown {j})")
        # fewest nonzeros first keeps fill-in low; index breaks ties
        p = min(cands, key=lambda i: (len(rows[i]), i))
        free.discard(p)
        pivot_row[j] = p
        prow, pb = rows[p], rhs[p]
        piv = prow[j]
        for i in list(where[j] & free):
            r = rows[i]
            f = r[j] / piv
            for c, v in prow.items():
                nv = r.get(c, 0) - f * v
                if nv == 0:
                    if c in r:
                        del r[c]
                        where[c].discard(i)
                else:
                    if c not in r:
                        where[c].add(i)
                    r[c] = nv
            b = rhs[i]
            for c in range(k):
                if pb[c]:
                    b[c] -= f * pb[c]
    x = [None] * n
    for j in reversed(range(n)):
        p = pivot_row[j]
        r = rows[p]
        acc = list(rhs[p])
        for c, v in r.items():
            if c != j:
                xc = x[c]
                for q in range(k):
                    acc[q] -= v * xc[q]
        x[j] = [a / r[j] for a in acc]
    return x


def _solve_float(rows, rhs):
    n = len(rows)
    b = np.asarray(rhs, dtype=float).reshape(n, -1)
    if n <= DENSE_LIMIT:
        a = np.zeros((n, n))
        for i, r in enumerate(rows):
            for j, v in r.items():
                a[i, j] += float(v)
        try:
            x = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"singular system: {exc}") from None
    else:
        ii, jj, vv = [], [], []
        for i, r in enumerate(rows):
            for j, v in r.items():
                ii.append(i)
                jj.append(j)
                vv.append(float(v))
        a = scipy.sparse.csc_matrix((vv, (ii, jj)), shape=(n, n))
        x = scipy.sparse.linalg.spsolve(a, b)
        x = np.asarray(x).reshape(n, -1)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("singular system: non-finite solution")
    return x.tolist()
