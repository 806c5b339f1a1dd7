"""Exact rational linear programming for the hull-membership oracle.

Everything here runs on :class:`fractions.Fraction`, so answers carry no
rounding error.  It is meant for small instances (tens of rows/columns) and
serves as the independent check on the floating-point LP path.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list[Fraction] | None
    objective: Fraction | None


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _pivot(T: list[list[Fraction]], r: int, c: int) -> None:
    row = T[r]
    p = row[c]
    if p != ONE:
        T[r] = row = [v / p if v else v for v in row]
    nz = [j for j, v in enumerate(row) if v]
    for i, other in enumerate(T):
        if i == r:
            continue
        f = other[c]
        if f:
            for j in nz:
                other[j] -= f * row[j]


def _run(T: list[list[Fraction]], basis: list[int], ncols: int, allowed: int) -> str:
    """Bland's-rule primal simplex on tableau ``T`` (last row = reduced costs).

    Only columns ``< allowed`` may enter.  Returns "optimal" or "unbounded".
    """
    m = len(basis)
    obj = T[-1]
    while True:
        enter = next((j for j in range(allowed) if obj[j] < 0), None)
        if enter is None:
            return "optimal"
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][ncols] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return "unbounded"
        leave = best[1]
        _pivot(T, leave, enter)
        basis[leave] = enter


def simplex(c: Sequence, A: Sequence[Sequence], b: Sequence) -> LPResult:
    """Minimize ``c @ x`` subject to ``A x = b``, ``x >= 0``, exactly.

    Two-phase method with Bland's anti-cycling rule.  Redundant equality rows
    are detected and dropped after phase one.
    """
    c = [_frac(v) for v in c]
    A = [[_frac(v) for v in row] for row in A]
    b = [_frac(v) for v in b]
    m, n = len(A), len(c)
    if any(len(row) != n for row in A) or len(b) != m:
        raise LPError("inconsistent LP dimensions")
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]

    # phase one: columns [x (n) | artificials (m) | rhs]
    ncols = n + m
    T = [A[i] + [ONE if k == i else ZERO for k in range(m)] + [b[i]] for i in range(m)]
    cost = [-sum((A[i][j] for i in range(m)), ZERO) for j in range(n)] + [ZERO] * m
    cost.append(-sum(b, ZERO))
    T.append(cost)
    basis = list(range(n, n + m))
    _run(T, basis, ncols, ncols)
    if T[-1][ncols] != 0:
        return LPResult("infeasible", None, None)

    # drive zero-level artificials out, dropping rows that are redundant
    i = 0
    while i < len(basis):
        if basis[i] >= n:
            j = next((j for j in range(n) if T[i][j] != 0), None)
            if j is None:
                del T[i]
                del basis[i]
                continue
            _pivot(T, i, j)
            basis[i] = j
        i += 1

    # phase two: reduced costs for the true objective
    obj = c + [ZERO] * m + [ZERO]
    for i, bv in enumerate(basis):
        cb = c[bv]
        if cb:
            row = T[i]
            for j in range(ncols + 1):
                if row[j]:
                    obj[j] -= cb * row[j]
    T[-1] = obj
    status = _run(T, basis, ncols, n)
    if status == "unbounded":
        return LPResult("unbounded", None, None)
    x = [ZERO] * n
    for i, bv in enumerate(basis):
        x[bv] = T[i][ncols]
    return LPResult("optimal", x, sum((ci * xi for ci, xi in zip(c, x)), ZERO))


def solve_exact(M: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction] | None:
    """Solve a square or overdetermined system exactly; None if inconsistent or singular."""
    rows = [list(map(_frac, r)) + [_frac(v)] for r, v in zip(M, rhs)]
    n = len(rows[0]) - 1 if rows else 0
    piv_row = 0
    where = [-1] * n
    for col in range(n):
        sel = next((r for r in range(piv_row, len(rows)) if rows[r][col] != 0), None)
        if sel is None:
            return None
        rows[piv_row], rows[sel] = rows[sel], rows[piv_row]
        p = rows[piv_row][col]
        rows[piv_row] = [v / p for v in rows[piv_row]]
        for r in range(len(rows)):
            if r != piv_row and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * bb for a, bb in zip(rows[r], rows[piv_row])]
        where[col] = piv_row
        piv_row += 1
    if any(rows[r][n] != 0 for r in range(piv_row, len(rows))):
        return None
    return [rows[where[c]][n] for c in range(n)]


def rank_exact(M: Sequence[Sequence]) -> int:
    rows = [list(map(_frac, r)) for r in M]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        sel = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if sel is None:
            continue
        rows[rank], rows[sel] = rows[sel], rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [a - f * bb for a, bb in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def basic_feasible_solutions(A: Sequence[Sequence], b: Sequence):
    """Yield every basic feasible solution of ``A x = b, x >= 0`` by brute force.

    Tries all column subsets of size ``rank(A)``; exponential, so only for
    toy systems.  Degenerate solutions may be yielded more than once.
    """
    A = [list(map(_frac, r)) for r in A]
    b = list(map(_frac, b))
    n = len(A[0])
    r = rank_exact(A)
    for cols in itertools.combinations(range(n), r):
        sub = [[row[j] for j in cols] for row in A]
        if rank_exact(sub) < r:
            continue
        sol = solve_exact(sub, b)
        if sol is None or any(v < 0 for v in sol):
            continue
        x = [ZERO] * n
        for j, v in zip(cols, sol):
            x[j] = v
        yield x


def hull_distance_exact(vertices: Sequence[Sequence[int]], point: Sequence[Fraction]) -> tuple[Fraction, list[Fraction]]:
    """Exact L1 distance from ``point`` to the convex hull of ``vertices``.

    Returns the distance and the hull weights of a closest point.
    """
    N, K = len(vertices), len(point)
    A = []
    for k in range(K):
        row = [vertices[v][k] for v in range(N)]
        row += [ONE if kk == k else ZERO for kk in range(K)]
        row += [-ONE if kk == k else ZERO for kk in range(K)]
        A.append(row)
    A.append([ONE] * N + [ZERO] * (2 * K))
    c = [ZERO] * N + [ONE] * (2 * K)
    res = simplex(c, A, list(point) + [ONE])
    if res.status != "optimal":
        raise LPError(f"distance LP ended {res.status}")
    return res.objective, res.x[:N]


def hull_interior_exact(vertices: Sequence[Sequence[int]], point: Sequence[Fraction]) -> tuple[Fraction, list[Fraction]] | None:
    """Largest ``t`` with ``point = sum w_v v``, ``w_v >= t`` for all v; None if outside."""
    N, K = len(vertices), len(point)
    colsum = [sum(vertices[v][k] for v in range(N)) for k in range(K)]
    A = [[vertices[v][k] for v in range(N)] + [colsum[k]] for k in range(K)]
    A.append([ONE] * N + [Fraction(N)])
    c = [ZERO] * N + [-ONE]
    res = simplex(c, A, list(point) + [ONE])
    if res.status != "optimal":
        return None
    t = res.x[N]
    return t, [w + t for w in res.x[:N]]
