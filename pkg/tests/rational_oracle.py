"""Exact rational brute-force LP oracle used to validate the simplex kernel.

Enumerates candidate vertices (all choices of n active constraints among the
rows and the nonnegativity bounds), solves each n x n system in exact
Fraction arithmetic, keeps the feasible ones, and returns the best objective.
Only meant for tiny instances.
"""

from fractions import Fraction
from itertools import combinations


def _solve_exact(rows, rhs):
    """Gaussian elimination over Fractions; returns None if singular."""
    n = len(rhs)
    M = [list(map(Fraction, rows[i])) + [Fraction(rhs[i])] for i in range(n)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = M[col][col]
        M[col] = [v / inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def brute_force_optimum(sense, objective, rows, free=None):
    """Exact optimum of  max/min objective.x  s.t. rows, x_j >= 0 unless free.

    ``rows`` is a list of (coeffs, relation, rhs) with integer/Fraction data.
    Returns (value, point) as Fractions, or (None, None) if infeasible.
    Assumes the problem is bounded (caller guarantees this by construction).
    """
    n = len(objective)
    free = free or [False] * n
    cons = []          # (coeffs, rhs, is_equality)
    for coeffs, rel, rhs in rows:
        c = list(map(Fraction, coeffs))
        r = Fraction(rhs)
        if rel == ">=":
            c = [-v for v in c]
            r = -r
            rel = "<="
        cons.append((c, r, rel == "="))
    for j in range(n):
        if not free[j]:
            row = [Fraction(0)] * n
            row[j] = Fraction(-1)
            cons.append((row, Fraction(0), False))

    eq_idx = [i for i, c in enumerate(cons) if c[2]]
    ineq_idx = [i for i, c in enumerate(cons) if not c[2]]
    best_val, best_x = None, None
    need = n - len(eq_idx)
    if need < 0:
        return None, None
    for extra in combinations(ineq_idx, need):
        active = eq_idx + list(extra)
        A = [cons[i][0] for i in active]
        b = [cons[i][1] for i in active]
        x = _solve_exact(A, b)
        if x is None:
            continue
        ok = True
        for c, r, _ in cons:
            if sum(ci * xi for ci, xi in zip(c, x)) > r:
                ok = False
                break
        if not ok:
            continue
        val = sum(Fraction(o) * xi for o, xi in zip(objective, x))
        if best_val is None or (sense == "max" and val > best_val) \
                or (sense == "min" and val < best_val):
            best_val, best_x = val, x
    return best_val, best_x
