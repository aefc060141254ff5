"""Dense linear solves in both numeric modes.

Exact mode runs Gaussian elimination over Fractions with support for
several right-hand sides sharing one factorization. Float systems go
through numpy. Systems in this package are small (one row per model
state), so dense elimination is the right tool.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


class SingularMatrixError(ArithmeticError):
    pass


def solve_exact(matrix: list[list[Fraction]], rhs: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve A x = b exactly for every b in `rhs`.

    `matrix` is a dense n-by-n list of Fractions; `rhs` is a list of
    length-n vectors. Returns the solutions in the same order.
    """
    n = len(matrix)
    if n == 0:
        return [[] for _ in rhs]
    m = len(rhs)
    aug = [list(matrix[i]) + [col[i] for col in rhs] for i in range(n)]
    width = n + m
    for c in range(n):
        pivot_row = None
        for r in range(c, n):
            if aug[r][c] != 0:
                pivot_row = r
                break
        if pivot_row is None:
            raise SingularMatrixError(f"singular system (column {c})")
        if pivot_row != c:
            aug[c], aug[pivot_row] = aug[pivot_row], aug[c]
        pivot = aug[c][c]
        row_c = aug[c]
        for r in range(c + 1, n):
            factor = aug[r][c]
            if factor == 0:
                continue
            factor = factor / pivot
            row_r = aug[r]
            row_r[c] = Fraction(0)
            for k in range(c + 1, width):
                if row_c[k]:
                    row_r[k] -= factor * row_c[k]
    solutions = [[Fraction(0)] * n for _ in range(m)]
    for r in range(n - 1, -1, -1):
        row_r = aug[r]
        inv_pivot = 1 / row_r[r]
        for j in range(m):
            acc = row_r[n + j]
            for k in range(r + 1, n):
                if row_r[k]:
                    acc -= row_r[k] * solutions[j][k]
            solutions[j][r] = acc * inv_pivot
    return solutions


def solve_float(matrix: list[list[float]], rhs: list[list[float]]) -> list[list[float]]:
    """Float counterpart of solve_exact (numpy LU behind the scenes)."""
    n = len(matrix)
    if n == 0:
        return [[] for _ in rhs]
    a = np.asarray(matrix, dtype=np.float64)
    b = np.asarray(rhs, dtype=np.float64).T
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    return [list(map(float, x[:, j])) for j in range(len(rhs))]


def solve(matrix, rhs, mode: str):
    from .numeric import EXACT

    if mode == EXACT:
        return solve_exact(matrix, rhs)
    return solve_float(matrix, rhs)
