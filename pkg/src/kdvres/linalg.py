"""Exact linear algebra over the rationals.

Dense fraction matrices with deterministic pivoting (first nonzero entry in
canonical column order), a fraction-free Bareiss forward pass on
denominator-cleared integers, and canonical reduced kernel bases, so every
report is reproducible bit for bit.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from math import gcd, lcm


def _clear_row(row):
    den = 1
    for x in row:
        den = lcm(den, Fraction(x).denominator)
    ints = [int(Fraction(x) * den) for x in row]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    return ints


def _normalize_row(row):
    g = 0
    lead = 0
    for x in row:
        g = gcd(g, abs(x))
        if lead == 0 and x != 0:
            lead = x
    if g == 0:
        return row
    if lead < 0:
        g = -g
    return [x // g for x in row]


def bareiss_echelon(matrix):
    """Fraction-free forward elimination on denominator-cleared integers.

    Cross-multiplication only (no division), with a gcd normalization per
    row to control growth; works uniformly for rank-deficient matrices.
    Returns (rows, pivots): integer echelon rows and the pivot column of
    each.  Pivot choice is deterministic: scan columns left to right, take
    the first remaining row with a nonzero entry.
    """
    rows = [_clear_row(r) for r in matrix]
    rows = [r for r in rows if any(x != 0 for x in r)]
    if not rows:
        return [], []
    ncols = len(rows[0])
    pivots = []
    r = 0
    for c in range(ncols):
        pr = None
        for i in range(r, len(rows)):
            if rows[i][c] != 0:
                pr = i
                break
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        piv_row = rows[r]
        piv = piv_row[c]
        for i in range(r + 1, len(rows)):
            f = rows[i][c]
            if f:
                rows[i] = _normalize_row(
                    [piv * rows[i][j] - f * piv_row[j] for j in range(ncols)])
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def rank(matrix):
    return len(bareiss_echelon(matrix)[1])


def rref(matrix):
    """Reduced row echelon form over Fraction, from the Bareiss pass."""
    rows, pivots = bareiss_echelon(matrix)
    frows = [[Fraction(x) for x in row] for row in rows]
    ncols = len(frows[0]) if frows else 0
    for r in range(len(frows) - 1, -1, -1):
        c = pivots[r]
        piv = frows[r][c]
        frows[r] = [x / piv for x in frows[r]]
        for i in range(r):
            f = frows[i][c]
            if f:
                frows[i] = [frows[i][j] - f * frows[r][j] for j in range(ncols)]
    return frows, pivots


def kernel_basis(matrix, ncols=None):
    """Canonical basis of the right kernel.

    One vector per free column (ascending), with entry 1 at the free column.
    """
    if not matrix:
        matrix = []
    if ncols is None:
        ncols = len(matrix[0]) if matrix else 0
    frows, pivots = rref(matrix)
    pivset = set(pivots)
    basis = []
    for f in range(ncols):
        if f in pivset:
            continue
        vec = [Fraction(0)] * ncols
        vec[f] = Fraction(1)
        for r, c in enumerate(pivots):
            vec[c] = -frows[r][f]
        basis.append(vec)
    return basis


def span_contains(basis, vec):
    if all(Fraction(x) == 0 for x in vec):
        return True
    if not basis:
        return False
    return rank(basis) == rank(list(basis) + [list(vec)])


def same_span(vectors_a, vectors_b):
    ra = rank(vectors_a) if vectors_a else 0
    rb = rank(vectors_b) if vectors_b else 0
    if ra != rb:
        return False
    joint = list(vectors_a) + list(vectors_b)
    return (rank(joint) if joint else 0) == ra


def det_expansion(rows):
    """Determinant by signed permutation expansion.

    Works over any commutative ring whose elements support + and *; intended
    for the small (k <= 4) determinants of two-point functions.
    """
    k = len(rows)
    if k == 0:
        raise ValueError("empty determinant has no ring to produce 1 in")
    acc = None
    for perm in permutations(range(k)):
        sign = perm_sign(perm)
        prod = rows[0][perm[0]]
        for i in range(1, k):
            prod = prod * rows[i][perm[i]]
        if sign < 0:
            prod = -prod
        acc = prod if acc is None else acc + prod
    return acc


def perm_sign(perm):
    inv = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                inv += 1
    return -1 if inv % 2 else 1
