"""Dense matrices over a scalar ring, stored as lists of rows.

Engine-side plumbing shared by construct/dyninv/dyndet.  The exact oracles in
oracle.py deliberately do not use this module.
"""

import math
from fractions import Fraction

from .errors import SingularMatrix


def zeros(ring, n, m):
    z = ring.zero()
    return [[z] * m for _ in range(n)]


def identity(ring, n):
    out = zeros(ring, n, n)
    one = ring.one()
    for i in range(n):
        out[i][i] = one
    return out


def copy_matrix(a):
    return [row[:] for row in a]


def from_values(ring, rows):
    """Convert a matrix of ints/Fractions/ring scalars into ring scalars."""
    out = []
    for row in rows:
        cur = []
        for e in row:
            if isinstance(e, (int, Fraction)):
                e = ring.from_fraction(Fraction(e))
            elif isinstance(e, float):
                e = ring.from_fraction(Fraction(e))
            cur.append(e)
        out.append(cur)
    return out


def to_fractions(ring, a):
    return [[ring.to_fraction(e) for e in row] for row in a]


def transpose(a):
    return [list(col) for col in zip(*a)]


def mat_add(ring, a, b):
    return [[ring.add(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_sub(ring, a, b):
    return [[ring.sub(x, y) for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_mul(ring, a, b):
    n, k, m = len(a), len(b), len(b[0])
    bt = transpose(b)
    out = []
    for i in range(n):
        arow = a[i]
        orow = []
        for j in range(m):
            bcol = bt[j]
            acc = ring.zero()
            for t in range(k):
                acc = ring.add(acc, ring.mul(arow[t], bcol[t]))
            orow.append(acc)
        out.append(orow)
    return out


def mat_vec(ring, a, x):
    out = []
    for row in a:
        acc = ring.zero()
        for e, v in zip(row, x):
            if not ring.is_zero(v):
                acc = ring.add(acc, ring.mul(e, v))
        out.append(acc)
    return out


def vec_mat(ring, x, a):
    m = len(a[0])
    acc = [ring.zero()] * m
    for v, row in zip(x, a):
        if ring.is_zero(v):
            continue
        acc = [ring.add(s, ring.mul(v, e)) for s, e in zip(acc, row)]
    return acc


def dot(ring, x, y):
    acc = ring.zero()
    for a, b in zip(x, y):
        acc = ring.add(acc, ring.mul(a, b))
    return acc


def frobenius(ring, a):
    """Frobenius norm as a float (reporting/tolerances only)."""
    s = 0.0
    for row in a:
        for e in row:
            v = ring.to_float(e)
            s += v * v
    return math.sqrt(s)


def frobenius_sq_fraction(ring, a):
    """Exact squared Frobenius norm for exactly-comparable bound checks."""
    s = Fraction(0)
    for row in a:
        for e in row:
            v = ring.to_fraction(e)
            s += v * v
    return s


def gauss_inverse(ring, a):
    """Invert by Gauss-Jordan with partial pivoting at ring precision.

    Raises SingularMatrix when no column pivot passes the ring's
    singularity tolerance.
    """
    n = len(a)
    work = copy_matrix(a)
    inv = identity(ring, n)
    for col in range(n):
        best, best_mag = -1, -1.0
        for r in range(col, n):
            mag = ring.abs_float(work[r][col])
            if mag > best_mag:
                best, best_mag = r, mag
        row_norm = math.sqrt(sum(ring.abs_float(e) ** 2 for e in work[best]))
        if not ring.pivot_ok(work[best][col], row_norm):
            raise SingularMatrix(f"pivot below tolerance in column {col}")
        if best != col:
            work[col], work[best] = work[best], work[col]
            inv[col], inv[best] = inv[best], inv[col]
        piv = work[col][col]
        work[col] = [ring.div(e, piv) for e in work[col]]
        inv[col] = [ring.div(e, piv) for e in inv[col]]
        for r in range(n):
            if r == col:
                continue
            factor = work[r][col]
            if ring.is_zero(factor):
                continue
            work[r] = [ring.sub(e, ring.mul(factor, w)) for e, w in zip(work[r], work[col])]
            inv[r] = [ring.sub(e, ring.mul(factor, w)) for e, w in zip(inv[r], inv[col])]
    return inv


def max_abs_diff(ring_a, a, ring_b, b):
    """Max entrywise |a - b| as a float, values taken exactly where possible."""
    worst = 0.0
    for ra, rb in zip(a, b):
        for x, y in zip(ra, rb):
            d = abs(float(ring_a.to_fraction(x) - ring_b.to_fraction(y)))
            if d > worst:
                worst = d
    return worst
