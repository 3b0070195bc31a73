"""Independent exact reference implementations.

Everything here is deliberately naive (cubic or exponential) and shares no
code with the engines it checks.  All rational computation is exact.
"""

import math
from fractions import Fraction

import numpy as np

from .errors import SingularInversion, SingularMatrix, TooLarge
from .formula import Add, Inv, Input, Mul, Sub


def _frac_matrix(rows):
    return [[Fraction(e) for e in row] for row in rows]


def _mat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(k)) for j in range(m)] for i in range(n)]


def _mat_addsub(a, b, sign):
    return [[x + sign * y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _gauss_jordan(a):
    """Exact inverse of a Fraction matrix, or None when singular."""
    n = len(a)
    work = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if work[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        work[col], work[piv] = work[piv], work[col]
        scale = work[col][col]
        work[col] = [e / scale for e in work[col]]
        for r in range(n):
            if r != col and work[r][col] != 0:
                f = work[r][col]
                work[r] = [e - f * w for e, w in zip(work[r], work[col])]
    return [row[n:] for row in work]


def inv_exact(a):
    """Exact rational inverse; raises SingularMatrix."""
    inv = _gauss_jordan(_frac_matrix(a))
    if inv is None:
        raise SingularMatrix("matrix is singular")
    return inv


def eval_exact(formula, inputs):
    """Evaluate a formula on rational input matrices, exactly.

    inputs maps each input name to its matrix.  Raises
    SingularInversion(gate path) when an inversion gate meets a singular
    argument.
    """
    mats = {name: _frac_matrix(m) for name, m in inputs.items()}

    def walk(gate, path):
        if isinstance(gate, Input):
            return mats[gate.name]
        if isinstance(gate, Inv):
            val = walk(gate.child, path + ".child")
            inv = _gauss_jordan(val)
            if inv is None:
                raise SingularInversion(path)
            return inv
        if isinstance(gate, Mul):
            return _mat_mul(walk(gate.left, path + ".left"), walk(gate.right, path + ".right"))
        sign = 1 if isinstance(gate, Add) else -1
        return _mat_addsub(walk(gate.left, path + ".left"), walk(gate.right, path + ".right"), sign)

    root = formula.root if hasattr(formula, "root") else formula
    return walk(root, "root")


def det_bareiss(a):
    """Exact determinant by fraction-free (Bareiss) elimination."""
    m = _frac_matrix(a)
    n = len(m)
    if n == 0:
        return Fraction(1)
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = None
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    swap = r
                    break
            if swap is None:
                return Fraction(0)
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev
            m[i][k] = Fraction(0)
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def det_cofactor(a):
    """Cofactor-expansion determinant; cross-check for small matrices."""
    m = _frac_matrix(a)
    n = len(m)

    def rec(rows, cols):
        if len(cols) == 1:
            return rows[0][cols[0]]
        total = Fraction(0)
        rest = rows[1:]
        for pos, c in enumerate(cols):
            if rows[0][c] == 0:
                continue
            minor_cols = cols[:pos] + cols[pos + 1:]
            term = rows[0][c] * rec(rest, minor_cols)
            total += term if pos % 2 == 0 else -term
        return total

    return rec(m, list(range(n)))


def rank_elimination_mod_p(a, p):
    """Row-echelon rank over Z_p."""
    m = [[int(e) % p for e in row] for row in a]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    rank = 0
    for col in range(cols):
        piv = None
        for r in range(rank, rows):
            if m[r][col]:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = pow(m[rank][col], p - 2, p)
        m[rank] = [e * inv % p for e in m[rank]]
        for r in range(rows):
            if r != rank and m[r][col]:
                f = m[r][col]
                m[r] = [(e - f * w) % p for e, w in zip(m[r], m[rank])]
        rank += 1
    return rank


class Graph:
    """Mutable graph with merges, mirroring the matching update vocabulary.

    Edges live between representative vertices of the merge quotient; the
    adjacency stored here keeps original endpoints and is quotiented lazily.
    """

    def __init__(self, n):
        self.n = n
        self.active = set(range(n))
        self.edges = set()
        self.merge_to = {}

    def rep(self, v):
        while v in self.merge_to:
            v = self.merge_to[v]
        return v

    def insert(self, u, v):
        self.edges.add(frozenset((u, v)))

    def remove(self, u, v):
        self.edges.discard(frozenset((u, v)))

    def vertex_on(self, v):
        self.active.add(v)

    def vertex_off(self, v):
        self.active.discard(v)

    def merge(self, u, v):
        self.merge_to[v] = u
        self.active.discard(v)

    def quotient_edges(self):
        out = set()
        for e in self.edges:
            a, b = tuple(e)
            ra, rb = self.rep(a), self.rep(b)
            if ra == rb:
                continue
            if ra in self.active and rb in self.active:
                out.add(frozenset((ra, rb)))
        return out


def max_matching_bruteforce(g):
    """Exact maximum matching size of the quotient active graph, n <= 12."""
    if g.n > 12:
        raise TooLarge(f"brute-force matching limited to 12 vertices, got {g.n}")
    verts = sorted(v for v in g.active if v not in g.merge_to)
    index = {v: i for i, v in enumerate(verts)}
    adj = [0] * len(verts)
    for e in g.quotient_edges():
        a, b = tuple(e)
        ia, ib = index[a], index[b]
        adj[ia] |= 1 << ib
        adj[ib] |= 1 << ia
    memo = {}

    def dp(mask):
        if mask == 0:
            return 0
        got = memo.get(mask)
        if got is not None:
            return got
        v = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        best = dp(rest)
        nbrs = adj[v] & rest
        while nbrs:
            u_bit = nbrs & -nbrs
            nbrs ^= u_bit
            cand = 1 + dp(rest & ~u_bit)
            if cand > best:
                best = cand
        memo[mask] = best
        return best

    return dp((1 << len(verts)) - 1)


def _sigma_max(m_float):
    """Largest singular value by power iteration on M^T M; 1e-9 tolerance."""
    n = m_float.shape[0]
    gram = m_float.T @ m_float
    scale = np.linalg.norm(gram)
    if scale == 0.0:
        return 0.0
    v = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(10 * n * n):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_lam = float(v @ (gram @ v))
        if abs(new_lam - lam) <= 1e-9 * max(new_lam, 1e-30):
            return math.sqrt(max(new_lam, 0.0))
        lam = new_lam
    raise ArithmeticError("power iteration did not converge")


def det_perturbation_bounds(a, x, eps):
    """Exact [lower, upper] bracket for |det(A + epshat*X)| plus epshat.

    epshat = eps / (n^2 * sigma_max(A^-1 X)), with sigma_max estimated by
    power iteration; sigma_max = 0 (X = 0 case) gives epshat = 0 and the
    bracket collapses around |det A|.
    """
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    a = _frac_matrix(a)
    x = _frac_matrix(x)
    n = len(a)
    if n < 2:
        raise ValueError("need n >= 2")
    ainv = _gauss_jordan(a)
    if ainv is None:
        raise SingularMatrix("A is singular")
    ainv_x = _mat_mul(ainv, x)
    sigma = _sigma_max(np.array([[float(e) for e in row] for row in ainv_x]))
    eps = Fraction(eps)
    if sigma == 0.0:
        epshat = Fraction(0)
    else:
        epshat = eps / (n * n * Fraction(sigma))
    trace = sum(ainv_x[i][i] for i in range(n))
    det_a = abs(det_bareiss(a))
    slack = eps * eps / n
    lower = det_a * (1 + epshat * trace - slack)
    upper = det_a * (1 + epshat * trace + slack)
    return lower, upper, epshat
