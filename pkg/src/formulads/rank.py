"""Dynamic rank over Z_p via the randomized embedding g = P f Q + R_k.

The embedding's value matrix is [[f, X, 0], [Y, 0, I], [0, I, I_k]] with X, Y
uniform over Z_p^{n x n}; det(g) != 0 (w.h.p.) exactly when rank(f) >= n - k,
so the reported rank is n - k for the smallest such k.  Everything runs in
exact field arithmetic (no precision ledger): the reduction of g is built
over Z_p and a Sherman-Morrison inverse plus determinant-lemma factor is
maintained per rank-1 update, with numpy-vectorized modular kernels.
"""

import random
from fractions import Fraction

import numpy as np

from .construct import build, build_hat
from .errors import SingularInversion, SingularMatrix, ZeroDeterminant
from .formula import (Add, Formula, Input, Inv, Mul, as_formula, check_dims,
                      children)
from .scalars import DEFAULT_PRIME, FieldElem, PrimeFieldRing

_M61 = (1 << 61) - 1
_MASK61 = np.uint64(_M61)
_MASK32 = np.uint64(0xFFFFFFFF)


class _ZpOps:
    """Vectorized arithmetic mod p on uint64 (or object) numpy arrays.

    Three regimes: p = 2^61 - 1 uses Mersenne folding (products never
    overflow 64 bits after 32-bit splitting), p < 2^31 multiplies directly
    in uint64, anything else falls back to object-dtype Python ints.
    """

    def __init__(self, p):
        self.p = p
        if p == _M61:
            self.mode = "mersenne61"
            self.dtype = np.uint64
        elif p < (1 << 31):
            self.mode = "small"
            self.dtype = np.uint64
        else:
            self.mode = "object"
            self.dtype = object

    def asarray(self, rows):
        if self.mode == "object":
            arr = np.empty((len(rows), len(rows[0])) if rows and isinstance(rows[0], list)
                           else (len(rows),), dtype=object)
            arr[...] = [r for r in rows]
            return arr % self.p
        return np.array(rows, dtype=np.uint64) % np.uint64(self.p)

    def _fold61(self, x):
        # x < 2^63-ish; one fold brings it under 2^61 + 4, a second to <= 2^61
        x = (x >> np.uint64(61)) + (x & _MASK61)
        x = (x >> np.uint64(61)) + (x & _MASK61)
        return x - np.where(x >= _MASK61, _MASK61, np.uint64(0))

    def mulmod(self, a, b):
        """Elementwise a*b mod p; operands already reduced."""
        if self.mode == "small":
            return (a * b) % np.uint64(self.p)
        if self.mode == "object":
            return (a * b) % self.p
        a_hi = a >> np.uint64(32)
        a_lo = a & _MASK32
        b_hi = b >> np.uint64(32)
        b_lo = b & _MASK32
        hi = a_hi * b_hi                     # < 2^58
        mid = a_hi * b_lo + a_lo * b_hi      # < 2^62
        lo = a_lo * b_lo                     # < 2^64, exact in uint64
        # a*b = hi*2^64 + mid*2^32 + lo; 2^64 = 8 and 2^61 = 1 mod p
        mid_hi = mid >> np.uint64(29)        # * 2^61 = 1
        mid_lo = (mid & np.uint64((1 << 29) - 1)) << np.uint64(32)
        acc = (hi << np.uint64(3)) + mid_hi + mid_lo \
            + (lo >> np.uint64(61)) + (lo & _MASK61)
        return self._fold61(acc)

    def summod(self, prods, axis=None):
        """Sum of already-reduced products mod p (overflow-safe)."""
        if self.mode == "object":
            return prods.sum(axis=axis) % self.p
        if self.mode == "small":
            # each term < 2^31; fine for up to 2^33 terms
            return prods.sum(axis=axis, dtype=np.uint64) % np.uint64(self.p)
        s_lo = (prods & _MASK32).sum(axis=axis, dtype=np.uint64)   # < n * 2^32
        s_hi = (prods >> np.uint64(32)).sum(axis=axis, dtype=np.uint64)
        sh1 = s_hi >> np.uint64(29)
        sh0 = (s_hi & np.uint64((1 << 29) - 1)) << np.uint64(32)
        return self._fold61(sh1 + sh0 + s_lo)

    def addmod(self, a, b):
        if self.mode == "object":
            return (a + b) % self.p
        p = np.uint64(self.p)
        s = a + b
        return s - np.where(s >= p, p, np.uint64(0))

    def submod(self, a, b):
        if self.mode == "object":
            return (a - b) % self.p
        p = np.uint64(self.p)
        s = a + (p - b)     # <= 2p - 1 < 2^62, no wrap
        return s - np.where(s >= p, p, np.uint64(0))

    def negmod(self, a):
        if self.mode == "object":
            return (-a) % self.p
        p = np.uint64(self.p)
        return np.where(a == 0, a, p - a)

    def matvec(self, m, x):
        return self.summod(self.mulmod(m, x[np.newaxis, :]), axis=1)

    def vecmat(self, x, m):
        return self.summod(self.mulmod(x[:, np.newaxis], m), axis=0)

    def outer(self, w, r):
        return self.mulmod(w[:, np.newaxis], r[np.newaxis, :])

    def inv_scalar(self, c):
        c = int(c) % self.p
        if c == 0:
            raise ZeroDivisionError("inverse of zero in Z_p")
        return pow(c, self.p - 2, self.p)

    def matinv_det(self, m):
        """Gauss-Jordan inverse and determinant of m; SingularMatrix if rank-deficient."""
        n = m.shape[0]
        a = m.copy()
        inv = np.zeros((n, n), dtype=self.dtype)
        if self.mode == "object":
            inv[...] = 0
        idx = np.arange(n)
        inv[idx, idx] = self.dtype(1) if self.mode != "object" else 1
        det = 1
        for col in range(n):
            piv_rows = np.nonzero(a[col:, col])[0]
            if piv_rows.size == 0:
                raise SingularMatrix(f"singular over Z_{self.p} at column {col}")
            piv = col + int(piv_rows[0])
            if piv != col:
                a[[col, piv]] = a[[piv, col]]
                inv[[col, piv]] = inv[[piv, col]]
                det = self.p - det if det else 0
            pval = int(a[col, col])
            det = det * pval % self.p
            pinv = self.dtype(self.inv_scalar(pval)) if self.mode != "object" \
                else self.inv_scalar(pval)
            a[col] = self.mulmod(a[col], pinv)
            inv[col] = self.mulmod(inv[col], pinv)
            factors = a[:, col].copy()
            factors[col] = 0
            nz = np.nonzero(factors)[0]
            if nz.size:
                a[nz] = self.submod(a[nz], self.mulmod(
                    factors[nz, np.newaxis], a[col][np.newaxis, :]))
                inv[nz] = self.submod(inv[nz], self.mulmod(
                    factors[nz, np.newaxis], inv[col][np.newaxis, :]))
        return inv, det


class FieldDetState:
    """Exact Z^-1 and det over Z_p under rank-1 updates."""

    def __init__(self, z, p=DEFAULT_PRIME):
        self.ops = _ZpOps(p)
        self.p = p
        mat = self.ops.asarray([list(row) for row in z])
        self.Zinv, self._det = self.ops.matinv_det(mat)
        self.n = mat.shape[0]

    @property
    def det(self):
        return FieldElem(self._det, self.p)

    def _vec(self, x):
        return self.ops.asarray([int(e) % self.p for e in x])

    def rank1(self, u, v):
        """Z <- Z + u v^T; ZeroDeterminant (state unchanged) when det would vanish."""
        ops = self.ops
        u = self._vec(u)
        v = self._vec(v)
        w = ops.matvec(self.Zinv, u)
        c = (1 + int(ops.summod(ops.mulmod(v, w)))) % self.p
        if c == 0:
            raise ZeroDeterminant("update makes the matrix singular over Z_p")
        r = ops.vecmat(v, self.Zinv)
        cinv = ops.dtype(ops.inv_scalar(c)) if ops.mode != "object" else ops.inv_scalar(c)
        self.Zinv = ops.submod(self.Zinv, ops.mulmod(cinv, ops.outer(w, r)))
        self._det = self._det * c % self.p
        return c

    def entry_update(self, i, j, delta):
        """Z[i][j] += delta, specialized (u = delta e_i, v = e_j)."""
        ops = self.ops
        delta = int(delta) % self.p
        if delta == 0:
            return 1
        d = ops.dtype(delta) if ops.mode != "object" else delta
        w = ops.mulmod(self.Zinv[:, i], d)
        c = (1 + int(w[j])) % self.p
        if c == 0:
            raise ZeroDeterminant("update makes the matrix singular over Z_p")
        r = self.Zinv[j, :].copy()
        cinv = ops.dtype(ops.inv_scalar(c)) if ops.mode != "object" else ops.inv_scalar(c)
        self.Zinv = ops.submod(self.Zinv, ops.mulmod(cinv, ops.outer(w, r)))
        self._det = self._det * c % self.p
        return c

    def revert_entry(self, i, j, delta):
        """Exact inverse of entry_update (field arithmetic has no drift)."""
        self.entry_update(i, j, (-int(delta)) % self.p)

    def query_entry(self, i, j):
        return int(self.Zinv[i, j])


def fp_det_rank1(st, u, v):
    """Determinant-lemma rank-1 update; returns the new determinant."""
    st.rank1(u, v)
    return st.det


class RankState:
    """Maintains rank(f(inputs)) over Z_p with one diagonal toggle per step.

    Tracks the bordered reduction of g = P f Q + R_k.  Entry updates to f's
    inputs route through the exact field det-state; when the determinant
    would vanish the defect k grows by one, and after each successful update
    a decrement of k is attempted and kept only if the determinant stays
    nonzero.  Reported rank is always n - k.
    """

    def __init__(self, f, inputs, p=DEFAULT_PRIME, seed=0):
        formula = as_formula(f, inputs)
        shape = check_dims(formula)
        if shape[0] != shape[1]:
            raise ValueError(f"rank embedding needs a square output, got {shape}")
        self.n = shape[0]
        self.p = p
        self.seed = seed
        self.ring = PrimeFieldRing(p)
        self.base_formula = formula
        n = self.n
        dims = dict(formula.dims)
        dims["_P"] = (3 * n, n)
        dims["_Q"] = (n, 3 * n)
        dims["_R"] = (3 * n, 3 * n)
        root = Add(Mul(Mul(Input("_P"), formula.root), Input("_Q")), Input("_R"))
        self.g_formula = Formula(root, dims)
        self._track_n = any(isinstance(gate, Inv) for gate in self._walk(formula.root))
        rng = random.Random(seed)
        self._build_states(inputs, rng)
        self._descend_to_minimal_k()
        self.toggle_count = 0

    @staticmethod
    def _walk(gate):
        stack = [gate]
        while stack:
            g = stack.pop()
            yield g
            stack.extend(children(g))

    def _build_states(self, inputs, rng):
        n, p = self.n, self.p
        for attempt in range(5):
            x_blk = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
            y_blk = [[rng.randrange(p) for _ in range(n)] for _ in range(n)]
            p_mat = [[1 if r == c else 0 for c in range(n)] for r in range(3 * n)]
            q_mat = [[1 if r == c else 0 for c in range(3 * n)] for r in range(n)]
            r_mat = [[0] * (3 * n) for _ in range(3 * n)]
            for i in range(n):
                for j in range(n):
                    r_mat[i][n + j] = x_blk[i][j]
                    r_mat[n + i][j] = y_blk[i][j]
                r_mat[n + i][2 * n + i] = 1
                r_mat[2 * n + i][n + i] = 1
                r_mat[2 * n + i][2 * n + i] = 1     # I_k at k = n
            full = {"_P": p_mat, "_Q": q_mat, "_R": r_mat}
            for name, m in inputs.items():
                full[name] = [[self.ring.from_fraction(Fraction(e)) for e in row]
                              for row in m]
            cons = build(self.g_formula, full, self.ring)
            hat = build_hat(cons)
            try:
                self.stNhat = FieldDetState(hat.Nhat, p)
                self.stN = FieldDetState(cons.N, p) if self._track_n else None
            except SingularMatrix:
                continue    # P(det = 0 at k = n) <= n/p; resample X, Y
            self.cons = cons
            self.hat = hat
            self.k = self.n
            self.leaf_values = {lid: [row[:] for row in full[name]]
                                for lid, (_r, _c, _s, name) in cons.leaf_blocks.items()}
            self._r_leaf = cons.leaves_of("_R")[0]
            r0, c0, _shape = cons.locate_input(self._r_leaf)
            self._r_row0, self._r_col0 = r0, c0
            return
        raise RuntimeError("could not draw an invertible embedding (p too small?)")

    def _apply_both(self, row, col, delta):
        """One rank-1 entry update against both field states, atomically."""
        self.stNhat.entry_update(row, col, delta)
        if self.stN is not None:
            try:
                self.stN.entry_update(row, col, delta)
            except ZeroDeterminant:
                self.stNhat.revert_entry(row, col, delta)
                raise SingularInversion("<inside the formula, mod p>") from None

    def _toggle(self, t, delta):
        d = 2 * self.n + t
        self._apply_both(self._r_row0 + d, self._r_col0 + d, delta)
        vals = self.leaf_values[self._r_leaf]
        vals[d][d] = (vals[d][d] + delta) % self.p

    def _descend_to_minimal_k(self):
        """Find the smallest k with det(g) != 0 (same k the ascending probe finds)."""
        while self.k > 0:
            try:
                self._toggle(self.k - 1, -1)
            except ZeroDeterminant:
                break
            self.k -= 1

    def rank(self):
        return self.n - self.k

    def apply_update(self, leaf_id, i, j, new_value):
        """Entry update with new-value semantics; returns the new rank."""
        r0, c0, (rows, cols) = self.cons.locate_input(leaf_id)
        if not (0 <= i < rows and 0 <= j < cols):
            raise IndexError(f"entry ({i},{j}) outside {rows}x{cols} leaf")
        new_value = self.ring.from_fraction(Fraction(new_value)) \
            if not isinstance(new_value, int) else new_value % self.p
        cur = self.leaf_values[leaf_id][i][j]
        delta = (new_value - cur) % self.p
        if delta == 0:
            return self.rank()
        row, col = r0 + i, c0 + j
        try:
            self._apply_both(row, col, delta)
        except ZeroDeterminant:
            # rank fell below n - k: add the (k+1)-th 1, then the update fits
            if self.k >= self.n:
                raise RuntimeError("embedding singular at k = n; vanishing probability event")
            self._toggle(self.k, 1)
            self.k += 1
            self.toggle_count += 1
            self._apply_both(row, col, delta)   # rank drops by <= 1, so this succeeds w.h.p.
        else:
            if self.k > 0:
                # try to delete the k-th 1; keep only if det stays nonzero
                try:
                    self._toggle(self.k - 1, -1)
                    self.k -= 1
                    self.toggle_count += 1
                except ZeroDeterminant:
                    pass
        self.leaf_values[leaf_id][i][j] = new_value
        return self.rank()

    def to_json(self):
        return {"n": self.n, "k": self.k, "rank": self.rank(), "p": self.p,
                "seed": self.seed, "toggles": self.toggle_count}


def rank_tracker_init(f, inputs, p=DEFAULT_PRIME, seed=0):
    return RankState(f, inputs, p, seed)


def rank_tracker_update(st, leaf_id, i, j, new_value):
    return st.apply_update(leaf_id, i, j, new_value)
