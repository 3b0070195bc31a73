"""Dynamic matrix inverse engines.

Three engines maintain an approximation of Z^-1 under low-rank updates:

- WoodburyState: explicit rank-1 Sherman-Morrison on a dense inverse.
- LazyState: base inverse plus buffered (L, R) low-rank pairs; pairs are
  folded into the base every ceil(n^(mu-nu)) updates by one stacked Woodbury
  application computed from the raw buffered factors.
- TwoLevelState: entry updates buffered into n x ceil(n^nu) columns U, V with
  a small C = I + V^T M^-1 U tracker; full batches feed a LazyState base.

Every engine tracks the true matrix so the every-n-updates reset can
recompute from scratch, and reports the additive error ledger (k+1)*eps_step.
With the rational ring the engines are exact at all times.
"""

import math

from ._dense import (copy_matrix, dot, gauss_inverse, identity, mat_mul,
                     mat_vec, vec_mat, zeros)
from .errors import SingularUpdate
from .scalars import RationalRing


def certified_bits(kappa, t_max, eps):
    """Fractional bits sufficient for the certified precision policy.

    Driven by the kappa^26 error-growth lemma: b = ceil(27*log2(kappa)
    + log2(t_max/eps) + 16).  Astronomically conservative in practice.
    """
    if kappa < 2 or t_max < 1 or not 0 < eps < 1:
        raise ValueError("need kappa >= 2, t_max >= 1, 0 < eps < 1")
    return math.ceil(27 * math.log2(kappa) + math.log2(t_max / eps) + 16)


def default_eps_step(ring, kappa):
    """Per-step additive budget from the Woodbury error corollary, 513*kappa^26*eps_D."""
    if ring.exact:
        return 0.0
    if kappa is None:
        raise ValueError("kappa is required to derive the certified budget; "
                         "pass eps_step directly when kappa is unknown")
    unit = 2.0 ** -getattr(ring, "frac_bits", 52)
    try:
        return 513.0 * float(kappa) ** 26 * unit
    except OverflowError:
        return float("inf")


def approx_inverse(z, ring, eps=None):
    """Approximate inverse at ring precision; exact on the rational ring.

    Refines with Newton steps while the measured residual |XZ - I|_F exceeds
    eps (best effort: precision floors at the ring's resolution).  Raises
    SingularMatrix when elimination meets no tolerable pivot.
    """
    x = gauss_inverse(ring, z)
    if ring.exact or eps is None:
        return x
    n = len(z)
    for _ in range(40):
        prod = mat_mul(ring, x, z)
        res = 0.0
        for i in range(n):
            for j in range(n):
                d = ring.to_float(prod[i][j]) - (1.0 if i == j else 0.0)
                res += d * d
        if math.sqrt(res) <= eps:
            break
        # X <- X + X(I - ZX) = 2X - X Z X
        zx = mat_mul(ring, z, x)
        corr = mat_mul(ring, x, zx)
        x = [[ring.sub(ring.add(a, a), b) for a, b in zip(ra, rb)]
             for ra, rb in zip(x, corr)]
    return x


class WoodburyState:
    """Explicit rank-1 engine: dense Z~^-1, Sherman-Morrison per update."""

    def __init__(self, z, ring=None, eps_step=None, kappa=None, eps_inverse=None):
        self.ring = ring or RationalRing()
        self.n = len(z)
        self.Ztrue = copy_matrix(z)
        self.Zinv = approx_inverse(z, self.ring, eps_inverse)
        self.kappa = kappa
        self.eps_step = (default_eps_step(self.ring, kappa) if eps_step is None
                         and kappa is not None else (eps_step or 0.0))
        self.k = 0

    def ledger(self):
        """Running additive bound on |Z~ - Z|_F."""
        return (self.k + 1) * self.eps_step

    def _denominator(self, u, v):
        w = mat_vec(self.ring, self.Zinv, u)
        den = self.ring.add(self.ring.one(), dot(self.ring, v, w))
        return w, den

    def update_rank1(self, u, v):
        """Z <- Z + u v^T.  Raises SingularUpdate (state unchanged) when
        |1 + v^T Z~^-1 u| falls below the singularity tolerance."""
        ring = self.ring
        w, den = self._denominator(u, v)
        if not ring.pivot_ok(den, 1.0):
            raise SingularUpdate("1 + v^T Z^-1 u is numerically zero")
        r = vec_mat(ring, v, self.Zinv)
        d = ring.div(ring.one(), den)
        wd = [ring.mul(e, d) for e in w]
        for i in range(self.n):
            wi = wd[i]
            if ring.is_zero(wi):
                continue
            row = self.Zinv[i]
            self.Zinv[i] = [ring.sub(a, ring.mul(wi, b)) for a, b in zip(row, r)]
        for i, ui in enumerate(u):
            if ring.is_zero(ui):
                continue
            row = self.Ztrue[i]
            self.Ztrue[i] = [ring.add(a, ring.mul(ui, b)) for a, b in zip(row, v)]
        self.k += 1
        if self.k >= self.n:
            self.reset()

    def reset(self):
        self.Zinv = approx_inverse(self.Ztrue, self.ring)
        self.k = 0

    def query_entry(self, i, j):
        return self.Zinv[i][j]

    def query_row(self, i):
        return list(self.Zinv[i])

    def query_col(self, j):
        return [row[j] for row in self.Zinv]

    def dense(self):
        return copy_matrix(self.Zinv)

    def stats(self):
        return {"engine": "explicit", "updates": self.k, "ledger": self.ledger()}

    def snapshot(self):
        return (copy_matrix(self.Zinv), copy_matrix(self.Ztrue), self.k)

    def restore(self, snap):
        self.Zinv = copy_matrix(snap[0])
        self.Ztrue = copy_matrix(snap[1])
        self.k = snap[2]


class LazyState:
    """Lazy engine: Z~^-1 = Minv - sum_i L_i R_i, flushed in one batch.

    Each update is a column batch (U, V) with at most ceil(n^nu) columns.
    Appends L = Z~^-1 U and R = D V^T Z~^-1
    with D the small-inverse (I + V^T Z~^-1 U)^-1; every flush_every =
    ceil(n^(mu-nu)) updates all pairs fold into Minv via a single stacked
    Woodbury from the raw buffered factors.  Flush does not reset the error
    ledger; the every-n full reset does.
    """

    def __init__(self, z, ring=None, eps_step=None, mu=0.528, nu=0.0,
                 kappa=None, eps_inverse=None):
        if not 0 <= nu <= mu <= 1:
            raise ValueError("need 0 <= nu <= mu <= 1")
        self.ring = ring or RationalRing()
        self.n = len(z)
        self.mu = mu
        self.nu = nu
        self.col_cap = max(1, math.ceil(self.n ** nu))
        self.flush_every = max(1, math.ceil(self.n ** (mu - nu)))
        self.Ztrue = copy_matrix(z)
        self.Minv = approx_inverse(z, self.ring, eps_inverse)
        self.pairs = []
        self.raw = []
        self.kappa = kappa
        self.eps_step = (default_eps_step(self.ring, kappa) if eps_step is None
                         and kappa is not None else (eps_step or 0.0))
        self.k = 0

    def ledger(self):
        return (self.k + 1) * self.eps_step

    def _implicit_times(self, u_cols):
        """(Minv - sum L_i R_i) @ U for an n x c column matrix U."""
        ring = self.ring
        out = mat_mul(ring, self.Minv, u_cols)
        for l_mat, r_mat in self.pairs:
            ru = mat_mul(ring, r_mat, u_cols)
            lru = mat_mul(ring, l_mat, ru)
            out = [[ring.sub(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(out, lru)]
        return out

    def _times_implicit(self, vt_rows):
        """V^T @ (Minv - sum L_i R_i) for a c x n row matrix V^T."""
        ring = self.ring
        out = mat_mul(ring, vt_rows, self.Minv)
        for l_mat, r_mat in self.pairs:
            vl = mat_mul(ring, vt_rows, l_mat)
            vlr = mat_mul(ring, vl, r_mat)
            out = [[ring.sub(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(out, vlr)]
        return out

    def update_columns(self, u_cols, v_cols):
        """Z <- Z + U V^T; U, V given as n x c matrices, c <= ceil(n^nu)."""
        ring = self.ring
        c = len(u_cols[0])
        if len(v_cols[0]) != c:
            raise ValueError("U and V must have the same number of columns")
        if c > self.col_cap:
            raise ValueError(f"batch of {c} columns exceeds cap {self.col_cap}")
        l_new = self._implicit_times(u_cols)
        vt = [[v_cols[r][t] for r in range(self.n)] for t in range(c)]
        vt_z = self._times_implicit(vt)
        # S = I + V^T Z~^-1 U, c x c
        s_mat = mat_mul(ring, vt_z, u_cols)
        for t in range(c):
            s_mat[t][t] = ring.add(s_mat[t][t], ring.one())
        try:
            d_mat = gauss_inverse(ring, s_mat)
        except Exception as exc:
            raise SingularUpdate(f"batch makes Z singular: {exc}") from None
        r_new = mat_mul(ring, d_mat, vt_z)
        self.pairs.append((l_new, r_new))
        self.raw.append((copy_matrix(u_cols), copy_matrix(v_cols)))
        uv = mat_mul(ring, u_cols, vt)
        self.Ztrue = [[ring.add(a, b) for a, b in zip(ra, rb)]
                      for ra, rb in zip(self.Ztrue, uv)]
        self.k += 1
        if self.k >= self.n:
            self.reset()
        elif len(self.pairs) >= self.flush_every:
            self.flush()

    def flush(self):
        """Fold all pairs into Minv: one stacked Woodbury from the base."""
        if not self.raw:
            return
        ring = self.ring
        u_all = [sum((u[i] for u, _v in self.raw), []) for i in range(self.n)]
        v_all = [sum((v[i] for _u, v in self.raw), []) for i in range(self.n)]
        total = len(u_all[0])
        mu_cols = mat_mul(ring, self.Minv, u_all)
        vt = [[v_all[r][t] for r in range(self.n)] for t in range(total)]
        vt_m = mat_mul(ring, vt, self.Minv)
        s_mat = mat_mul(ring, vt_m, u_all)
        for t in range(total):
            s_mat[t][t] = ring.add(s_mat[t][t], ring.one())
        try:
            d_mat = gauss_inverse(ring, s_mat)
        except Exception as exc:
            raise SingularUpdate(f"flush met a singular middle matrix: {exc}") from None
        correction = mat_mul(ring, mat_mul(ring, mu_cols, d_mat), vt_m)
        self.Minv = [[ring.sub(a, b) for a, b in zip(ra, rb)]
                     for ra, rb in zip(self.Minv, correction)]
        self.pairs = []
        self.raw = []

    def reset(self):
        self.Minv = approx_inverse(self.Ztrue, self.ring)
        self.pairs = []
        self.raw = []
        self.k = 0

    def query_entry(self, i, j):
        ring = self.ring
        val = self.Minv[i][j]
        for l_mat, r_mat in self.pairs:
            li = l_mat[i]
            acc = ring.zero()
            for t in range(len(li)):
                acc = ring.add(acc, ring.mul(li[t], r_mat[t][j]))
            val = ring.sub(val, acc)
        return val

    def query_row(self, i):
        ring = self.ring
        row = list(self.Minv[i])
        for l_mat, r_mat in self.pairs:
            li = l_mat[i]
            for t, lt in enumerate(li):
                if ring.is_zero(lt):
                    continue
                rrow = r_mat[t]
                row = [ring.sub(a, ring.mul(lt, b)) for a, b in zip(row, rrow)]
        return row

    def query_col(self, j):
        ring = self.ring
        col = [row[j] for row in self.Minv]
        for l_mat, r_mat in self.pairs:
            rcol = [r_mat[t][j] for t in range(len(r_mat))]
            for i in range(self.n):
                li = l_mat[i]
                acc = ring.zero()
                for t, rt in enumerate(rcol):
                    acc = ring.add(acc, ring.mul(li[t], rt))
                col[i] = ring.sub(col[i], acc)
        return col

    def dense(self):
        ring = self.ring
        out = copy_matrix(self.Minv)
        for l_mat, r_mat in self.pairs:
            lr = mat_mul(ring, l_mat, r_mat)
            out = [[ring.sub(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(out, lr)]
        return out

    def stats(self):
        return {"engine": "lazy", "updates": self.k, "pairs": len(self.pairs),
                "ledger": self.ledger()}

    def snapshot(self):
        return (copy_matrix(self.Minv),
                [(copy_matrix(l), copy_matrix(r)) for l, r in self.pairs],
                [(copy_matrix(u), copy_matrix(v)) for u, v in self.raw],
                copy_matrix(self.Ztrue), self.k)

    def restore(self, snap):
        self.Minv = copy_matrix(snap[0])
        self.pairs = [(copy_matrix(l), copy_matrix(r)) for l, r in snap[1]]
        self.raw = [(copy_matrix(u), copy_matrix(v)) for u, v in snap[2]]
        self.Ztrue = copy_matrix(snap[3])
        self.k = snap[4]


class TwoLevelState:
    """Entry-update engine: buffers U, V over a LazyState base.

    Maintains Z~^-1 = B - B U C~^-1 V^T B where B is the base's implicit
    inverse and C = I + V^T B U is tracked by a small explicit engine.  An
    entry update writes one column of U, V and performs a rank-2 update on
    the C tracker; every ceil(n^nu) updates the buffer flushes into the base
    as one column batch, and everything restarts from scratch every n.
    """

    def __init__(self, z, ring=None, eps_step=None, nu=0.54294416, mu=0.86118267,
                 kappa=None, eps_inverse=None):
        self.ring = ring or RationalRing()
        self.n = len(z)
        self.nu = nu
        self.mu = mu
        self.buf_cap = max(1, math.ceil(self.n ** nu))
        self.base = LazyState(z, self.ring, eps_step=eps_step, mu=mu, nu=nu,
                              kappa=kappa, eps_inverse=eps_inverse)
        self.kappa = kappa
        self.eps_step = self.base.eps_step
        self._clear_buffer()
        self.k = 0

    def _clear_buffer(self):
        ring = self.ring
        self.U = zeros(ring, self.n, self.buf_cap)
        self.V = zeros(ring, self.n, self.buf_cap)
        self.fill = 0
        self.Ctracker = WoodburyState(identity(ring, self.buf_cap), ring,
                                      eps_step=self.eps_step)

    def ledger(self):
        return (self.k + 1) * self.eps_step

    def update_entry(self, i, j, delta):
        """Z[i][j] += delta (a ring scalar or int)."""
        ring = self.ring
        if isinstance(delta, int):
            delta = ring.from_int(delta)
        k = self.fill
        base_col = self.base.query_col(i)          # B e_i
        base_row = self.base.query_row(j)          # e_j^T B
        m_u = [ring.mul(delta, e) for e in base_col]
        # rank-2 change of C: (V_old^T B u) e_k^T, then e_k a^T with
        # a = (w^T B U_old)^T + (w^T B u) e_k
        b_vec = [dot(ring, [self.V[r][t] for r in range(self.n)], m_u)
                 for t in range(self.buf_cap)]
        a_vec = [dot(ring, base_row, [self.U[r][t] for r in range(self.n)])
                 for t in range(self.buf_cap)]
        a_vec[k] = ring.add(a_vec[k], ring.mul(base_row[i], delta))
        e_k = [ring.zero()] * self.buf_cap
        e_k[k] = ring.one()
        snap = self.Ctracker.snapshot()
        try:
            self.Ctracker.update_rank1(b_vec, e_k)
            self.Ctracker.update_rank1(e_k, a_vec)
        except SingularUpdate:
            self.Ctracker.restore(snap)
            raise
        self.U[i][k] = ring.add(self.U[i][k], delta)
        self.V[j][k] = ring.one()
        self.fill += 1
        self.k += 1
        if self.k >= self.n:
            self.reset()
        elif self.fill >= self.buf_cap:
            self._flush_buffer()

    def _flush_buffer(self):
        cols = self.fill
        u_batch = [[row[t] for t in range(cols)] for row in self.U]
        v_batch = [[row[t] for t in range(cols)] for row in self.V]
        self.base.update_columns(u_batch, v_batch)
        self._clear_buffer()

    def reset(self):
        ring = self.ring
        true_z = copy_matrix(self.base.Ztrue)
        for t in range(self.fill):
            for i in range(self.n):
                uit = self.U[i][t]
                if ring.is_zero(uit):
                    continue
                row = true_z[i]
                true_z[i] = [ring.add(a, ring.mul(uit, self.V[r][t]))
                             for r, a in enumerate(row)]
        self.base = LazyState(true_z, ring, eps_step=self.base.eps_step,
                              mu=self.mu, nu=self.nu, kappa=self.kappa)
        self._clear_buffer()
        self.k = 0

    def query_entry(self, i, j):
        ring = self.ring
        base_val = self.base.query_entry(i, j)
        if self.fill == 0:
            return base_val
        row_i = self.base.query_row(i)
        col_j = self.base.query_col(j)
        p_vec = [dot(ring, row_i, [self.U[r][t] for r in range(self.n)])
                 for t in range(self.buf_cap)]
        q_vec = [dot(ring, [self.V[r][t] for r in range(self.n)], col_j)
                 for t in range(self.buf_cap)]
        cq = mat_vec(ring, self.Ctracker.Zinv, q_vec)
        return ring.sub(base_val, dot(ring, p_vec, cq))

    def dense(self):
        ring = self.ring
        base_mat = self.base.dense()
        if self.fill == 0:
            return base_mat
        bu = mat_mul(ring, base_mat, self.U)
        vtb = mat_mul(ring, [[self.V[r][t] for r in range(self.n)]
                             for t in range(self.buf_cap)], base_mat)
        corr = mat_mul(ring, mat_mul(ring, bu, self.Ctracker.Zinv), vtb)
        return [[ring.sub(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(base_mat, corr)]

    def stats(self):
        return {"engine": "twolevel", "updates": self.k, "buffer_fill": self.fill,
                "base_pairs": len(self.base.pairs), "ledger": self.ledger()}

    def snapshot(self):
        return (self.base.snapshot(), copy_matrix(self.U), copy_matrix(self.V),
                self.fill, self.Ctracker.snapshot(), self.k)

    def restore(self, snap):
        self.base.restore(snap[0])
        self.U = copy_matrix(snap[1])
        self.V = copy_matrix(snap[2])
        self.fill = snap[3]
        self.Ctracker.restore(snap[4])
        self.k = snap[5]
