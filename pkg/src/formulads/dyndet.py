"""Dynamic determinant maintenance: det(f) as the ratio det(N-hat)/det(N).

Determinants live in log-space (SignedLogDet) so that products of hundreds
of diagonal entries cannot overflow.  Initialization runs a Householder QR
per matrix; each entry update multiplies the two logs by the determinant
lemma factors d1 = 1 + v^T N~^-1 u and d2 for N-hat, obtained as single
entry queries against the inverse engines.  An undo log of engine snapshots
makes updates reversible; everything restarts from scratch on a fixed
cadence.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from . import _dense
from .construct import build, build_hat
from .dyninv import WoodburyState
from .errors import EmptyUndoLog, SingularMatrix, SingularUpdate
from .formula import as_formula, check_dims
from .scalars import (FixedPoint, FixedPointRing, Float64Ring, PrimeFieldRing,
                      RationalRing)


@dataclass(frozen=True)
class SignedLogDet:
    sign: int          # -1, 0, +1
    log_abs: float     # ln |det|; -inf when sign == 0

    def __post_init__(self):
        if self.sign == 0:
            object.__setattr__(self, "log_abs", float("-inf"))

    def mul(self, other):
        return SignedLogDet(self.sign * other.sign, self.log_abs + other.log_abs)

    def ratio(self, other):
        if other.sign == 0:
            raise ZeroDivisionError("ratio by a zero determinant")
        return SignedLogDet(self.sign * other.sign, self.log_abs - other.log_abs)

    def times_scalar(self, ring, x):
        s = ring.sign(x)
        if s == 0:
            return SignedLogDet(0, float("-inf"))
        return SignedLogDet(self.sign * s, self.log_abs + ring.log_abs(x))

    def value(self):
        try:
            return self.sign * math.exp(self.log_abs)
        except OverflowError:
            return self.sign * math.inf

    @classmethod
    def from_fraction(cls, fr):
        fr = Fraction(fr)
        if fr == 0:
            return cls(0, float("-inf"))
        sign = 1 if fr > 0 else -1
        return cls(sign, math.log(abs(fr.numerator)) - math.log(fr.denominator))


def _infer_ring(a):
    probe = a[0][0] if a and a[0] else 0.0
    if isinstance(probe, Fraction) or isinstance(probe, int):
        return RationalRing()
    if isinstance(probe, FixedPoint):
        return FixedPointRing(probe.frac_bits)
    return Float64Ring()


def _exact_signed_logdet(a):
    """Fraction-exact elimination determinant, returned in log space."""
    n = len(a)
    m = [[Fraction(e) for e in row] for row in a]
    sign = 1
    log = 0.0
    for k in range(n):
        piv = None
        for r in range(k, n):
            if m[r][k] != 0:
                piv = r
                break
        if piv is None:
            raise SingularMatrix("exact elimination met a zero column")
        if piv != k:
            m[k], m[piv] = m[piv], m[k]
            sign = -sign
        p = m[k][k]
        if p < 0:
            sign = -sign
        log += math.log(abs(p.numerator)) - math.log(p.denominator)
        for r in range(k + 1, n):
            f = m[r][k] / p
            if f == 0:
                continue
            m[r] = [x - f * y for x, y in zip(m[r], m[k])]
    return SignedLogDet(sign, log)


def signed_logdet_qr(a, eps1=None, ring=None):
    """Signed log-determinant via Householder QR.

    det(Q) = (-1)^(number of nontrivial reflections); |det| = prod |R_ii|.
    The achieved relative error is bounded by the ring's resolution (well
    under any sensible eps1 for float64 or wide fixed-point); with the
    rational ring the computation switches to exact elimination, no sqrt
    needed.  Raises SingularMatrix when a diagonal of R falls under the
    singularity tolerance.
    """
    if eps1 is not None and not 0 < eps1 < 1:
        raise ValueError("eps1 must lie in (0, 1)")
    if ring is None:
        ring = _infer_ring(a)
    if isinstance(ring, PrimeFieldRing):
        raise TypeError("Z_p has no signed determinant; see the rank module")
    if ring.exact:
        return _exact_signed_logdet(a)
    n = len(a)
    if n == 0:
        return SignedLogDet(1, 0.0)
    r = _dense.copy_matrix(a)
    scale = _dense.frobenius(ring, a) / n
    reflections = 0
    for k in range(n - 1):
        ssq = ring.zero()
        for i in range(k, n):
            ssq = ring.add(ssq, ring.mul(r[i][k], r[i][k]))
        sigma = ring.sqrt(ssq)
        if not ring.pivot_ok(sigma, scale):
            raise SingularMatrix(f"column {k} is numerically zero under QR")
        x0 = r[k][k]
        alpha = ring.neg(sigma) if ring.sign(x0) >= 0 else sigma
        v = [ring.sub(x0, alpha)] + [r[i][k] for i in range(k + 1, n)]
        vtv = ring.zero()
        for e in v:
            vtv = ring.add(vtv, ring.mul(e, e))
        beta = ring.div(ring.from_int(2), vtv)
        for j in range(k, n):
            w = ring.zero()
            for i in range(k, n):
                w = ring.add(w, ring.mul(v[i - k], r[i][j]))
            if ring.is_zero(w):
                continue
            bw = ring.mul(beta, w)
            for i in range(k, n):
                r[i][j] = ring.sub(r[i][j], ring.mul(v[i - k], bw))
        reflections += 1
    sign = -1 if reflections % 2 else 1
    log = 0.0
    for i in range(n):
        d = r[i][i]
        if not ring.pivot_ok(d, scale):
            raise SingularMatrix(f"R[{i}][{i}] under tolerance; matrix singular")
        sign *= ring.sign(d)
        log += ring.log_abs(d)
    return SignedLogDet(sign, log)


@dataclass
class _UndoRecord:
    row: int
    col: int
    prior_ldN: SignedLogDet
    prior_ldNhat: SignedLogDet
    snap_invN: tuple
    snap_invNhat: tuple
    prior_n_entry: object
    prior_hat_entry: object
    prior_k: int


class DetTracker:
    """Maintains det(f(inputs)) under entry updates, with reverts.

    The estimate is the SignedLogDet ratio ldNhat / ldN.  Updates are
    refused (SingularUpdate, state untouched) when either determinant
    factor falls under the singularity tolerance, which is exactly the
    caller's signal that the attempted change would break invertibility.
    """

    def __init__(self, cons, hat, eps, t_max):
        self.cons = cons
        self.hat = hat
        self.ring = cons.ring
        self.eps = eps
        self.t_max = t_max
        # Per-update budget: half the target spread across the horizon.
        self.eps_step = eps / (2 * t_max)
        # Restart cadence: the declared horizon is already budgeted for, so
        # never restart inside it; beyond that, every n updates as usual.
        self.restart_every = max(cons.n_N, t_max)
        self.undo_log = []
        self.k = 0
        self._init_state()

    def _init_state(self):
        self.ldN = signed_logdet_qr(self.cons.N, ring=self.ring)
        self.ldNhat = signed_logdet_qr(self.hat.Nhat, ring=self.ring)
        self.invN = WoodburyState(self.cons.N, self.ring, eps_step=self.eps_step)
        self.invNhat = WoodburyState(self.hat.Nhat, self.ring, eps_step=self.eps_step)

    def current(self):
        return self.ldNhat.ratio(self.ldN)

    def determinant(self):
        return self.current().value()

    def update_entry(self, leaf_id, i, j, delta):
        ring = self.ring
        u, v = self.cons.entry_update_vectors(leaf_id, i, j, delta)
        r, c, _shape = self.cons.locate_input(leaf_id)
        row, col = r + i, c + j
        if not isinstance(delta, type(ring.zero())):
            delta = ring.from_fraction(Fraction(delta))
        one = ring.one()
        d1 = ring.add(one, ring.mul(delta, self.invN.query_entry(col, row)))
        d2 = ring.add(one, ring.mul(delta, self.invNhat.query_entry(col, row)))
        if not ring.pivot_ok(d1, 1.0):
            raise SingularUpdate("update would make N singular")
        if not ring.pivot_ok(d2, 1.0):
            raise SingularUpdate("update would make det(f) vanish")
        rec = _UndoRecord(row, col, self.ldN, self.ldNhat,
                          self.invN.snapshot(), self.invNhat.snapshot(),
                          self.cons.N[row][col], self.hat.Nhat[row][col], self.k)
        try:
            self.invN.update_rank1(u, v)
            uh, vh = self.hat.pad_vectors(u, v)
            self.invNhat.update_rank1(uh, vh)
        except SingularUpdate:
            self.invN.restore(rec.snap_invN)
            self.invNhat.restore(rec.snap_invNhat)
            raise
        self.cons.apply_entry_update(leaf_id, i, j, delta)
        self.hat.apply_entry_update(leaf_id, i, j, delta)
        self.ldN = self.ldN.times_scalar(ring, d1)
        self.ldNhat = self.ldNhat.times_scalar(ring, d2)
        self.undo_log.append(rec)
        self.k += 1
        if self.k >= self.restart_every:
            self.restart()
        return self.current()

    def revert(self):
        if not self.undo_log:
            raise EmptyUndoLog("no update to revert")
        rec = self.undo_log.pop()
        self.ldN = rec.prior_ldN
        self.ldNhat = rec.prior_ldNhat
        self.invN.restore(rec.snap_invN)
        self.invNhat.restore(rec.snap_invNhat)
        self.cons.N[rec.row][rec.col] = rec.prior_n_entry
        self.hat.Nhat[rec.row][rec.col] = rec.prior_hat_entry
        self.k = rec.prior_k
        return self.current()

    def restart(self):
        """Recompute logs and engines from the current matrices; clears undo."""
        self._init_state()
        self.undo_log = []
        self.k = 0

    def to_json(self):
        cur = self.current()
        return {
            "det_sign": cur.sign,
            "det_log_abs": cur.log_abs,
            "ldN": [self.ldN.sign, self.ldN.log_abs],
            "ldNhat": [self.ldNhat.sign, self.ldNhat.log_abs],
            "updates": self.k,
            "undo_depth": len(self.undo_log),
            "ledger_N": self.invN.ledger(),
            "ledger_Nhat": self.invNhat.ledger(),
            "eps_step": self.eps_step,
        }


def det_tracker_init(f, inputs, eps=1e-3, t_max=None, ring=None):
    """Build the reduction, its bordered companion, engines, and both logs."""
    formula = as_formula(f, inputs)
    check_dims(formula)
    cons = build(formula, inputs, ring)
    hat = build_hat(cons)
    if t_max is None:
        t_max = cons.n_N
    if not 0 < eps < 1 or t_max < 1:
        raise ValueError("need 0 < eps < 1 and t_max >= 1")
    return DetTracker(cons, hat, eps, t_max)


def det_tracker_update(tr, leaf_id, i, j, delta):
    return tr.update_entry(leaf_id, i, j, delta)


def det_tracker_revert(tr):
    return tr.revert()
