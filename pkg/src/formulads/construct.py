"""Compile a formula into the block matrix N with index sets I, J.

The construction is bottom-up, one case per gate kind.  Over exact
arithmetic (N^-1)_{I,J} equals the formula value whenever every inversion in
the formula is defined.  The augmented matrix N-hat turns determinants of the
formula value into the ratio det(N-hat)/det(N).
"""

import json
from dataclasses import dataclass
from fractions import Fraction

from . import _dense
from .errors import NonSquareOutput, UnknownLeaf
from .formula import Add, Inv, Input, Mul, Sub, check_dims
from .scalars import RationalRing


@dataclass
class InversionRecord:
    """One inversion gate: its child block sits at N[offset:offset+side]^2.

    i_rel/j_rel index the child's own reduction (relative to offset); the
    gate's argument is (inverse(child block))_{i_rel, j_rel}, out_dim square.
    """
    offset: int
    side: int
    i_rel: list
    j_rel: list
    out_dim: int

    def shifted(self, by):
        return InversionRecord(self.offset + by, self.side, self.i_rel, self.j_rel, self.out_dim)


class _Block:
    __slots__ = ("n", "rows", "i_set", "j_set", "leaf_blocks", "registry")

    def __init__(self, n, rows, i_set, j_set, leaf_blocks, registry):
        self.n = n
        self.rows = rows
        self.i_set = i_set
        self.j_set = j_set
        self.leaf_blocks = leaf_blocks
        self.registry = registry


def _embed(ring, child, total, at):
    rows = _dense.zeros(ring, total, total)
    for r, row in enumerate(child.rows):
        rows[at + r][at:at + child.n] = row
    return rows


class Construction:
    """The compiled reduction: N, I, J, and per-leaf block windows."""

    def __init__(self, formula, ring, n_mat, i_set, j_set, leaf_blocks, registry, out_shape):
        self.formula = formula
        self.ring = ring
        self.N = n_mat
        self.I = i_set
        self.J = j_set
        self.leaf_blocks = leaf_blocks
        self.inversion_registry = registry
        self.out_shape = out_shape
        self.s = formula.gate_count

    @property
    def n_N(self):
        return len(self.N)

    def locate_input(self, leaf_id):
        """(row offset, col offset, shape) of the leaf's block inside N."""
        try:
            r, c, shape, _name = self.leaf_blocks[leaf_id]
        except KeyError:
            raise UnknownLeaf(leaf_id) from None
        return r, c, shape

    def leaves_of(self, name):
        return [lid for lid, (_r, _c, _s, nm) in sorted(self.leaf_blocks.items()) if nm == name]

    def entry_update_vectors(self, leaf_id, i, j, delta):
        """Rank-1 vectors (u, v) with N + u v^T realizing input[i][j] += delta."""
        r, c, (rows, cols) = self.locate_input(leaf_id)
        if not (0 <= i < rows and 0 <= j < cols):
            raise IndexError(f"entry ({i},{j}) outside {rows}x{cols} leaf {leaf_id}")
        ring = self.ring
        if not isinstance(delta, type(ring.zero())):
            delta = ring.from_fraction(Fraction(delta))
        u = [ring.zero()] * self.n_N
        v = [ring.zero()] * self.n_N
        u[r + i] = delta
        v[c + j] = ring.one()
        return u, v

    def apply_entry_update(self, leaf_id, i, j, delta):
        """Mutate N itself (callers tracking the true matrix)."""
        r, c, _shape = self.locate_input(leaf_id)
        ring = self.ring
        if not isinstance(delta, type(ring.zero())):
            delta = ring.from_fraction(Fraction(delta))
        self.N[r + i][c + j] = ring.add(self.N[r + i][c + j], delta)

    def to_json(self):
        """Serializable document with exact entries, for golden-file tests."""
        ring = self.ring
        return json.dumps({
            "n": self.n_N,
            "s": self.s,
            "I": list(self.I),
            "J": list(self.J),
            "N": [[str(ring.to_fraction(e)) for e in row] for row in self.N],
            "leaf_blocks": {
                str(lid): {"row": r, "col": c, "shape": list(shape), "name": name}
                for lid, (r, c, shape, name) in sorted(self.leaf_blocks.items())
            },
        }, indent=None, separators=(",", ":"))


def build(formula, inputs, ring=None):
    """Compile formula into a Construction over the given ring.

    inputs maps each input name to its matrix (entries may be ints,
    Fractions, or ring scalars).
    """
    ring = ring or RationalRing()
    out_shape = check_dims(formula)
    mats = {name: _dense.from_values(ring, m) for name, m in inputs.items()}
    for name, (r, c) in formula.dims.items():
        m = mats.get(name)
        if m is None:
            raise KeyError(f"no input matrix for {name}")
        if len(m) != r or len(m[0]) != c:
            raise ValueError(f"input {name} is {len(m)}x{len(m[0])}, declared {r}x{c}")
    one = ring.one()
    neg_one = ring.neg(one)
    counter = [0]

    def leaf_id():
        counter[0] += 1
        return counter[0] - 1

    def walk(gate):
        if isinstance(gate, Input):
            a = mats[gate.name]
            n_i, m_i = len(a), len(a[0])
            total = n_i + m_i
            rows = _dense.zeros(ring, total, total)
            for r in range(n_i):
                rows[r][r] = one
                rows[r][n_i:] = [e for e in a[r]]
            for r in range(m_i):
                rows[n_i + r][n_i + r] = neg_one
            blocks = {leaf_id(): (0, n_i, (n_i, m_i), gate.name)}
            return _Block(total, rows, list(range(n_i)), list(range(n_i, total)), blocks, [])

        if isinstance(gate, Inv):
            child = walk(gate.child)
            n_w = len(child.i_set)
            total = child.n + n_w
            rows = _embed(ring, child, total, 0)
            for t in range(n_w):
                rows[child.j_set[t]][child.n + t] = neg_one
                rows[child.n + t][child.i_set[t]] = one
            window = list(range(child.n, total))
            registry = child.registry + [
                InversionRecord(0, child.n, list(child.i_set), list(child.j_set), n_w)]
            return _Block(total, rows, window, list(window), child.leaf_blocks, registry)

        left = walk(gate.left)
        if isinstance(gate, Mul):
            right = walk(gate.right)
            n_l = left.n
            total = n_l + right.n
            rows = _embed(ring, left, total, 0)
            r_rows = _embed(ring, right, total, n_l)
            for r in range(n_l, total):
                rows[r] = r_rows[r]
            for t in range(len(left.j_set)):
                rows[left.j_set[t]][n_l + right.i_set[t]] = neg_one
            blocks = dict(left.leaf_blocks)
            for lid, (r, c, shape, name) in right.leaf_blocks.items():
                blocks[lid] = (r + n_l, c + n_l, shape, name)
            registry = left.registry + [rec.shifted(n_l) for rec in right.registry]
            return _Block(total, rows, list(left.i_set),
                          [n_l + j for j in right.j_set], blocks, registry)

        # addition / subtraction: row blocks (nL, nR, n_w, m_w),
        # column blocks (nL, nR, m_w, n_w)
        right = walk(gate.right)
        sign = one if isinstance(gate, Add) else neg_one
        n_l, n_r = left.n, right.n
        n_w, m_w = len(left.i_set), len(left.j_set)
        total = n_l + n_r + n_w + m_w
        rows = _embed(ring, left, total, 0)
        r_rows = _embed(ring, right, total, n_l)
        for r in range(n_l, n_l + n_r):
            rows[r] = r_rows[r]
        c2 = n_l + n_r          # selector column block, width m_w
        c3 = n_l + n_r + m_w    # identity column block, width n_w
        r2 = n_l + n_r          # selector row block, height n_w
        r3 = n_l + n_r + n_w    # identity row block, height m_w
        for t in range(m_w):
            rows[left.j_set[t]][c2 + t] = one
            rows[n_l + right.j_set[t]][c2 + t] = sign
            rows[r3 + t][c2 + t] = one
        for t in range(n_w):
            rows[r2 + t][left.i_set[t]] = one
            rows[r2 + t][n_l + right.i_set[t]] = one
            rows[r2 + t][c3 + t] = one
        blocks = dict(left.leaf_blocks)
        for lid, (r, c, shape, name) in right.leaf_blocks.items():
            blocks[lid] = (r + n_l, c + n_l, shape, name)
        registry = left.registry + [rec.shifted(n_l) for rec in right.registry]
        i_set = [n_l + n_r + m_w + t for t in range(n_w)]
        j_set = [n_l + n_r + n_w + t for t in range(m_w)]
        return _Block(total, rows, i_set, j_set, blocks, registry)

    block = walk(formula.root)
    return Construction(formula, ring, block.rows, block.i_set, block.j_set,
                        block.leaf_blocks, block.registry, out_shape)


class HatConstruction:
    """N-hat = [[N, -I_{,J}], [I_{I,}, 0]]; det(N-hat) = det(N) * det(f)."""

    def __init__(self, cons):
        if len(cons.I) != len(cons.J):
            raise NonSquareOutput(
                f"formula output is {len(cons.I)}x{len(cons.J)}; determinant undefined")
        self.cons = cons
        ring = cons.ring
        n = cons.n_N
        k = len(cons.I)
        total = n + k
        rows = _dense.zeros(ring, total, total)
        for r in range(n):
            rows[r][:n] = [e for e in cons.N[r]]
        one = ring.one()
        for t in range(k):
            rows[cons.J[t]][n + t] = ring.neg(one)
            rows[n + t][cons.I[t]] = one
        self.Nhat = rows

    @property
    def side(self):
        return len(self.Nhat)

    def pad_vectors(self, u, v):
        """Lift rank-1 update vectors on N to N-hat (zero rows appended)."""
        ring = self.cons.ring
        extra = [ring.zero()] * (self.side - len(u))
        return u + extra, v + extra

    def apply_entry_update(self, leaf_id, i, j, delta):
        r, c, _shape = self.cons.locate_input(leaf_id)
        ring = self.cons.ring
        if not isinstance(delta, type(ring.zero())):
            delta = ring.from_fraction(Fraction(delta))
        self.Nhat[r + i][c + j] = ring.add(self.Nhat[r + i][c + j], delta)


def build_hat(cons):
    return HatConstruction(cons)


@dataclass
class NormBudget:
    """All five bounds from the norm lemma, exact rationals.

    The lemma statement and its induction table disagree on whether |N|_F is
    bounded by kappa^s or by the 2*s*kappa-style additive growth; both are
    recorded and callers test the max.
    """
    kappa: Fraction
    s: int
    bound_N_pow: Fraction     # kappa^s
    bound_N_lin: Fraction     # 2*s*kappa
    bound_Ninv: Fraction      # (10*kappa)^(2s+1)
    bound_rowblock: Fraction  # (5*kappa)^s, for (N^-1)_{I,} and (N^-1)_{,J}
    bound_IJ: Fraction        # kappa^s


def norm_budget(s, kappa):
    kappa = Fraction(kappa)
    if s < 1:
        raise ValueError("gate count must be at least 1")
    if kappa < 2:
        raise ValueError("kappa must be at least 2")
    return NormBudget(
        kappa=kappa,
        s=s,
        bound_N_pow=kappa ** s,
        bound_N_lin=2 * s * kappa,
        bound_Ninv=(10 * kappa) ** (2 * s + 1),
        bound_rowblock=(5 * kappa) ** s,
        bound_IJ=kappa ** s,
    )
