"""Matrix-formula expression trees, the text parser, and dimension checking.

Grammar (whitespace-insensitive):

    program := decl* expr
    decl    := IDENT ':' INT 'x' INT ';'
    expr    := term (('+'|'-') term)*
    term    := factor ('*' factor)*
    factor  := IDENT | 'inv' '(' expr ')' | '(' expr ')'

Names are [A-Za-z][A-Za-z0-9_]*.  Formulas are trees: a named input may label
several distinct leaves, but no gate object may have two parents.
"""

import re
from dataclasses import dataclass

from .errors import (DimensionMismatch, FormulaSyntaxError, NonSquareInversion,
                     UndeclaredInput)


@dataclass(frozen=True)
class Input:
    name: str


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Inv:
    child: object


def children(gate):
    if isinstance(gate, Input):
        return ()
    if isinstance(gate, Inv):
        return (gate.child,)
    return (gate.left, gate.right)


class Formula:
    """A dimension-declared formula tree.

    dims maps every input name to its (rows, cols).  Gate count s counts
    leaves plus internal nodes.
    """

    def __init__(self, root, dims):
        self.root = root
        self.dims = dict(dims)
        seen = set()
        names = []
        count = 0
        stack = [root]
        while stack:
            gate = stack.pop()
            if id(gate) in seen:
                raise ValueError("formula must be a tree; a gate occurs twice")
            seen.add(id(gate))
            count += 1
            if isinstance(gate, Input):
                names.append(gate.name)
            else:
                stack.extend(children(gate))
        for name in names:
            if name not in self.dims:
                raise UndeclaredInput(name)
        for name, (r, c) in self.dims.items():
            if r <= 0 or c <= 0:
                raise ValueError(f"input {name} has zero-dimensional shape {r}x{c}")
        self.gate_count = count
        self.leaf_count = len(names)
        self.gate_shapes = None  # filled by check_dims

    def __repr__(self):
        return f"Formula({pretty(self)!r})"


_TOKEN = re.compile(r"\s*(?:([A-Za-z][A-Za-z0-9_]*)|(\d+)|([:;+\-*()])|(\S))")


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        name, number, sym, bad = m.groups()
        start = m.start(1) if name else m.start(2) if number else m.start(3) if sym else m.start(4)
        if bad is not None:
            raise FormulaSyntaxError(f"unexpected character {bad!r}", start)
        if name is not None:
            tokens.append(("name", name, start))
        elif number is not None:
            tokens.append(("int", int(number), start))
        else:
            tokens.append((sym, sym, start))
        pos = m.end()
    tokens.append(("eof", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def program(self):
        dims = {}
        # a declaration is IDENT ':' ...; an expression can also start with
        # IDENT, so look one token ahead
        while self.peek()[0] == "name" and self.tokens[self.pos + 1][0] == ":":
            name = self.next()[1]
            self.expect(":")
            rows = self.expect("int")[1]
            cols = self._dim_cols()
            self.expect(";")
            if rows <= 0 or cols <= 0:
                raise FormulaSyntaxError(f"input {name} declared with a zero dimension",
                                         self.peek()[2])
            dims[name] = (rows, cols)
        root = self.expr(dims)
        self.expect("eof")
        return Formula(root, dims)

    def _dim_cols(self):
        # the separator in "2x3" lexes as the identifier "x3"; "2 x 3" as "x"
        tok = self.next()
        if tok[0] == "name" and tok[1] == "x":
            return self.expect("int")[1]
        if tok[0] == "name" and tok[1][0] == "x" and tok[1][1:].isdigit():
            return int(tok[1][1:])
        raise FormulaSyntaxError("expected 'x' between dimensions", tok[2])

    def expr(self, dims):
        node = self.term(dims)
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            rhs = self.term(dims)
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self, dims):
        node = self.factor(dims)
        while self.peek()[0] == "*":
            self.next()
            node = Mul(node, self.factor(dims))
        return node

    def factor(self, dims):
        tok = self.next()
        if tok[0] == "(":
            node = self.expr(dims)
            self.expect(")")
            return node
        if tok[0] == "name":
            if tok[1] == "inv" and self.peek()[0] == "(":
                self.next()
                node = self.expr(dims)
                self.expect(")")
                return Inv(node)
            if tok[1] not in dims:
                raise UndeclaredInput(tok[1])
            return Input(tok[1])
        raise FormulaSyntaxError(f"expected a factor, found {tok[1]!r}", tok[2])


def parse(text):
    """Parse formula source into a Formula.  All used names must be declared."""
    return _Parser(text).program()


def as_formula(f, inputs):
    """Coerce a Formula, full source, or bare expression into a Formula.

    A bare expression gets its declarations synthesized from the shapes of
    the matrices in `inputs`.
    """
    if isinstance(f, Formula):
        return f
    if not isinstance(f, str):
        raise TypeError("expected a Formula or source text")
    try:
        return parse(f)
    except UndeclaredInput:
        decls = "".join(f"{name}:{len(m)}x{len(m[0])}; "
                        for name, m in sorted(inputs.items()))
        return parse(decls + f)


def _pretty_expr(gate, level):
    # level 0: inside +/- ; level 1: inside * ; parenthesize lower precedence
    if isinstance(gate, Input):
        return gate.name
    if isinstance(gate, Inv):
        return f"inv({_pretty_expr(gate.child, 0)})"
    if isinstance(gate, Mul):
        lhs = _pretty_expr(gate.left, 1)
        if isinstance(gate.left, (Add, Sub)):
            lhs = f"({lhs})"
        rhs = _pretty_expr(gate.right, 1)
        if isinstance(gate.right, (Add, Sub, Mul)):
            rhs = f"({rhs})"
        return f"{lhs} * {rhs}"
    op = "+" if isinstance(gate, Add) else "-"
    lhs = _pretty_expr(gate.left, 0)
    rhs = _pretty_expr(gate.right, 0)
    if isinstance(gate.right, (Add, Sub)):
        rhs = f"({rhs})"
    return f"{lhs} {op} {rhs}"


def pretty(formula):
    """Canonical source text; parse(pretty(f)) reproduces the tree."""
    decls = "".join(f"{name}:{r}x{c}; " for name, (r, c) in sorted(formula.dims.items()))
    return decls + _pretty_expr(formula.root, 0)


def check_dims(formula, dims=None):
    """Return the output shape and annotate every gate with its shape.

    dims defaults to the formula's own declaration table.  The annotation is
    stored as formula.gate_shapes, a map id(gate) -> (rows, cols).
    """
    table = formula.dims if dims is None else dict(dims)
    shapes = {}

    def walk(gate, path):
        if isinstance(gate, Input):
            if gate.name not in table:
                raise UndeclaredInput(gate.name)
            shape = table[gate.name]
        elif isinstance(gate, Inv):
            shape = walk(gate.child, path + ".child")
            if shape[0] != shape[1]:
                raise NonSquareInversion(path, shape)
        elif isinstance(gate, Mul):
            ls = walk(gate.left, path + ".left")
            rs = walk(gate.right, path + ".right")
            if ls[1] != rs[0]:
                raise DimensionMismatch(path, f"cannot multiply {ls[0]}x{ls[1]} by {rs[0]}x{rs[1]}")
            shape = (ls[0], rs[1])
        else:
            ls = walk(gate.left, path + ".left")
            rs = walk(gate.right, path + ".right")
            if ls != rs:
                word = "add" if isinstance(gate, Add) else "subtract"
                raise DimensionMismatch(path, f"cannot {word} {ls[0]}x{ls[1]} and {rs[0]}x{rs[1]}")
            shape = ls
        shapes[id(gate)] = shape
        return shape

    out = walk(formula.root, "root")
    formula.gate_shapes = shapes
    return out


def enumerate_leaves(formula):
    """Leaves in left-to-right order as (leaf_id, name, shape) triples."""
    out = []

    def walk(gate):
        if isinstance(gate, Input):
            out.append((len(out), gate.name, formula.dims[gate.name]))
        elif isinstance(gate, Inv):
            walk(gate.child)
        else:
            walk(gate.left)
            walk(gate.right)

    walk(formula.root)
    return out


_NAMES = [chr(ord("A") + i) for i in range(26)]


def random_formula(rng, s_max, dim_max, square_output=False):
    """Generate a random dimension-checked Formula with at most s_max gates.

    Never places Inv directly above Inv (double inversion is pointless), and
    reuses an existing input name of the right shape with small probability.
    """
    if s_max < 1:
        raise ValueError("s_max must be at least 1")
    dims = {}
    by_shape = {}

    def fresh_leaf(shape):
        if shape in by_shape and rng.random() < 0.2:
            name = rng.choice(by_shape[shape])
        else:
            free = [nm for nm in _NAMES if nm not in dims]
            if not free:
                name = rng.choice(by_shape[shape]) if shape in by_shape else None
                if name is None:
                    raise RuntimeError("name pool exhausted")
            else:
                name = rng.choice(free)
                dims[name] = shape
                by_shape.setdefault(shape, []).append(name)
        return Input(name)

    def gen(budget, shape, under_inv):
        if budget <= 1:
            return fresh_leaf(shape)
        choices = ["add", "sub", "mul"]
        if shape[0] == shape[1] and not under_inv and budget >= 2:
            choices += ["inv", "inv"]
        if budget < 3:
            choices = ["inv"] if ("inv" in choices and rng.random() < 0.5) else []
        if not choices:
            return fresh_leaf(shape)
        kind = rng.choice(choices)
        if kind == "inv":
            return Inv(gen(budget - 1, shape, True))
        lb = rng.randint(1, budget - 2)
        rb = budget - 1 - lb
        if kind == "mul":
            k = rng.randint(1, dim_max)
            return Mul(gen(lb, (shape[0], k), False), gen(rb, (k, shape[1]), False))
        l = gen(lb, shape, False)
        r = gen(rb, shape, False)
        return Add(l, r) if kind == "add" else Sub(l, r)

    n_out = rng.randint(1, dim_max)
    m_out = n_out if square_output else rng.randint(1, dim_max)
    root = gen(rng.randint(1, s_max), (n_out, m_out), False)
    f = Formula(root, dims)
    check_dims(f)
    return f
