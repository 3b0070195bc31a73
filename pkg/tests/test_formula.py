import random

import pytest

from formulads import (Add, DimensionMismatch, FormulaSyntaxError, Input, Inv,
                       Mul, NonSquareInversion, UndeclaredInput, as_formula,
                       check_dims, children, enumerate_leaves, parse, pretty,
                       random_formula)


def test_parse_basic():
    f = parse("A:2x3; B:3x2; C:2x2; inv(A*B + C)")
    assert isinstance(f.root, Inv)
    assert f.dims == {"A": (2, 3), "B": (3, 2), "C": (2, 2)}
    assert check_dims(f) == (2, 2)


def test_parse_precedence_mul_over_add():
    f = parse("A:1x1; B:1x1; C:1x1; A + B*C")
    assert isinstance(f.root, Add)
    assert isinstance(f.root.right, Mul)


def test_parse_left_associative_sub():
    f = parse("A:1x1; B:1x1; C:1x1; A - B - C")
    # (A - B) - C, not A - (B - C)
    assert isinstance(f.root.left.left, Input) and f.root.left.left.name == "A"
    assert f.root.right.name == "C"


def test_gate_count():
    f = parse("A:2x2; B:2x2; inv(A)*B + A")
    # gates: A, inv, B, *, A, + = 6
    assert f.gate_count == 6


def test_parse_errors():
    with pytest.raises(FormulaSyntaxError):
        parse("A:2x2; A +")
    with pytest.raises(FormulaSyntaxError):
        parse("A:2x2; (A")
    with pytest.raises(UndeclaredInput):
        parse("A:2x2; A * B")
    with pytest.raises(FormulaSyntaxError):
        parse("A:2x2")  # no expression


def test_dim_errors():
    # parsing is shape-agnostic; check_dims enforces gate compatibility
    with pytest.raises(DimensionMismatch):
        check_dims(parse("A:2x3; B:2x3; A * B"))
    with pytest.raises(DimensionMismatch):
        check_dims(parse("A:2x3; B:3x2; A + B"))
    with pytest.raises(NonSquareInversion):
        check_dims(parse("A:2x3; inv(A)"))


def test_pretty_round_trip_fixed():
    src = "A:2x3; B:3x2; C:2x2; inv(A * B + C) - C"
    f = parse(src)
    assert parse(pretty(f)).root == f.root


def test_pretty_round_trip_random():
    """parse(pretty(f)) reproduces the tree exactly, 300 random formulas."""
    rng = random.Random(7)
    for _ in range(300):
        f = random_formula(rng, s_max=8, dim_max=5)
        g = parse(pretty(f))
        assert g.root == f.root
        assert g.dims == f.dims


def test_enumerate_leaves_left_to_right():
    f = parse("A:1x1; B:1x1; (A + B) * inv(B)")
    got = enumerate_leaves(f)
    assert [(lid, name) for lid, name, _ in got] == [(0, "A"), (1, "B"), (2, "B")]
    assert all(shape == (1, 1) for _, _, shape in got)


def test_check_dims_annotates_gates():
    f = parse("A:3x1; B:1x3; A * B")
    assert check_dims(f) == (3, 3)
    assert f.gate_shapes[id(f.root)] == (3, 3)
    assert f.gate_shapes[id(f.root.left)] == (3, 1)


def test_random_formula_respects_bounds():
    rng = random.Random(3)
    for _ in range(200):
        f = random_formula(rng, s_max=6, dim_max=4)
        assert f.gate_count <= 6
        assert all(r <= 4 and c <= 4 for r, c in f.dims.values())


def test_random_formula_square_output():
    rng = random.Random(4)
    for _ in range(100):
        f = random_formula(rng, s_max=5, dim_max=4, square_output=True)
        r, c = check_dims(f)
        assert r == c


def test_random_formula_never_stacks_inversions():
    rng = random.Random(5)
    for _ in range(300):
        f = random_formula(rng, s_max=8, dim_max=3)
        stack = [f.root]
        while stack:
            g = stack.pop()
            if isinstance(g, Inv):
                assert not isinstance(g.child, Inv)
            stack.extend(children(g))


def test_as_formula_accepts_bare_expression():
    inputs = {"A": [[1, 2], [3, 4]], "B": [[0, 1], [1, 0]]}
    f = as_formula("A * B", inputs)
    assert f.dims == {"A": (2, 2), "B": (2, 2)}
    assert pretty(f).endswith("A * B")


def test_as_formula_passes_through_formula():
    f = parse("A:1x1; inv(A)")
    assert as_formula(f, {}) is f


def test_as_formula_full_source_ignores_inputs():
    f = as_formula("A:2x2; inv(A)", {})
    assert check_dims(f) == (2, 2)
