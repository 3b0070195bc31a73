import random
from fractions import Fraction

import pytest

from formulads import (Graph, SingularInversion, TooLarge, det_bareiss,
                       det_cofactor, det_perturbation_bounds, eval_exact,
                       inv_exact, max_matching_bruteforce, parse,
                       rank_elimination_mod_p)
from helpers import frac_mat, invertible_frac


def test_eval_exact_frozen():
    f = parse("A:1x1; B:1x1; C:1x1; (A+B)*C")
    assert eval_exact(f, {"A": [[1]], "B": [[2]], "C": [[3]]}) == [[9]]
    g = parse("A:1x1; inv(A)")
    assert eval_exact(g, {"A": [[2]]}) == [[Fraction(1, 2)]]
    with pytest.raises(SingularInversion):
        eval_exact(g, {"A": [[0]]})


def test_singular_inversion_reports_gate_path():
    f = parse("A:2x2; B:2x2; A * inv(B)")
    with pytest.raises(SingularInversion) as exc:
        eval_exact(f, {"A": [[1, 0], [0, 1]], "B": [[1, 1], [1, 1]]})
    assert "right" in str(exc.value)


def test_det_bareiss_frozen():
    assert det_bareiss([[1, 2], [3, 4]]) == -2
    assert det_bareiss([[2, 0, 0], [0, 3, 0], [0, 0, 4]]) == 24
    assert det_bareiss([[1, 1], [1, 1]]) == 0


def test_det_bareiss_matches_cofactor():
    rng = random.Random(11)
    for _ in range(100):
        n = rng.randint(1, 5)
        a = frac_mat(rng, n, n)
        assert det_bareiss(a) == det_cofactor(a)


def test_det_bareiss_rational_entries():
    a = [[Fraction(1, 2), Fraction(1, 3)], [Fraction(1, 4), Fraction(1, 5)]]
    assert det_bareiss(a) == Fraction(1, 10) - Fraction(1, 12)


def test_inv_exact_round_trip():
    rng = random.Random(12)
    for _ in range(50):
        n = rng.randint(1, 5)
        a = invertible_frac(rng, n)
        inv = inv_exact(a)
        for i in range(n):
            for j in range(n):
                s = sum(a[i][k] * inv[k][j] for k in range(n))
                assert s == (1 if i == j else 0)


def test_rank_elimination_frozen():
    assert rank_elimination_mod_p([[1, 0, 0], [0, 1, 0], [0, 0, 1]], 7) == 3
    assert rank_elimination_mod_p([[0, 0], [0, 0]], 7) == 0
    assert rank_elimination_mod_p([[1, 2], [2, 4]], 7) == 1


def test_rank_elimination_mod_small_prime():
    # rank can drop mod p even when the integer matrix is invertible
    assert rank_elimination_mod_p([[1, 1], [1, 8]], 7) == 1
    assert rank_elimination_mod_p([[1, 1], [1, 8]], 11) == 2


def test_matching_bruteforce_frozen():
    g = Graph(3)
    g.insert(0, 1), g.insert(1, 2), g.insert(0, 2)
    assert max_matching_bruteforce(g) == 1
    h = Graph(4)
    for u, v in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        h.insert(u, v)
    assert max_matching_bruteforce(h) == 2


def test_matching_respects_off_and_merge():
    g = Graph(4)
    for u, v in [(0, 1), (2, 3)]:
        g.insert(u, v)
    assert max_matching_bruteforce(g) == 2
    g.vertex_off(3)
    assert max_matching_bruteforce(g) == 1
    g.vertex_on(3)
    g.merge(0, 2)   # edge (2,3) re-routes to (0,3); both edges now share 0
    assert max_matching_bruteforce(g) == 1


def test_matching_too_large():
    with pytest.raises(TooLarge):
        max_matching_bruteforce(Graph(13))


def test_perturbation_bounds_contain_abs_det():
    """|det(A + eps_hat X)| lands inside the interval, sign is preserved."""
    rng = random.Random(13)
    for _ in range(100):
        a = invertible_frac(rng, 4)
        x = frac_mat(rng, 4, 4)
        eps = Fraction(rng.randint(1, 100), 1000)
        lower, upper, epshat = det_perturbation_bounds(a, x, eps)
        eh = Fraction(epshat)
        perturbed = [[a[i][j] + eh * x[i][j] for j in range(4)] for i in range(4)]
        d = det_bareiss(perturbed)
        assert lower <= abs(d) <= upper
        assert (d > 0) == (det_bareiss(a) > 0)


def test_perturbation_bounds_zero_x():
    a = [[2, 0], [0, 3]]
    lower, upper, epshat = det_perturbation_bounds(a, [[0, 0], [0, 0]], Fraction(1, 2))
    assert epshat == 0
    assert lower <= 6 <= upper
