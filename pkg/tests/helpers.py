"""Shared test utilities: random instances and exact mirrors."""

from fractions import Fraction

from formulads import (RationalRing, SingularMatrix, build, enumerate_leaves,
                       eval_exact, inv_exact, random_formula)


def frac_mat(rng, r, c, lo=-3, hi=3):
    return [[Fraction(rng.randint(lo, hi)) for _ in range(c)] for _ in range(r)]


def int_mat(rng, r, c, lo=-3, hi=3):
    return [[rng.randint(lo, hi) for _ in range(c)] for _ in range(r)]


def invertible_frac(rng, n, lo=-3, hi=3, tries=200):
    from formulads import det_bareiss
    for _ in range(tries):
        a = frac_mat(rng, n, n, lo, hi)
        if det_bareiss(a) != 0:
            return a
    raise RuntimeError("no invertible draw")


def random_instance(rng, s_max=6, dim_max=4, square=False, tries=200):
    """A random formula plus integer inputs on which it evaluates."""
    for _ in range(tries):
        f = random_formula(rng, s_max, dim_max, square_output=square)
        inputs = {}
        for _lid, name, (r, c) in enumerate_leaves(f):
            if name not in inputs:
                inputs[name] = frac_mat(rng, r, c)
        try:
            value = eval_exact(f, inputs)
        except SingularMatrix:
            continue
        return f, inputs, value
    raise RuntimeError("no evaluable instance")


class ExactMirror:
    """Exact rational inverse maintained by Sherman-Morrison, as truth."""

    def __init__(self, z):
        self.z = [[Fraction(x) for x in row] for row in z]
        self.inv = inv_exact(self.z)

    def update(self, u, v):
        n = len(self.z)
        w = [sum(self.inv[i][k] * u[k] for k in range(n)) for i in range(n)]
        r = [sum(v[k] * self.inv[k][j] for k in range(n)) for j in range(n)]
        den = 1 + sum(v[k] * w[k] for k in range(n))
        if den == 0:
            raise ZeroDivisionError("singular exact update")
        for i in range(n):
            for j in range(n):
                self.inv[i][j] -= w[i] * r[j] / den
        for i in range(n):
            for j in range(n):
                self.z[i][j] += u[i] * v[j]

    def entry_update(self, i, j, delta):
        n = len(self.z)
        u = [Fraction(0)] * n
        v = [Fraction(0)] * n
        u[i] = Fraction(delta)
        v[j] = Fraction(1)
        self.update(u, v)

    def entry_den(self, i, j, delta):
        """Determinant ratio 1 + delta*(Z^-1)[j][i] of the candidate update."""
        return 1 + Fraction(delta) * self.inv[j][i]


def build_exact(f, inputs):
    return build(f, inputs, RationalRing())
