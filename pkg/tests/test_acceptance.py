"""End-to-end acceptance checks, one test per shipped guarantee.

Every test prints a single PASS/FAIL summary line (run pytest with -s to see
them); corpus sizes, seeds, and tolerances are pinned, and all references are
exact oracles.  Criteria with runtime budgets assert the elapsed time too.
"""

import math
import random
import time
from fractions import Fraction

from formulads import (DEFAULT_PRIME, FixedPointRing, Float64Ring,
                       SignedLogDet, SingularMatrix, SingularUpdate,
                       build_hat, certified_bits, det_bareiss,
                       det_perturbation_bounds, det_tracker_init,
                       det_tracker_revert, det_tracker_update, eval_exact,
                       inv_exact, norm_budget, parse, rank_elimination_mod_p,
                       rank_tracker_init, rank_tracker_update)
from formulads.cli import (ScenarioConfig, _engine_entry_update, bits_sweep,
                           make_engine, run_scenario)
from helpers import ExactMirror, build_exact, int_mat, invertible_frac, random_instance

CORPUS_SEED = 20260815
_corpus_cache = None


def corpus():
    """200 random formulas (size <= 6, dims <= 4) with exact reductions."""
    global _corpus_cache
    if _corpus_cache is None:
        rng = random.Random(CORPUS_SEED)
        items = []
        for _ in range(200):
            f, inputs, value = random_instance(rng, s_max=6, dim_max=4)
            cons = build_exact(f, inputs)
            items.append((f, inputs, value, cons, inv_exact(cons.N)))
        _corpus_cache = items
    return _corpus_cache


def frob2(mat):
    return sum(Fraction(x) * Fraction(x) for row in mat for x in row)


def sqrt_ub(q):
    """A rational u with u*u >= q, tight to 1/denominator."""
    q = Fraction(q)
    return Fraction(math.isqrt(q.numerator * q.denominator) + 1, q.denominator)


def inversion_argument(cons, rec):
    """The matrix fed into one inversion gate, recovered from its N window."""
    block = [row[rec.offset:rec.offset + rec.side]
             for row in cons.N[rec.offset:rec.offset + rec.side]]
    binv = inv_exact(block)
    return [[binv[i][j] for j in rec.j_rel] for i in rec.i_rel]


def report(label, ok, detail):
    print(f"acceptance {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_01_reduction_exactness():
    t0 = time.monotonic()
    bad = 0
    for _f, _inputs, value, cons, ninv in corpus():
        got = [[ninv[i][j] for j in cons.J] for i in cons.I]
        if got != value:
            bad += 1
    dt = time.monotonic() - t0
    report("01 reduction exactness", bad == 0 and dt <= 60.0,
           f"200 formulas, {bad} mismatches, {dt:.1f}s")


def test_02_determinant_ratio_identity():
    checked = bad = 0
    for _f, _inputs, value, cons, _ninv in corpus():
        if len(cons.I) != len(cons.J) or det_bareiss(value) == 0:
            continue
        checked += 1
        det_n = det_bareiss(cons.N)
        if det_bareiss(build_hat(cons).Nhat) != det_n * det_bareiss(value):
            bad += 1
        prod = Fraction(1)
        for rec in cons.inversion_registry:
            prod *= abs(det_bareiss(inversion_argument(cons, rec)))
        if abs(det_n) != prod:
            bad += 1
    report("02 determinant ratio identity", checked >= 20 and bad == 0,
           f"{checked} square invertible instances, {bad} failures")


def test_03_norm_bounds():
    violations = 0
    for _f, _inputs, _value, cons, ninv in corpus():
        mats = [[[cons.N[r + i][c + j] for j in range(w)] for i in range(h)]
                for r, c, (h, w), _name in cons.leaf_blocks.values()]
        mats += [inv_exact(inversion_argument(cons, rec))
                 for rec in cons.inversion_registry]
        kappa = max(sqrt_ub(max(frob2(m) for m in mats)), Fraction(2))
        nb = norm_budget(cons.s, kappa)
        if frob2(cons.N) > max(nb.bound_N_pow, nb.bound_N_lin) ** 2:
            violations += 1
        if frob2(ninv) > nb.bound_Ninv ** 2:
            violations += 1
        rows = [ninv[i] for i in cons.I]
        cols = [[ninv[i][j] for j in cons.J] for i in range(cons.n_N)]
        if frob2(rows) > nb.bound_rowblock ** 2 or frob2(cols) > nb.bound_rowblock ** 2:
            violations += 1
    report("03 norm bounds", violations == 0,
           f"200 instances, {violations} violations")


def test_04_dynamic_inverse_accuracy():
    t0 = time.monotonic()
    n, t, eps = 16, 16, 1e-6
    worst = 0.0
    for seed in range(50):
        rng = random.Random(1000 + seed)
        a = invertible_frac(rng, n)
        mirror = ExactMirror(a)
        steps = []
        for _ in range(t):
            while True:
                i, j = rng.randrange(n), rng.randrange(n)
                delta = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]))
                if abs(mirror.entry_den(i, j, delta)) >= Fraction(1, 64):
                    break
            mirror.entry_update(i, j, delta)
            queries = [(rng.randrange(n), rng.randrange(n)) for _ in range(12)]
            truth = [mirror.inv[qa][qb] for qa, qb in queries]
            steps.append((i, j, delta, queries, truth))
        for ring in (Float64Ring(), FixedPointRing(96)):
            z = [[ring.from_fraction(x) for x in row] for row in a]
            for name in ("explicit", "lazy", "twolevel"):
                eng = make_engine(name, [row[:] for row in z], ring,
                                  eps_step=eps / (2 * t))
                for i, j, delta, queries, truth in steps:
                    _engine_entry_update(eng, ring, n, i, j,
                                         ring.from_fraction(delta))
                    for (qa, qb), want in zip(queries, truth):
                        err = abs(ring.to_fraction(eng.query_entry(qa, qb)) - want)
                        worst = max(worst, float(err))
    dt = time.monotonic() - t0
    report("04 dynamic inverse accuracy", worst <= eps and dt <= 120.0,
           f"50 seeds x 16 updates x 6 engine/ring pairs, "
           f"worst {worst:.2e} vs {eps:.0e}, {dt:.1f}s")


def _det_instance(rng):
    """A square formula with invertible value, exact inputs alongside."""
    n = rng.randrange(4, 17)
    if n <= 8 and rng.random() < 0.5:
        src = f"A:{n}x{n}; B:{n}x{n}; inv(A)*B + A"
    else:
        src = rng.choice([f"A:{n}x{n}; A",
                          f"A:{n}x{n}; B:{n}x{n}; A*B",
                          f"A:{n}x{n}; B:{n}x{n}; A+B"])
    f = parse(src)
    while True:
        inputs = {nm: [[Fraction(rng.randint(-3, 3)) for _ in range(n)]
                       for _ in range(n)]
                  for nm in ({"A", "B"} if "B" in src else {"A"})}
        try:
            value = eval_exact(f, inputs)
        except SingularMatrix:
            continue
        if det_bareiss(value) != 0:
            return f, inputs


def test_05_determinant_maintenance():
    t_max = 16
    worst_rel = 0.0
    sign_errors = 0
    for seed in range(50):
        rng = random.Random(900 + seed)
        ring = (Float64Ring() if seed < 25
                else FixedPointRing(certified_bits(16, t_max, 1e-3)))
        f, inputs = _det_instance(rng)
        tr = det_tracker_init(f, inputs, eps=1e-3, t_max=t_max, ring=ring)
        names = sorted(inputs)
        for _ in range(t_max):
            while True:
                name = rng.choice(names)
                m = len(inputs[name])
                i, j = rng.randrange(m), rng.randrange(m)
                delta = Fraction(rng.choice([-2, -1, 1, 2]))
                inputs[name][i][j] += delta
                try:
                    value = eval_exact(f, inputs)
                except SingularMatrix:
                    value = None
                if value is None or det_bareiss(value) == 0:
                    inputs[name][i][j] -= delta
                    continue
                done = 0
                try:
                    for lid in tr.cons.leaves_of(name):
                        det_tracker_update(tr, lid, i, j, delta)
                        done += 1
                except SingularUpdate:
                    for _k in range(done):
                        det_tracker_revert(tr)
                    inputs[name][i][j] -= delta
                    continue
                break
            got = tr.current()
            want = SignedLogDet.from_fraction(det_bareiss(value))
            if got.sign != want.sign:
                sign_errors += 1
            else:
                worst_rel = max(worst_rel,
                                abs(math.expm1(got.log_abs - want.log_abs)))
    report("05 determinant maintenance",
           sign_errors == 0 and worst_rel <= 1e-3,
           f"50 seeds x 16 rank-1 updates, {sign_errors} sign errors, "
           f"worst relative error {worst_rel:.2e} vs 1e-03")


def test_06_perturbation_bounds():
    rng = random.Random(606)
    bad = 0
    for _ in range(500):
        a = invertible_frac(rng, 4, lo=-4, hi=4)
        while True:
            x = [[Fraction(v) for v in row] for row in int_mat(rng, 4, 4, -4, 4)]
            if any(v for row in x for v in row):
                break
        eps = Fraction(1, rng.randrange(2, 64))
        lower, upper, epshat = det_perturbation_bounds(a, x, eps)
        shifted = [[a[i][j] + epshat * x[i][j] for j in range(4)] for i in range(4)]
        d = det_bareiss(shifted)
        same_sign = (d > 0) == (det_bareiss(a) > 0) and d != 0
        if not (lower <= abs(d) <= upper and same_sign):
            bad += 1
    report("06 perturbation bounds", bad == 0, f"500 instances, {bad} failures")


def test_07_inverse_perturbation_bound():
    rng = random.Random(707)
    bad = 0
    for _ in range(500):
        f, inputs, _value = random_instance(rng, s_max=4, dim_max=3)
        cons = build_exact(f, inputs)
        ninv = inv_exact(cons.N)
        kappa = sqrt_ub(max(frob2(cons.N), frob2(ninv)))
        kceil = -(-kappa.numerator // kappa.denominator)
        eps = Fraction(1, 2 * kceil * rng.randrange(1, 5))
        r, c = rng.randrange(cons.n_N), rng.randrange(cons.n_N)
        shifted = [row[:] for row in cons.N]
        shifted[r][c] += rng.choice([-1, 1]) * eps
        diff2 = frob2([[x - y for x, y in zip(ra, rb)]
                       for ra, rb in zip(inv_exact(shifted), ninv)])
        if diff2 > 4 * kappa ** 4 * eps ** 2:
            bad += 1
    report("07 inverse perturbation bound", bad == 0,
           f"500 instances, |E|_F <= 1/(2*kappa), {bad} failures")


def test_08_rank_maintenance():
    p = DEFAULT_PRIME
    bad = jumps = 0
    for seed in range(100):
        rng = random.Random(800 + seed)
        n = rng.randrange(2, 9)
        a = [[rng.randrange(5) for _ in range(n)] for _ in range(n)]
        f = parse(f"A:{n}x{n}; A")
        st = rank_tracker_init(f, {"A": [row[:] for row in a]}, p=p, seed=seed)
        lid = st.cons.leaves_of("A")[0]
        prev = st.rank()
        if prev != rank_elimination_mod_p(a, p):
            bad += 1
        for _ in range(50):
            i, j = rng.randrange(n), rng.randrange(n)
            val = rng.randrange(5)
            a[i][j] = val
            rank_tracker_update(st, lid, i, j, val)
            rk = st.rank()
            if rk != rank_elimination_mod_p(a, p):
                bad += 1
            if abs(rk - prev) > 1:
                jumps += 1
            prev = rk
    report("08 rank maintenance", bad == jumps == 0,
           f"100 seeds x 50 updates, {bad} mismatches, {jumps} rank jumps > 1")


def test_09_dynamic_matching():
    bad = odd = 0
    for seed in range(200):
        n = random.Random(90000 + seed).randrange(4, 11)
        rep = run_scenario(ScenarioConfig(scenario="matching", seed=seed,
                                          n=n, t=200))
        for r in rep.records:
            if r["engine_size"] != r["oracle_size"]:
                bad += 1
            if r["rank"] % 2:
                odd += 1
    report("09 dynamic matching", bad == odd == 0,
           f"200 seeds x 200 updates, {bad} size mismatches, "
           f"{odd} odd Tutte ranks")


def test_10_bit_precision_sweep():
    t0 = time.monotonic()
    rep = bits_sweep(ScenarioConfig(scenario="bits-sweep", seed=4242, n=8, t=8))
    dt = time.monotonic() - t0
    errs = rep.summary["max_errors"]
    monotone = all(errs[k + 1] <= errs[k] for k in range(len(errs) - 1))
    slope = rep.summary["slope"]
    report("10 bit precision sweep",
           monotone and slope <= -0.8 and dt <= 60.0,
           f"b={list(rep.summary['b_list'])}, slope {slope:.2f} vs -0.8, "
           f"monotone={monotone}, {dt:.1f}s")
