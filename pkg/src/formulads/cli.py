"""Experiment harness: run maintenance scenarios against exact oracles.

Five scenarios: maintain (formula value under entry updates), determinant,
rank, matching, and bits-sweep (maintain at several fixed-point widths,
reporting how the error scales with b).  Every run is driven by a single
seeded random.Random, so identical configs produce byte-identical reports
except for the timing fields.  Exit status is nonzero exactly when a
scenario's pass/fail check fails.
"""

import argparse
import csv
import json
import math
import random
import sys
import time
from dataclasses import dataclass, fields
from fractions import Fraction

from ._dense import frobenius, gauss_inverse
from .construct import build
from .dyndet import SignedLogDet, det_tracker_init, det_tracker_update
from .dyninv import LazyState, TwoLevelState, WoodburyState
from .errors import ConfigError, SingularMatrix, SingularUpdate
from .formula import (as_formula, check_dims, enumerate_leaves, pretty,
                      random_formula)
from .matching import apply_graph_update, matching_new
from .oracle import (Graph, det_bareiss, eval_exact, inv_exact,
                     max_matching_bruteforce, rank_elimination_mod_p)
from .rank import rank_tracker_init, rank_tracker_update
from .scalars import (DEFAULT_PRIME, FixedPointRing, Float64Ring,
                      RationalRing, is_probable_prime)

SCENARIOS = ("maintain", "determinant", "rank", "matching", "bits-sweep")
ENGINES = ("explicit", "lazy", "twolevel")
RINGS = ("rational", "fixed", "float64")


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int
    formula: str = None
    s_max: int = 4
    dim_max: int = 4
    n: int = 4
    t: int = 8
    ring: str = "rational"
    bits: int = 64
    eps: float = 1e-6
    p: int = DEFAULT_PRIME
    engine: str = "explicit"
    b_list: tuple = (16, 24, 32, 48, 64)
    slope_threshold: float = -0.8
    out: str = None
    emit_json: bool = False
    csv_path: str = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}; pick from {ENGINES}")
        if self.ring not in RINGS:
            raise ConfigError(f"unknown ring {self.ring!r}; pick from {RINGS}")
        for name in ("s_max", "dim_max", "n", "bits"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.t < 0:
            raise ConfigError("t must be non-negative")
        if not 0 < self.eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        if not is_probable_prime(self.p) or self.p == 2:
            raise ConfigError(f"p = {self.p} is not an odd prime")
        if self.seed is None:
            raise ConfigError("seed is required (reproducibility contract)")
        self.b_list = tuple(self.b_list)
        if any(b < 2 for b in self.b_list) or list(self.b_list) != sorted(self.b_list):
            raise ConfigError("b_list must be ascending positive bit widths")


_CONFIG_KEYS = {f.name for f in fields(ScenarioConfig)}


def load_config(path):
    """Read a JSON (or TOML, by extension) config mapping."""
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:       # stdlib from 3.11; tomli before
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        with open(path) as fh:
            data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def make_ring(cfg):
    if cfg.ring == "rational":
        return RationalRing()
    if cfg.ring == "float64":
        return Float64Ring()
    return FixedPointRing(cfg.bits)


def make_engine(name, z, ring, eps_step=None):
    if name == "explicit":
        return WoodburyState(z, ring, eps_step=eps_step)
    if name == "lazy":
        return LazyState(z, ring, eps_step=eps_step, mu=0.528, nu=0.0)
    return TwoLevelState(z, ring, eps_step=eps_step)


def _engine_entry_update(engine, ring, n, row, col, delta):
    if isinstance(engine, TwoLevelState):
        engine.update_entry(row, col, delta)
    elif isinstance(engine, LazyState):
        u = [[ring.zero()] for _ in range(n)]
        v = [[ring.zero()] for _ in range(n)]
        u[row][0] = delta
        v[col][0] = ring.one()
        engine.update_columns(u, v)
    else:
        u = [ring.zero()] * n
        v = [ring.zero()] * n
        u[row] = delta
        v[col] = ring.one()
        engine.update_rank1(u, v)


@dataclass
class Report:
    records: list
    summary: dict

    def jsonl(self):
        lines = [json.dumps(r, sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        if not self.records:
            with open(path, "w") as fh:
                fh.write("")
            return
        cols = sorted({k for r in self.records for k in r})
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            for r in self.records:
                writer.writerow({k: r.get(k, "") for k in cols})


def generate_instance(cfg, rng, square=False, want_det=False, kappa_cap=1e3):
    """Formula + integer inputs, resampled until the reduction is usable.

    Screens with the exact oracle: the formula must evaluate (no singular
    inversion), the float build must invert with a modest condition number,
    and when want_det is set the value matrix must be square invertible.
    """
    float_ring = Float64Ring()
    if cfg.formula is not None and ":" not in cfg.formula:
        raise ConfigError("explicit formula text needs declarations "
                          "(e.g. 'A:4x4; inv(A)')")
    for _ in range(300):
        if cfg.formula is not None:
            formula = as_formula(cfg.formula, {})
        else:
            formula = random_formula(rng, cfg.s_max, cfg.dim_max,
                                     square_output=square or want_det)
        check_dims(formula)
        inputs = {}
        for _lid, name, (r, c) in enumerate_leaves(formula):
            if name not in inputs:
                inputs[name] = [[Fraction(rng.randint(-3, 3)) for _ in range(c)]
                                for _ in range(r)]
        try:
            value = eval_exact(formula, inputs)
        except SingularMatrix:
            continue
        if want_det:
            if len(value) != len(value[0]) or det_bareiss(value) == 0:
                continue
        try:
            consf = build(formula, inputs, float_ring)
            invf = gauss_inverse(float_ring, consf.N)
        except SingularMatrix:
            continue
        kappa = frobenius(float_ring, consf.N) * frobenius(float_ring, invf)
        if kappa > kappa_cap:
            continue
        return formula, inputs
    raise ConfigError("could not generate a usable instance (300 attempts)")


def _draw_entry_update(rng, formula, inputs):
    names = sorted(inputs)
    name = names[rng.randrange(len(names))]
    m = inputs[name]
    i = rng.randrange(len(m))
    j = rng.randrange(len(m[0]))
    delta = 0
    while delta == 0:
        delta = rng.randint(-2, 2)
    return name, i, j, delta


_DEN_FLOOR = Fraction(1, 64)


def _screen_update(cons_exact, name, i, j, delta):
    """Exact-mirror check: every per-leaf step keeps N comfortably invertible.

    The denominator floor keeps the accepted stream identical across rings;
    even a 16-bit fixed-point engine accepts every pivot the screen passed.
    """
    n_mat = [row[:] for row in cons_exact.N]
    inv = inv_exact(n_mat)
    for lid in cons_exact.leaves_of(name):
        r0, c0, _shape = cons_exact.locate_input(lid)
        den = 1 + delta * inv[c0 + j][r0 + i]
        if abs(den) < _DEN_FLOOR:
            return False
        n_mat[r0 + i][c0 + j] += delta
        inv = inv_exact(n_mat)
    return True


def run_maintain(cfg):
    rng = random.Random(cfg.seed)
    ring = make_ring(cfg)
    formula, inputs = generate_instance(cfg, rng)
    cons = build(formula, inputs, ring)
    cons_exact = build(formula, inputs, RationalRing())
    # per-step budget mirrors the determinant tracker's split of eps over t
    eps_step = 0.0 if ring.exact else cfg.eps / (2 * max(cfg.t, 1))
    engine = make_engine(cfg.engine, cons.N, ring, eps_step=eps_step)
    nN = cons.n_N
    records = []
    max_err = 0.0
    t_total = 0.0
    for step in range(cfg.t):
        # draw an invertibility-preserving update (exact mirror screening)
        for _ in range(200):
            name, i, j, delta = _draw_entry_update(rng, formula, inputs)
            if _screen_update(cons_exact, name, i, j, delta):
                break
        else:
            raise ConfigError("update stream stalled; instance too fragile")
        t0 = time.perf_counter()
        d_ring = ring.from_int(delta)
        for lid in cons_exact.leaves_of(name):
            r0, c0, _shape = cons_exact.locate_input(lid)
            _engine_entry_update(engine, ring, nN, r0 + i, c0 + j, d_ring)
            cons_exact.apply_entry_update(lid, i, j, delta)
        inputs[name][i][j] += delta
        elapsed = time.perf_counter() - t0
        t_total += elapsed
        exact_inv = inv_exact(cons_exact.N)
        step_err = Fraction(0)
        answer = []
        oracle_val = []
        for ia in cons.I:
            row_ans = []
            row_orc = []
            for jb in cons.J:
                got = engine.query_entry(ia, jb)
                want = exact_inv[ia][jb]
                row_ans.append(ring.to_float(got))
                row_orc.append(float(want))
                step_err = max(step_err, abs(ring.to_fraction(got) - want))
            answer.append(row_ans)
            oracle_val.append(row_orc)
        step_err = float(step_err)
        max_err = max(max_err, step_err)
        records.append({
            "step": step, "name": name, "i": i, "j": j, "delta": delta,
            "engine_value": answer, "oracle_value": oracle_val,
            "abs_err": step_err, "ledger": engine.ledger(),
            "elapsed_ms": elapsed * 1000.0,
        })
    summary = {
        "scenario": "maintain", "engine": cfg.engine, "ring": cfg.ring,
        "bits": cfg.bits if cfg.ring == "fixed" else None,
        "formula": pretty(formula),
        "n_N": nN, "updates": cfg.t, "max_error": max_err, "eps": cfg.eps,
        "pass": max_err <= cfg.eps,
        "throughput_ups": (cfg.t / t_total) if t_total > 0 else None,
    }
    return Report(records, summary)


def run_determinant(cfg):
    rng = random.Random(cfg.seed)
    ring = make_ring(cfg)
    formula, inputs = generate_instance(cfg, rng, want_det=True)
    tracker = det_tracker_init(formula, inputs, eps=cfg.eps,
                               t_max=max(cfg.t, 1), ring=ring)
    leaves = enumerate_leaves(formula)
    records = []
    worst_rel = 0.0
    all_signs_ok = True
    t_total = 0.0
    for step in range(cfg.t):
        applied = False
        truth = None
        elapsed = 0.0
        for _ in range(200):
            name, i, j, delta = _draw_entry_update(rng, formula, inputs)
            cand = {k: [row[:] for row in v] for k, v in inputs.items()}
            cand[name][i][j] += delta
            try:
                value = eval_exact(formula, cand)
            except SingularMatrix:
                continue
            dv = det_bareiss(value)
            if dv == 0:
                continue
            t0 = time.perf_counter()
            done = 0
            try:
                for lid, lname, _shape in leaves:
                    if lname == name:
                        det_tracker_update(tracker, lid, i, j, delta)
                        done += 1
            except SingularUpdate:
                for _ in range(done):
                    tracker.revert()
                continue
            elapsed = time.perf_counter() - t0
            t_total += elapsed
            inputs = cand
            truth = dv
            applied = True
            break
        if not applied:
            raise ConfigError("determinant update stream stalled")
        want = SignedLogDet.from_fraction(truth)
        got = tracker.current()
        sign_ok = got.sign == want.sign
        rel = abs(math.exp(got.log_abs - want.log_abs) - 1.0)
        worst_rel = max(worst_rel, rel)
        all_signs_ok = all_signs_ok and sign_ok
        records.append({
            "step": step, "name": name, "i": i, "j": j, "delta": delta,
            "engine_sign": got.sign, "engine_log_abs": got.log_abs,
            "oracle_sign": want.sign, "oracle_log_abs": want.log_abs,
            "rel_err": rel, "ledger": tracker.invNhat.ledger(),
            "elapsed_ms": elapsed * 1000.0,
        })
    summary = {
        "scenario": "determinant", "ring": cfg.ring,
        "bits": cfg.bits if cfg.ring == "fixed" else None,
        "formula": pretty(formula), "updates": cfg.t,
        "max_rel_error": worst_rel, "eps": cfg.eps,
        "signs_correct": all_signs_ok,
        "pass": all_signs_ok and worst_rel <= cfg.eps,
        "throughput_ups": (cfg.t / t_total) if t_total > 0 else None,
    }
    return Report(records, summary)


def run_rank(cfg):
    rng = random.Random(cfg.seed)
    n = cfg.n
    if cfg.formula is not None:
        raise ConfigError("rank scenario uses a single input 'A' (formula fixed)")
    a0 = [[rng.randrange(5) for _ in range(n)] for _ in range(n)]
    st = rank_tracker_init("A", {"A": a0}, p=cfg.p, seed=cfg.seed)
    leaf_a = [lid for lid, (_r, _c, _s, nm) in st.cons.leaf_blocks.items()
              if nm == "A"][0]
    cur = [row[:] for row in a0]
    records = []
    ok = st.rank() == rank_elimination_mod_p(cur, cfg.p)
    lipschitz_ok = True
    prev = st.rank()
    t_total = 0.0
    for step in range(cfg.t):
        i, j = rng.randrange(n), rng.randrange(n)
        nv = rng.randrange(5)
        t0 = time.perf_counter()
        r = rank_tracker_update(st, leaf_a, i, j, nv)
        elapsed = time.perf_counter() - t0
        t_total += elapsed
        cur[i][j] = nv
        want = rank_elimination_mod_p(cur, cfg.p)
        step_ok = r == want
        ok = ok and step_ok
        lipschitz_ok = lipschitz_ok and abs(r - prev) <= 1
        records.append({"step": step, "i": i, "j": j, "new_value": nv,
                        "engine_rank": r, "oracle_rank": want, "k": st.k,
                        "agree": step_ok, "elapsed_ms": elapsed * 1000.0})
        prev = r
    summary = {
        "scenario": "rank", "n": n, "p": cfg.p, "updates": cfg.t,
        "all_agree": ok, "lipschitz": lipschitz_ok, "pass": ok and lipschitz_ok,
        "throughput_ups": (cfg.t / t_total) if t_total > 0 else None,
    }
    return Report(records, summary)


def feasible_graph_update(rng, st):
    """Draw an update the state will accept, keeping the mix interesting."""
    usable = [v for v in range(st.n) if v not in st.merged_into]
    plain = [v for v in usable if not st.members[v]]
    act = [v for v in usable if v in st.active]
    for _ in range(200):
        kind = rng.choice(["insert"] * 4 + ["remove"] * 2 +
                          ["vertex_off", "vertex_on", "merge"])
        if kind in ("insert", "remove") and len(usable) >= 2:
            return (kind, *rng.sample(usable, 2))
        if kind in ("vertex_on", "vertex_off") and plain:
            return (kind, rng.choice(plain))
        if kind == "merge" and len(act) >= 2 and len(usable) > 2:
            return (kind, *rng.sample(act, 2))
    raise ConfigError("graph update stream stalled (everything merged?)")


def run_matching(cfg):
    rng = random.Random(cfg.seed)
    st = matching_new(cfg.n, p=cfg.p, seed=cfg.seed)
    g = Graph(cfg.n)
    records = []
    ok = True
    t_total = 0.0
    for step in range(cfg.t):
        upd = feasible_graph_update(rng, st)
        t0 = time.perf_counter()
        size = apply_graph_update(st, upd)
        elapsed = time.perf_counter() - t0
        t_total += elapsed
        getattr(g, upd[0])(*upd[1:])
        want = max_matching_bruteforce(g)
        step_ok = size == want
        ok = ok and step_ok
        records.append({"step": step, "op": " ".join(str(x) for x in upd),
                        "engine_size": size, "oracle_size": want,
                        "rank": st.rk.rank(), "agree": step_ok,
                        "elapsed_ms": elapsed * 1000.0})
    summary = {
        "scenario": "matching", "n": cfg.n, "p": cfg.p, "updates": cfg.t,
        "all_agree": ok, "pass": ok,
        "throughput_ups": (cfg.t / t_total) if t_total > 0 else None,
    }
    return Report(records, summary)


def bits_sweep(cfg, b_list=None):
    """Maintain runs at each fixed-point width; error must shrink with b."""
    b_list = tuple(b_list if b_list is not None else cfg.b_list)
    if list(b_list) != sorted(b_list) or len(set(b_list)) != len(b_list):
        raise ConfigError("b_list must be strictly ascending")
    # default instance forces divisions so rounding error is actually visible
    src = cfg.formula or f"A:{cfg.n}x{cfg.n}; inv(A)"
    records = []
    errors = []
    for b in b_list:
        sub = ScenarioConfig(scenario="maintain", seed=cfg.seed,
                             formula=src, s_max=cfg.s_max,
                             dim_max=cfg.dim_max, n=cfg.n, t=cfg.t,
                             ring="fixed", bits=b, eps=cfg.eps, p=cfg.p,
                             engine=cfg.engine)
        rep = run_maintain(sub)
        err = rep.summary["max_error"]
        errors.append(err)
        records.append({"bits": b, "max_error": err,
                        "log2_error": math.log2(max(err, 2.0 ** -200))})
    monotone = all(errors[i + 1] <= errors[i] for i in range(len(errors) - 1))
    if len(b_list) >= 2:
        xs = list(b_list)
        ys = [math.log2(max(e, 2.0 ** -200)) for e in errors]
        xbar = sum(xs) / len(xs)
        ybar = sum(ys) / len(ys)
        sxx = sum((x - xbar) ** 2 for x in xs)
        slope = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys)) / sxx
    else:
        slope = None
    slope_ok = slope is None or slope <= cfg.slope_threshold
    summary = {
        "scenario": "bits-sweep", "b_list": list(b_list), "updates_per_b": cfg.t,
        "max_errors": errors, "monotone_non_increasing": monotone,
        "slope": slope, "slope_threshold": cfg.slope_threshold,
        "pass": monotone and slope_ok,
    }
    return Report(records, summary)


def run_scenario(cfg):
    runner = {
        "maintain": run_maintain,
        "determinant": run_determinant,
        "rank": run_rank,
        "matching": run_matching,
        "bits-sweep": bits_sweep,
    }[cfg.scenario]
    return runner(cfg)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="formulads",
        description="Dynamic matrix-formula maintenance scenarios, "
                    "checked against exact oracles.")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", help="JSON or TOML config file")
        sp.add_argument("--seed", type=int, help="RNG seed (required if not in config)")
        sp.add_argument("--out", help="write JSON-lines records + summary here")
        sp.add_argument("--json", action="store_true",
                        help="print the full report as JSON to stdout")
        sp.add_argument("--csv", help="also write records as CSV to this path")
        sp.add_argument("--formula", help="formula source (with declarations)")
        sp.add_argument("--n", type=int, help="instance size")
        sp.add_argument("--t", type=int, help="number of updates")
        sp.add_argument("--ring", choices=RINGS)
        sp.add_argument("--bits", type=int, help="fixed-point fractional bits")
        sp.add_argument("--engine", choices=ENGINES)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--p", type=int, help="field modulus (rank/matching)")
        sp.add_argument("--b-list", help="comma-separated bit widths for bits-sweep")
    return parser


def _config_from_args(args):
    data = {}
    if args.config:
        data.update(load_config(args.config))
    data["scenario"] = args.scenario
    for key in ("seed", "out", "formula", "n", "t", "ring", "bits",
                "engine", "eps", "p"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if getattr(args, "b_list", None):
        try:
            data["b_list"] = tuple(int(tok) for tok in args.b_list.split(","))
        except ValueError:
            raise ConfigError(f"bad --b-list {args.b_list!r}") from None
    if args.json:
        data["emit_json"] = True
    if args.csv:
        data["csv_path"] = args.csv
    if "seed" not in data:
        raise ConfigError("seed is required (either --seed or in the config)")
    return ScenarioConfig(**data)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        report = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text = report.jsonl()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    if cfg.csv_path:
        report.write_csv(cfg.csv_path)
    if cfg.emit_json:
        sys.stdout.write(text)
    else:
        verdict = "pass" if report.summary["pass"] else "FAIL"
        print(f"{cfg.scenario}: {verdict}  "
              + json.dumps({k: v for k, v in report.summary.items()
                            if k not in ("pass",)}, sort_keys=True))
    return 0 if report.summary["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
