import json

import pytest

from formulads import ConfigError
from formulads.cli import (ScenarioConfig, bits_sweep, load_config, main,
                           run_scenario)


def cfg(**kw):
    kw.setdefault("scenario", "maintain")
    kw.setdefault("seed", 1)
    return ScenarioConfig(**kw)


# --- frozen scenario examples -----------------------------------------------

def test_maintain_rational_inverse_is_exact():
    """inv(A) on the rational ring: maintained value has error exactly 0."""
    rep = run_scenario(cfg(formula="A:4x4; inv(A)", t=4, ring="rational"))
    assert rep.summary["max_error"] == 0.0
    assert rep.summary["pass"] is True
    assert len(rep.records) == 4


def test_maintain_zero_updates():
    rep = run_scenario(cfg(formula="A:4x4; inv(A)", t=0))
    assert rep.records == []
    assert rep.summary["pass"] is True


def test_matching_scenario_matches_bruteforce():
    rep = run_scenario(cfg(scenario="matching", n=6, t=50, seed=7))
    assert rep.summary["pass"] is True
    assert all(r["engine_size"] == r["oracle_size"] for r in rep.records)
    assert all(r["rank"] % 2 == 0 for r in rep.records)


def test_rank_scenario():
    rep = run_scenario(cfg(scenario="rank", n=6, t=25, seed=3))
    assert rep.summary["pass"] is True
    assert all(r["agree"] for r in rep.records)


def test_determinant_scenario():
    rep = run_scenario(cfg(scenario="determinant", formula="A:3x3; inv(A)*A",
                           t=6, ring="float64", eps=1e-3, seed=2))
    assert rep.summary["pass"] is True
    assert rep.summary["signs_correct"] is True


def test_bits_sweep_slope():
    rep = bits_sweep(cfg(scenario="bits-sweep", n=6, t=6, seed=11), [16, 24, 32])
    errs = rep.summary["max_errors"]
    assert all(errs[k + 1] <= errs[k] for k in range(len(errs) - 1))
    assert rep.summary["slope"] <= -0.8
    assert rep.summary["pass"] is True


def test_bits_sweep_single_width_has_null_slope():
    rep = bits_sweep(cfg(scenario="bits-sweep", n=4, t=4, seed=2), [32])
    assert rep.summary["slope"] is None
    assert rep.summary["pass"] is True


def test_bits_sweep_rejects_descending():
    with pytest.raises(ConfigError):
        bits_sweep(cfg(scenario="bits-sweep", n=4, t=4, seed=2), [32, 16])


# --- reproducibility --------------------------------------------------------

def strip_timings(report):
    recs = [{k: v for k, v in r.items() if k != "elapsed_ms"}
            for r in report.records]
    summ = {k: v for k, v in report.summary.items() if k != "throughput_ups"}
    return recs, summ


def test_runs_are_reproducible_modulo_timings():
    a = run_scenario(cfg(formula="A:4x4; inv(A)+A", t=6, ring="float64", seed=9))
    b = run_scenario(cfg(formula="A:4x4; inv(A)+A", t=6, ring="float64", seed=9))
    assert strip_timings(a) == strip_timings(b)


def test_different_seeds_differ():
    a = run_scenario(cfg(scenario="matching", n=6, t=20, seed=1))
    b = run_scenario(cfg(scenario="matching", n=6, t=20, seed=2))
    assert [r["op"] for r in a.records] != [r["op"] for r in b.records]


# --- config handling --------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(engine="warp")
    with pytest.raises(ConfigError):
        cfg(ring="decimal")
    with pytest.raises(ConfigError):
        cfg(eps=2.0)
    with pytest.raises(ConfigError):
        cfg(t=-1)
    with pytest.raises(ConfigError):
        cfg(p=91)                       # 7*13
    with pytest.raises(ConfigError):
        cfg(b_list=(32, 16))
    with pytest.raises(ConfigError):
        ScenarioConfig(scenario="maintain", seed=None)


def test_load_config_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"t": 3, "seed": 4, "ring": "rational"}))
    assert load_config(str(path))["t"] == 3


def test_load_config_toml(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('t = 3\nseed = 4\nring = "rational"\n')
    assert load_config(str(path))["ring"] == "rational"


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"tt": 3}))
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_explicit_formula_requires_declarations():
    with pytest.raises(ConfigError):
        run_scenario(cfg(formula="inv(A)", t=1))


# --- entry point ------------------------------------------------------------

def test_main_exit_codes(tmp_path, capsys):
    ok = main(["maintain", "--formula", "A:3x3; inv(A)", "--t", "2", "--seed", "1"])
    assert ok == 0
    bad = main(["maintain", "--formula", "A:3x3; inv(A)", "--t", "3",
                "--ring", "float64", "--eps", "1e-30", "--seed", "1"])
    assert bad == 1
    cfg_err = main(["maintain", "--formula", "A:3x3; inv(A)"])   # no seed
    assert cfg_err == 2
    capsys.readouterr()


def test_main_writes_jsonl_and_csv(tmp_path, capsys):
    out = tmp_path / "rep.jsonl"
    csvp = tmp_path / "rep.csv"
    code = main(["maintain", "--formula", "A:3x3; inv(A)", "--t", "3",
                 "--seed", "5", "--out", str(out), "--csv", str(csvp)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert all(json.loads(x) for x in lines)
    assert "summary" in json.loads(lines[-1])
    rows = csvp.read_text().splitlines()
    assert len(rows) == 4 and rows[0].split(",")[0] == "abs_err"
    capsys.readouterr()


def test_main_json_flag_prints_report(capsys):
    code = main(["maintain", "--formula", "A:2x2; inv(A)", "--t", "2",
                 "--seed", "3", "--json"])
    assert code == 0
    outlines = capsys.readouterr().out.splitlines()
    assert len(outlines) == 3
    assert json.loads(outlines[-1])["summary"]["pass"] is True


def test_main_config_file_with_flag_override(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"formula": "A:3x3; inv(A)", "t": 2,
                                "ring": "rational", "seed": 4}))
    code = main(["maintain", "--config", str(path), "--seed", "12"])
    assert code == 0
    capsys.readouterr()
