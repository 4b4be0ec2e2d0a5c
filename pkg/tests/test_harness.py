"""Tests for config parsing, the replication harness, and the CLI."""

import configparser
import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from coneshare.cli import main
from coneshare.harness import (
    ConfigError,
    apply_overrides,
    bound_experiment,
    parse_config,
    run_experiment,
    seed_for,
    validate_experiment,
)
from coneshare.metrics import CSV_COLUMNS
from coneshare.problems import gen_bpd, slater_dual_bound
from coneshare.solver import NumericalError

BASE = {
    "experiment": {"scenario": "static-undirected", "algorithm": "dpda-s"},
    "problem": {"n": "12", "m": "4", "kappa": "3", "snr_db": "20"},
    "network": {"nodes": "3", "edges": "3"},
    "run": {"iters": "60", "reps": "2", "record": "20", "seed": "5",
            "workers": "1"},
}


def write_cfg(path, overrides=None, drop=()):
    data = {sec: dict(kv) for sec, kv in BASE.items() if sec not in drop}
    for sec, kv in (overrides or {}).items():
        data.setdefault(sec, {}).update({k: str(v) for k, v in kv.items()})
    cp = configparser.ConfigParser()
    cp.read_dict(data)
    with open(path, "w", encoding="ascii") as fh:
        cp.write(fh)
    return str(path)


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("static")
    cfg_path = write_cfg(root / "exp.ini")
    cfg = parse_config(cfg_path)
    out = root / "out"
    paths = run_experiment(cfg, out_dir=out)
    return cfg_path, cfg, out, paths


# ---------------------------------------------------------------------------
# seeds

def test_seed_derivation_matches_hash():
    digest = hashlib.sha256(b"5|2|network").digest()
    assert seed_for(5, 2, "network") == int.from_bytes(digest[:8], "big")


def test_seeds_distinct_across_reps_and_tags():
    seen = {seed_for(0, rep, tag)
            for rep in range(10) for tag in ("problem", "network", "init")}
    assert len(seen) == 30
    for s in seen:
        assert 0 <= s < 2 ** 64
    # a different master seed moves every stream
    assert seed_for(1, 0, "problem") != seed_for(0, 0, "problem")


# ---------------------------------------------------------------------------
# config parsing

def test_parse_full_config(tmp_path):
    path = write_cfg(tmp_path / "full.ini", {
        "experiment": {"name": "demo"},
        "problem": {"snr_db": "none"},
        "steps": {"gamma": "auto", "safety": "0.8", "b": "2.5",
                  "strict": "no"},
        "budget": {"rule": "polynomial", "exponent": "1.5"},
        "run": {"record": "auto", "timing": "yes"},
    })
    cfg = parse_config(path)
    assert cfg.name == "demo"
    assert cfg.snr_db is None
    assert cfg.gamma is None and cfg.safety == 0.8
    assert cfg.b_mode == "value" and cfg.b_value == 2.5
    assert cfg.strict is False
    assert cfg.budget_rule == "polynomial" and cfg.budget_exponent == 1.5
    assert cfg.record is None and cfg.timing is True
    assert cfg.reps == 2 and cfg.seed == 5


def test_parse_defaults_name_from_filename(tmp_path):
    cfg = parse_config(write_cfg(tmp_path / "mystery.ini"))
    assert cfg.name == "mystery"
    assert cfg.b_mode == "auto-slater"
    assert cfg.timing is False and cfg.workers == 1


def test_gamma_i_default_for_weighted_variant(tmp_path):
    path = write_cfg(tmp_path / "w.ini", {
        "experiment": {"scenario": "dynamic-undirected",
                       "algorithm": "dpda-d-gamma-i"},
    })
    cfg = parse_config(path)
    assert cfg.gamma_i == (1.0, 1.0, 1.0)


def test_directed_scenario_defaults_to_builtin_graph(tmp_path):
    path = write_cfg(tmp_path / "d.ini", {
        "experiment": {"scenario": "dynamic-directed", "algorithm": "dpda-d"},
        "network": {"nodes": "12"},
    })
    assert parse_config(path).graph_source == "builtin:d12"


@pytest.mark.parametrize("overrides, drop, fragment", [
    ({"experiment": {"scenario": "sometimes"}}, (), "scenario"),
    ({"experiment": {"algorithm": "sgd"}}, (), "algorithm"),
    ({"experiment": {"scenario": "dynamic-undirected"}}, (),
     "static-undirected"),
    ({}, ("network",), "network"),
    ({"problem": {"n": "0"}}, (), "positive"),
    ({"problem": {"type": "lasso"}}, (), "type"),
    ({"steps": {"tau": "1 1 1"}}, (), "together"),
    ({"steps": {"gamma_i": "1 1"}}, (), "per agent"),
    ({"steps": {"b": "-3"}}, (), "positive"),
    ({"steps": {"b": "sideways"}}, (), "auto-slater"),
    ({"budget": {"rule": "fibonacci"}}, (), "rule"),
    ({"run": {"iters": "0"}}, (), "iters"),
    ({"run": {"reps": "0"}}, (), "reps"),
    ({"network": {"nodes": "0"}}, (), "nodes"),
])
def test_parse_rejects(tmp_path, overrides, drop, fragment):
    path = write_cfg(tmp_path / "bad.ini", overrides, drop)
    with pytest.raises(ConfigError, match=fragment):
        parse_config(path)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.ini")


def test_edge_count_required_without_graph(tmp_path):
    path = write_cfg(tmp_path / "e.ini")
    cp = configparser.ConfigParser()
    cp.read(path)
    cp.remove_option("network", "edges")
    with open(path, "w", encoding="ascii") as fh:
        cp.write(fh)
    with pytest.raises(ConfigError, match="edge count"):
        parse_config(path)


def test_apply_overrides(tmp_path):
    cfg = parse_config(write_cfg(tmp_path / "o.ini"))
    new = apply_overrides(cfg, reps=7, seed=11, out_dir="/somewhere")
    assert (new.reps, new.seed, new.out_dir) == (7, 11, "/somewhere")
    assert cfg.reps == 2  # original untouched
    assert apply_overrides(cfg) is cfg
    with pytest.raises(ConfigError, match="reps"):
        apply_overrides(cfg, reps=0)


# ---------------------------------------------------------------------------
# experiment runs

def test_artifacts_written(static_run):
    _, _, out, paths = static_run
    for key in ("runs", "aggregate", "manifest"):
        assert Path(paths[key]).is_file()
    assert paths["figures"] == [out / "convergence.png"]
    with open(out / "convergence.png", "rb") as fh:
        assert fh.read(8) == b"\x89PNG\r\n\x1a\n"


def test_runs_csv_layout(static_run):
    _, cfg, out, _ = static_run
    with open(out / "runs.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0].keys()) == list(CSV_COLUMNS)
    # two replications, each recorded at k = 20, 40, 60
    assert [(r["rep"], r["k"]) for r in rows] == [
        ("0", "20"), ("0", "40"), ("0", "60"),
        ("1", "20"), ("1", "40"), ("1", "60"),
    ]
    for r in rows:
        assert r["comms"] == r["k"]  # one exchange per iteration
        assert r["elapsed_ms"] == "0.0"  # timing off by default
        assert float(r["subopt_rel"]) >= 0.0


def test_aggregate_is_mean_of_runs(static_run):
    _, _, out, _ = static_run
    with open(out / "runs.csv", newline="") as fh:
        runs = list(csv.DictReader(fh))
    with open(out / "aggregate.csv", newline="") as fh:
        agg = list(csv.DictReader(fh))
    assert [a["k"] for a in agg] == ["20", "40", "60"]
    for a in agg:
        group = [r for r in runs if r["k"] == a["k"]]
        assert len(group) == 2
        for col in ("subopt_rel", "infeas", "consensus", "subopt_rel_erg",
                    "infeas_erg", "consensus_erg"):
            mean = float(np.mean([float(r[col]) for r in group]))
            assert float(a[col]) == mean
        assert a["comms"] == group[0]["comms"]


def test_manifest_contents(static_run):
    _, cfg, out, _ = static_run
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["algorithm"] == "dpda-s"
    assert man["config"]["seed"] == 5
    assert len(man["replications"]) == 2
    for rep_entry in man["replications"]:
        rep = rep_entry["rep"]
        for tag in ("problem", "network", "init"):
            assert rep_entry["seeds"][tag] == seed_for(5, rep, tag)
        assert rep_entry["ref_converged"] is True
        assert rep_entry["comms"] == 60
        assert rep_entry["elapsed_ms"] == 0.0


def test_rerun_is_byte_identical(static_run, tmp_path):
    cfg_path, cfg, out, _ = static_run
    again = tmp_path / "again"
    run_experiment(cfg, out_dir=again)
    for name in ("runs.csv", "aggregate.csv"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_parallel_workers_match_serial(static_run, tmp_path):
    cfg_path, cfg, out, _ = static_run
    par = apply_overrides(parse_config(cfg_path), out_dir=str(tmp_path / "p"))
    par = par.__class__(**{**par.__dict__, "workers": 2})
    run_experiment(par, out_dir=tmp_path / "p")
    assert (tmp_path / "p" / "runs.csv").read_bytes() == \
        (out / "runs.csv").read_bytes()


def test_timing_reports_per_rep_elapsed(tmp_path):
    path = write_cfg(tmp_path / "t.ini", {
        "run": {"timing": "true", "reps": "1", "iters": "20", "record": "10"},
    })
    run_experiment(parse_config(path), out_dir=tmp_path / "out")
    with open(tmp_path / "out" / "runs.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    values = {r["elapsed_ms"] for r in rows}
    assert len(values) == 1  # the rep total appears on each of its rows
    assert float(values.pop()) > 0.0


def test_out_dir_required(tmp_path):
    cfg = parse_config(write_cfg(tmp_path / "n.ini"))
    with pytest.raises(ConfigError, match="out_dir"):
        run_experiment(cfg)


def test_dynamic_run_counts_gossip_rounds(tmp_path):
    path = write_cfg(tmp_path / "dyn.ini", {
        "experiment": {"scenario": "dynamic-undirected", "algorithm": "dpda-d"},
        "network": {"window": "4"},
        "budget": {"rule": "constant", "rounds": "2"},
        "run": {"iters": "40", "reps": "1", "record": "10", "seed": "3"},
    })
    paths = run_experiment(parse_config(path), out_dir=tmp_path / "out")
    man = json.loads(Path(paths["manifest"]).read_text())
    assert man["replications"][0]["comms"] == 80  # 2 rounds x 40 iterations


# ---------------------------------------------------------------------------
# validate / bound

def test_validate_accepts_defaults(tmp_path, capsys):
    path = write_cfg(tmp_path / "v.ini")
    assert main(["validate", path]) == 0
    out = capsys.readouterr().out
    assert "step sizes OK" in out
    assert "certificate margin" in out


def test_validate_rejects_bad_steps(tmp_path, capsys):
    path = write_cfg(tmp_path / "bad.ini", {
        "steps": {"tau": "5 5 5", "kappa": "5 5 5"},
    })
    assert main(["validate", path]) == 3
    assert "REJECTED" in capsys.readouterr().out


def test_validate_describes_baselines(tmp_path, capsys):
    for algo, needle in (("centralized-pda", "operator norm"),
                         ("prox-jadmm", "rho")):
        path = write_cfg(tmp_path / f"{algo}.ini",
                         {"experiment": {"algorithm": algo}})
        assert main(["validate", path]) == 0
        assert needle in capsys.readouterr().out


def test_bound_resolution(tmp_path, capsys):
    path = write_cfg(tmp_path / "b.ini", {"steps": {"b": "3.5"}})
    assert main(["bound", path]) == 0
    assert float(capsys.readouterr().out) == 3.5
    cfg = parse_config(write_cfg(tmp_path / "auto.ini"))
    inst = gen_bpd(12, 4, 3, 20.0, 0.05, seed=seed_for(5, 0, "problem"))
    assert bound_experiment(cfg) == pytest.approx(slater_dual_bound(inst))


def test_bound_needs_interior_for_slater(tmp_path, capsys):
    path = write_cfg(tmp_path / "nf.ini", {"problem": {"snr_db": "none"}})
    assert main(["bound", path]) == 2
    assert "config error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# CLI exit codes

def test_cli_run_prints_artifacts(tmp_path, capsys):
    path = write_cfg(tmp_path / "r.ini", {
        "run": {"iters": "20", "reps": "1", "record": "10"},
    })
    assert main(["run", path, "--out-dir", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert out.count("wrote ") == 4
    assert (tmp_path / "out" / "convergence.png").is_file()


def test_cli_seed_override_changes_rows(tmp_path):
    path = write_cfg(tmp_path / "s.ini",
                     {"run": {"iters": "20", "reps": "1", "record": "10"}})
    assert main(["run", path, "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["run", path, "--seed", "99",
                 "--out-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "runs.csv").read_bytes() != \
        (tmp_path / "b" / "runs.csv").read_bytes()


def test_cli_config_error_exit(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.ini")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_step_error_exit(tmp_path, capsys):
    path = write_cfg(tmp_path / "bad.ini", {
        "steps": {"tau": "5 5 5", "kappa": "5 5 5"},
        "run": {"iters": "10", "reps": "1"},
    })
    assert main(["run", path, "--out-dir", str(tmp_path / "out")]) == 3
    assert "step-size validation failed" in capsys.readouterr().err


def test_cli_numerical_error_exit(tmp_path, capsys, monkeypatch):
    path = write_cfg(tmp_path / "n.ini")

    def boom(cfg):
        raise NumericalError("synthetic blow-up")

    monkeypatch.setattr("coneshare.cli.run_experiment", boom)
    assert main(["run", path, "--out-dir", str(tmp_path / "out")]) == 4
    assert "numerical failure" in capsys.readouterr().err


def test_validate_experiment_direct(tmp_path):
    cfg = parse_config(write_cfg(tmp_path / "v.ini"))
    ok, lines = validate_experiment(cfg)
    assert ok and any("margin" in ln for ln in lines)
