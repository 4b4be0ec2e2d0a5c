"""Experiment harness: config parsing, replication running, CSV reporting.

Configs are flat INI files (sections [experiment], [problem], [network],
[steps], [budget], [run]).  A run executes ``reps`` independent replications,
each with a freshly generated instance, network, and starting point derived
deterministically from the master seed, and writes

    runs.csv        every recorded metric row of every replication
    aggregate.csv   per-iteration means across replications
    manifest.json   resolved config, per-rep seeds, reference summaries
    convergence.png rendered from aggregate.csv

Reruns of the same config produce byte-identical CSV files; wall-clock
timing is off by default (elapsed_ms = 0.0) and, when enabled, reports each
replication's total solve time on all of its rows.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .baseline import ProxJadmmConfig, prox_jadmm_run
from .graphs import Graph, StaticSchedule, WindowSchedule, digraph_12, \
    is_connected, is_strongly_connected, load_edge_list, small_world
from .metrics import CSV_COLUMNS, format_csv_row, format_value
from .mixing import Budget, ConsensusGeometry, GossipMixer, constant_budget, \
    default_budget, explicit_budget, logarithmic_budget, polynomial_budget
from .problems import bpd_metric_context, bpd_to_sharing, default_partition, \
    gen_bpd, slater_dual_bound, uniform_initial
from .solver import StepSizes, centralized_pda_run, default_dynamic_steps, \
    default_static_steps, dpda_d_run, dpda_s_run, reference_solution, \
    validate_step_sizes

SCENARIOS = ("static-undirected", "dynamic-undirected", "dynamic-directed")
ALGORITHMS = ("dpda-s", "dpda-d", "dpda-d-gamma-i", "centralized-pda",
              "prox-jadmm")
_B_FLOOR = 1e-6


class ConfigError(ValueError):
    """Invalid or missing configuration; carries the offending location."""

    def __init__(self, section, key, message):
        self.section = section
        self.key = key
        super().__init__(f"[{section}] {key}: {message}" if key
                         else f"[{section}]: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    scenario: str
    algorithm: str
    # problem
    n: int
    m: int
    kappa: int
    snr_db: float | None
    alpha: float
    # network
    nodes: int
    edges: int | None
    graph_source: str | None
    window: int
    activation: float
    # steps
    gamma: float | None
    gamma_i: tuple | None
    safety: float
    b_mode: str
    b_value: float | None
    strict: bool
    tau: tuple | None
    kappa_steps: tuple | None
    # budget
    budget_rule: str
    budget_coefficient: float | None
    budget_alpha: float | None
    budget_c: float | None
    budget_exponent: float
    budget_rounds: int
    budget_values: tuple | None
    # run
    iters: int
    reps: int
    seed: int
    out_dir: str | None
    timing: bool
    workers: int
    record: int | None
    ref_tol: float
    ref_iters: int


_REQUIRED = object()


def _fetch(cp, section, key, cast, default=_REQUIRED):
    if not cp.has_option(section, key):
        if default is _REQUIRED:
            raise ConfigError(section, key, "required key is missing")
        return default
    raw = cp.get(section, key).strip()
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(section, key, f"cannot parse {raw!r}: {exc}") from exc


def _bool(raw):
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _float_list(raw):
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _int_list(raw):
    return tuple(int(v) for v in raw.replace(",", " ").split())


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("experiment", "", f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError("experiment", "", f"cannot parse config: {exc}") from exc
    for section in ("experiment", "problem", "run"):
        if not cp.has_section(section):
            raise ConfigError(section, "", "required section is missing")

    scenario = _fetch(cp, "experiment", "scenario", str)
    if scenario not in SCENARIOS:
        raise ConfigError("experiment", "scenario",
                          f"must be one of {', '.join(SCENARIOS)}")
    algorithm = _fetch(cp, "experiment", "algorithm", str)
    if algorithm not in ALGORITHMS:
        raise ConfigError("experiment", "algorithm",
                          f"must be one of {', '.join(ALGORITHMS)}")
    if algorithm == "dpda-s" and scenario != "static-undirected":
        raise ConfigError("experiment", "algorithm",
                          "dpda-s requires the static-undirected scenario")
    name = _fetch(cp, "experiment", "name", str, default=path.stem)

    ptype = _fetch(cp, "problem", "type", str, default="bpd")
    if ptype != "bpd":
        raise ConfigError("problem", "type", f"unsupported problem type {ptype!r}")

    def _snr(raw):
        if raw.lower() in ("inf", "none", "noise-free"):
            return None
        return float(raw)

    n = _fetch(cp, "problem", "n", int)
    m = _fetch(cp, "problem", "m", int)
    kappa = _fetch(cp, "problem", "kappa", int)
    snr_db = _fetch(cp, "problem", "snr_db", _snr, default=30.0)
    alpha = _fetch(cp, "problem", "alpha", float, default=0.05)
    if n < 1 or m < 1:
        raise ConfigError("problem", "n", "dimensions must be positive")

    if not cp.has_section("network"):
        raise ConfigError("network", "", "required section is missing")
    nodes = _fetch(cp, "network", "nodes", int)
    if nodes < 1:
        raise ConfigError("network", "nodes", "must be >= 1")
    edges = _fetch(cp, "network", "edges", int, default=None)
    graph_source = _fetch(cp, "network", "graph", str, default=None)
    window = _fetch(cp, "network", "window", int, default=5)
    activation = _fetch(cp, "network", "activation", float, default=0.8)
    if scenario == "dynamic-directed" and graph_source is None:
        graph_source = "builtin:d12"
    needs_network = algorithm in ("dpda-s", "dpda-d", "dpda-d-gamma-i")
    if needs_network and graph_source is None and edges is None:
        raise ConfigError("network", "edges",
                          "need an edge count for small-world generation "
                          "(or an explicit graph)")

    def _gamma(raw):
        return None if raw.lower() == "auto" else float(raw)

    gamma = _fetch(cp, "steps", "gamma", _gamma, default=None) \
        if cp.has_section("steps") else None
    gamma_i = _fetch(cp, "steps", "gamma_i", _float_list, default=None) \
        if cp.has_section("steps") else None
    safety = _fetch(cp, "steps", "safety", float, default=0.9) \
        if cp.has_section("steps") else 0.9
    b_raw = _fetch(cp, "steps", "b", str, default="auto-slater") \
        if cp.has_section("steps") else "auto-slater"
    strict = _fetch(cp, "steps", "strict", _bool, default=True) \
        if cp.has_section("steps") else True
    tau = _fetch(cp, "steps", "tau", _float_list, default=None) \
        if cp.has_section("steps") else None
    kappa_steps = _fetch(cp, "steps", "kappa", _float_list, default=None) \
        if cp.has_section("steps") else None
    if (tau is None) != (kappa_steps is None):
        raise ConfigError("steps", "tau", "tau and kappa must be given together")
    if b_raw in ("auto-slater", "auto-reference"):
        b_mode, b_value = b_raw, None
    else:
        try:
            b_mode, b_value = "value", float(b_raw)
        except ValueError as exc:
            raise ConfigError("steps", "b",
                              "must be auto-slater, auto-reference, or a "
                              f"number; got {b_raw!r}") from exc
        if b_value <= 0:
            raise ConfigError("steps", "b", "an explicit bound must be positive")
    if gamma_i is not None and len(gamma_i) != nodes:
        raise ConfigError("steps", "gamma_i",
                          f"need one value per agent ({nodes})")
    if algorithm == "dpda-d-gamma-i" and gamma_i is None:
        gamma_i = tuple(1.0 for _ in range(nodes))

    has_budget = cp.has_section("budget")
    budget_rule = _fetch(cp, "budget", "rule", str, default="logarithmic") \
        if has_budget else "logarithmic"
    if budget_rule not in ("logarithmic", "polynomial", "constant", "explicit"):
        raise ConfigError("budget", "rule", f"unknown rule {budget_rule!r}")
    budget_coefficient = _fetch(cp, "budget", "coefficient", float, default=None) \
        if has_budget else None
    budget_alpha = _fetch(cp, "budget", "alpha", float, default=None) \
        if has_budget else None
    budget_c = _fetch(cp, "budget", "c", float, default=None) \
        if has_budget else None
    budget_exponent = _fetch(cp, "budget", "exponent", float, default=2.0) \
        if has_budget else 2.0
    budget_rounds = _fetch(cp, "budget", "rounds", int, default=1) \
        if has_budget else 1
    budget_values = _fetch(cp, "budget", "values", _int_list, default=None) \
        if has_budget else None

    iters = _fetch(cp, "run", "iters", int)
    if iters < 1:
        raise ConfigError("run", "iters", "must be >= 1")
    reps = _fetch(cp, "run", "reps", int, default=1)
    if reps < 1:
        raise ConfigError("run", "reps", "must be >= 1")
    seed = _fetch(cp, "run", "seed", int, default=0)
    out_dir = _fetch(cp, "run", "out_dir", str, default=None)
    timing = _fetch(cp, "run", "timing", _bool, default=False)
    workers = _fetch(cp, "run", "workers", int, default=0)

    def _record(raw):
        return None if raw.lower() == "auto" else int(raw)

    record = _fetch(cp, "run", "record", _record, default=None)
    ref_tol = _fetch(cp, "run", "ref_tol", float, default=1e-10)
    ref_iters = _fetch(cp, "run", "ref_iters", int, default=200_000)

    return ExperimentConfig(
        name=name, scenario=scenario, algorithm=algorithm,
        n=n, m=m, kappa=kappa, snr_db=snr_db, alpha=alpha,
        nodes=nodes, edges=edges, graph_source=graph_source,
        window=window, activation=activation,
        gamma=gamma, gamma_i=gamma_i, safety=safety,
        b_mode=b_mode, b_value=b_value, strict=strict,
        tau=tau, kappa_steps=kappa_steps,
        budget_rule=budget_rule, budget_coefficient=budget_coefficient,
        budget_alpha=budget_alpha, budget_c=budget_c,
        budget_exponent=budget_exponent, budget_rounds=budget_rounds,
        budget_values=budget_values,
        iters=iters, reps=reps, seed=seed, out_dir=out_dir, timing=timing,
        workers=workers, record=record, ref_tol=ref_tol, ref_iters=ref_iters,
    )


def seed_for(master: int, rep: int, tag: str) -> int:
    """Deterministic 64-bit stream seed for one replication and purpose."""
    digest = hashlib.sha256(f"{master}|{rep}|{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# building blocks

def _load_graph(cfg: ExperimentConfig, directed: bool, seed: int) -> Graph:
    if cfg.graph_source is not None:
        if cfg.graph_source == "builtin:d12":
            graph = digraph_12()
        else:
            try:
                graph = load_edge_list(cfg.graph_source)
            except (OSError, ValueError) as exc:
                raise ConfigError("network", "graph", str(exc)) from exc
        if graph.directed != directed:
            kind = "directed" if directed else "undirected"
            raise ConfigError("network", "graph",
                              f"scenario needs an {kind} graph")
        if graph.n_nodes != cfg.nodes:
            raise ConfigError("network", "graph",
                              f"graph has {graph.n_nodes} nodes, config says "
                              f"{cfg.nodes}")
    else:
        try:
            graph = small_world(cfg.nodes, cfg.edges, seed)
        except ValueError as exc:
            raise ConfigError("network", "edges", str(exc)) from exc
    check = is_strongly_connected if directed else is_connected
    if not check(graph):
        raise ConfigError("network", "graph",
                          "graph is not (strongly) connected")
    return graph


def _build_schedule(cfg: ExperimentConfig, seed: int):
    if cfg.scenario == "static-undirected":
        return StaticSchedule(_load_graph(cfg, directed=False, seed=seed))
    directed = cfg.scenario == "dynamic-directed"
    base = _load_graph(cfg, directed=directed, seed=seed)
    return WindowSchedule(base, window=cfg.window, activation=cfg.activation,
                          seed=seed)


def _build_budget(cfg: ExperimentConfig) -> Budget:
    try:
        if cfg.budget_rule == "logarithmic":
            if cfg.budget_coefficient is None and cfg.budget_alpha is None:
                return default_budget()
            return logarithmic_budget(alpha=cfg.budget_alpha, c=cfg.budget_c,
                                      coefficient=cfg.budget_coefficient)
        if cfg.budget_rule == "polynomial":
            return polynomial_budget(cfg.budget_exponent)
        if cfg.budget_rule == "constant":
            return constant_budget(cfg.budget_rounds)
        return explicit_budget(cfg.budget_values or ())
    except ValueError as exc:
        raise ConfigError("budget", cfg.budget_rule, str(exc)) from exc


def _build_steps(cfg: ExperimentConfig, problem, graph=None):
    dynamic = cfg.algorithm in ("dpda-d", "dpda-d-gamma-i")
    if cfg.algorithm == "dpda-d-gamma-i":
        gamma = np.asarray(cfg.gamma_i, dtype=float)
    else:
        gamma = cfg.gamma if cfg.gamma is not None else (1.0 if dynamic else None)
    if cfg.tau is not None:
        if len(cfg.tau) != problem.n_agents or \
                len(cfg.kappa_steps) != problem.n_agents:
            raise ConfigError("steps", "tau", "need one value per agent")
        if gamma is None:  # static auto-gamma with explicit tau/kappa
            gamma = 2.0 * graph.n_nodes / graph.n_edges
        return StepSizes(tau=np.asarray(cfg.tau),
                         kappa=np.asarray(cfg.kappa_steps), gamma=gamma)
    if dynamic:
        return default_dynamic_steps(problem, gamma=gamma, safety=cfg.safety)
    return default_static_steps(problem, graph, gamma=gamma)


def _resolve_b(cfg: ExperimentConfig, inst, reference=None) -> float:
    if cfg.b_mode == "value":
        b = cfg.b_value
    elif cfg.b_mode == "auto-slater":
        try:
            b = slater_dual_bound(inst)
        except ValueError as exc:
            raise ConfigError("steps", "b", str(exc)) from exc
    else:
        if reference is None:
            reference = reference_solution(bpd_to_sharing(inst, cfg.nodes),
                                           tol=cfg.ref_tol,
                                           max_iters=cfg.ref_iters)
        b = 2.0 * reference.y_norm
    return max(float(b), _B_FLOOR)


# ---------------------------------------------------------------------------
# replications

@dataclass
class RepResult:
    rep: int
    rows: list
    elapsed_ms: float
    seeds: dict
    ref_phi: float
    ref_y_norm: float
    ref_converged: bool
    comms: int


def run_replication(cfg: ExperimentConfig, rep: int) -> RepResult:
    t0 = time.perf_counter()
    seeds = {tag: seed_for(cfg.seed, rep, tag)
             for tag in ("problem", "network", "init")}
    inst = gen_bpd(cfg.n, cfg.m, cfg.kappa, cfg.snr_db, cfg.alpha,
                   seed=seeds["problem"])
    problem = bpd_to_sharing(inst, cfg.nodes)
    reference = reference_solution(problem, tol=cfg.ref_tol,
                                   max_iters=cfg.ref_iters)
    context = bpd_metric_context(inst, reference)
    algo = cfg.algorithm
    if algo == "dpda-s":
        graph = _load_graph(cfg, directed=False, seed=seeds["network"])
        steps = _build_steps(cfg, problem, graph)
        xi0 = uniform_initial(problem, seeds["init"])
        trace = dpda_s_run(problem, graph, steps, cfg.iters, xi0,
                           context=context, record=cfg.record)
    elif algo in ("dpda-d", "dpda-d-gamma-i"):
        schedule = _build_schedule(cfg, seeds["network"])
        steps = _build_steps(cfg, problem)
        b = _resolve_b(cfg, inst, reference)
        weights = np.asarray(cfg.gamma_i, dtype=float) \
            if algo == "dpda-d-gamma-i" else None
        geom = ConsensusGeometry(n_agents=cfg.nodes, block_dim=problem.m,
                                 radius=2.0 * b, weights=weights)
        mixer = GossipMixer(schedule, _build_budget(cfg), geom)
        xi0 = uniform_initial(problem, seeds["init"])
        trace = dpda_d_run(problem, mixer, steps, cfg.iters, xi0,
                           context=context, record=cfg.record,
                           strict=cfg.strict)
    elif algo == "centralized-pda":
        xi0 = uniform_initial(problem, seeds["init"])
        trace = centralized_pda_run(problem, cfg.iters, xi0=xi0,
                                    context=context, record=cfg.record)
    else:  # prox-jadmm
        rng = np.random.default_rng(seeds["init"])
        sizes = [a.dim for a in problem.agents]
        if not inst.noise_free:
            sizes[0] -= 1  # the baseline has no budget coordinate
        xi0 = [rng.random(s) for s in sizes]
        trace = prox_jadmm_run(inst, cfg.nodes, cfg.iters, xi0=xi0,
                               context=context, record=cfg.record)
    elapsed = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
    return RepResult(rep=rep, rows=trace.rows, elapsed_ms=elapsed, seeds=seeds,
                     ref_phi=reference.phi, ref_y_norm=reference.y_norm,
                     ref_converged=reference.converged, comms=trace.comms)


def _rep_worker(args):
    cfg, rep = args
    return run_replication(cfg, rep)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run all replications and write the artifact files; returns their paths."""
    wall0 = time.perf_counter()
    out = Path(out_dir if out_dir is not None else (cfg.out_dir or ""))
    if str(out) in ("", "."):
        raise ConfigError("run", "out_dir", "an output directory is required")
    out.mkdir(parents=True, exist_ok=True)
    n_workers = cfg.workers if cfg.workers > 0 else \
        min(cfg.reps, os.cpu_count() or 1, 8)
    jobs = [(cfg, rep) for rep in range(cfg.reps)]
    if n_workers > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_rep_worker, jobs))
    else:
        results = [_rep_worker(job) for job in jobs]

    runs_path = out / "runs.csv"
    with open(runs_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for res in results:
            for row in res.rows:
                writer.writerow(format_csv_row(res.rep, row, res.elapsed_ms))

    agg_path = out / "aggregate.csv"
    _write_aggregate(agg_path, results)

    manifest_path = out / "manifest.json"
    manifest = {
        "config": _jsonable(asdict(cfg)),
        "replications": [
            {"rep": r.rep, "seeds": r.seeds, "ref_phi": r.ref_phi,
             "ref_y_norm": r.ref_y_norm, "ref_converged": r.ref_converged,
             "comms": r.comms, "elapsed_ms": r.elapsed_ms}
            for r in results
        ],
        "workers": n_workers,
        "wall_time_s": time.perf_counter() - wall0,
    }
    with open(manifest_path, "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    from .report import render_run  # deferred: pulls in matplotlib
    figure_paths = render_run(out)
    return {"runs": runs_path, "aggregate": agg_path,
            "manifest": manifest_path, "figures": figure_paths}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def _write_aggregate(path, results):
    ks = [row.k for row in results[0].rows]
    for res in results[1:]:
        if [row.k for row in res.rows] != ks:
            raise ValueError("replications recorded different iteration grids")
    fields = ("subopt_rel", "infeas", "consensus", "subopt_rel_erg",
              "infeas_erg", "consensus_erg")
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("k", "comms") + fields + ("elapsed_ms",))
        for idx, k in enumerate(ks):
            rows = [res.rows[idx] for res in results]
            means = [float(np.mean([getattr(r, f) for r in rows]))
                     for f in fields]
            elapsed = float(np.mean([res.elapsed_ms for res in results]))
            writer.writerow(
                [str(k), str(rows[0].comms)]
                + [format_value(v) for v in means]
                + [format_value(elapsed)]
            )


# ---------------------------------------------------------------------------
# validate / bound entry points

def validate_experiment(cfg: ExperimentConfig) -> tuple[bool, list[str]]:
    """Build replication 0 and check its step sizes; returns (ok, lines)."""
    inst = gen_bpd(cfg.n, cfg.m, cfg.kappa, cfg.snr_db, cfg.alpha,
                   seed=seed_for(cfg.seed, 0, "problem"))
    problem = bpd_to_sharing(inst, cfg.nodes)
    lines = [f"experiment: {cfg.name}", f"algorithm:  {cfg.algorithm}"]
    algo = cfg.algorithm
    if algo == "centralized-pda":
        sigma = float(np.linalg.norm(
            np.hstack([a.R for a in problem.agents]), 2))
        lines.append(f"operator norm sigma = {sigma:.6g}; default steps "
                     f"nu_x = {1.0 / sigma:.6g}, nu_y = {1.0 / sigma:.6g}")
        lines.append("step certificate holds with equality")
        return True, lines
    if algo == "prox-jadmm":
        l1 = float(np.sum(np.abs(inst.r)))
        rho = 10.0 / l1
        floor = 1.01 * rho * max(
            float(np.linalg.norm(inst.R[:, sl], 2)) ** 2
            for sl in default_partition(inst.n, cfg.nodes)
        )
        init = 0.1 * cfg.nodes * rho
        lines.append(f"rho = {rho:.6g}; initial proximal weight {init:.6g}"
                     + (f" clamped to floor {floor:.6g}" if init < floor else ""))
        return True, lines
    dynamic = algo in ("dpda-d", "dpda-d-gamma-i")
    if dynamic:
        steps = _build_steps(cfg, problem)
        size = sum(problem.dims) + 2 * cfg.nodes * problem.m
        report = validate_step_sizes(problem, steps, dynamic=True,
                                     strict=cfg.strict,
                                     assemble=size <= 800)
    else:
        graph = _load_graph(cfg, directed=False,
                            seed=seed_for(cfg.seed, 0, "network"))
        steps = _build_steps(cfg, problem, graph)
        report = validate_step_sizes(problem, steps, graph=graph)
    for i, margin in enumerate(report.margins):
        lines.append(f"agent {i + 1}: certificate margin {margin:.6e}")
    if report.min_eig is not None:
        lines.append(f"saddle-point matrix minimum eigenvalue "
                     f"{report.min_eig:.6e}")
    lines.extend(report.failures)
    lines.append("step sizes OK" if report.ok else "step sizes REJECTED")
    return report.ok, lines


def bound_experiment(cfg: ExperimentConfig) -> float:
    """Resolve the multiplier-norm bound B for replication 0."""
    inst = gen_bpd(cfg.n, cfg.m, cfg.kappa, cfg.snr_db, cfg.alpha,
                   seed=seed_for(cfg.seed, 0, "problem"))
    return _resolve_b(cfg, inst)


def apply_overrides(cfg: ExperimentConfig, reps=None, seed=None,
                    out_dir=None) -> ExperimentConfig:
    changes = {}
    if reps is not None:
        if reps < 1:
            raise ConfigError("run", "reps", "must be >= 1")
        changes["reps"] = reps
    if seed is not None:
        changes["seed"] = seed
    if out_dir is not None:
        changes["out_dir"] = str(out_dir)
    return replace(cfg, **changes) if changes else cfg
