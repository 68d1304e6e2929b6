"""Command-line entry point: ``partition-bandits <command> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from ..expert_advice import ExpertSetModel, PolicyExpert, expert_set_select, simulate_exp4
from ..inference import LikelihoodWindow, fit_mle
from ..partition_model import CATALOG_NAMES
from ..risk import trajectory_risk
from ..stimulus import build_five_four_set, generate_context_sequence
from .campaign import (
    build_catalog,
    default_generator_theta,
    generate_campaign,
    generator_theta,
    load_campaign,
    load_trajectory_files,
)
from .config import ExperimentConfig
from .io import write_json, write_rows
from .sweeps import run_selection_batch, sweep_holdout, sweep_penalty

DEFAULT_EXPERT_SETS = {"PatternSwitch": ["ByPattern", "ByPatternExc"], "Flat": ["OneForAll"]}


def _items(cfg: ExperimentConfig):
    if cfg.trajectories:
        return load_trajectory_files(cfg.trajectories)
    if cfg.campaign:
        return load_campaign(cfg.campaign)
    raise ValueError("config needs either 'campaign' (a directory) or 'trajectories' (CSV paths)")


def cmd_simulate(cfg, out: Path):
    items = generate_campaign(cfg, out)
    print(f"wrote {len(items)} trajectories to {out}")


def cmd_fit(cfg, out: Path):
    catalog = build_catalog(cfg)
    opt = cfg.optimizer_config()
    results = []
    for entry, traj in _items(cfg):
        window = LikelihoodWindow(*cfg.fit_window) if cfg.fit_window else LikelihoodWindow.full(traj.n)
        for spec in catalog:
            fit = fit_mle(spec, traj, window, opt)
            results.append({"trajectory": entry.file, "generator": entry.generator, **fit.to_json()})
    write_json({"fits": results}, out / "fits.json")
    print(f"wrote {len(results)} fits to {out / 'fits.json'}")


def _write_reports(reports, entries, out: Path):
    rows = []
    for e, r in zip(entries, reports):
        for row in r.csv_rows():
            rows.append({"trajectory": e.file, **row})
    write_rows(rows, ["trajectory", "model", "D", "train_ll", "test_ll", "criterion", "penalty", "selected"], out / "scores.csv")
    write_json({"reports": [{"trajectory": e.file, **r.to_json()} for e, r in zip(entries, reports)]}, out / "reports.json")


def cmd_select(cfg, out: Path, method: str):
    items = _items(cfg)
    entries = [e for e, _ in items]
    trajs = [t for _, t in items]
    reports, matrix = run_selection_batch(
        build_catalog(cfg), trajs, method, cfg.split_N, cfg.c, cfg.stop_time, cfg.optimizer_config(), cfg.workers
    )
    _write_reports(reports, entries, out)
    Path(out / "frequencies.csv").write_text(matrix.to_csv())
    for e, r in zip(entries, reports):
        print(f"{e.file}: {r.selected}" + (" (tie)" if r.tie_broken else ""))


def cmd_sweep_n(cfg, out: Path):
    trajs = [t for _, t in _items(cfg)]
    result = sweep_holdout(build_catalog(cfg), trajs, cfg.n_grid, cfg.optimizer_config(), cfg.workers)
    write_rows(result.csv_rows(), ["N", "generator", "selected", "frequency"], out / "sweep_n.csv")
    write_json(result.to_json(), out / "sweep_n.json")
    print(f"swept N over {result.values}; wrote {out / 'sweep_n.csv'}")


def cmd_sweep_c(cfg, out: Path):
    trajs = [t for _, t in _items(cfg)]
    result = sweep_penalty(build_catalog(cfg), trajs, cfg.c_grid, cfg.stop_time, cfg.optimizer_config(), cfg.workers)
    write_rows(result.csv_rows(), ["c", "generator", "selected", "frequency"], out / "sweep_c.csv")
    write_json(result.to_json(), out / "sweep_c.json")
    print(f"swept c over {len(result.values)} values with {result.n_fits} fits; wrote {out / 'sweep_c.csv'}")


def cmd_risk(cfg, out: Path):
    """Risk of every candidate (at its configured or default theta) against one generator."""
    r = dict(cfg.risk)
    gen_name = r.get("generator", "OnePerItem")
    if gen_name not in CATALOG_NAMES:
        raise ValueError(f"risk generator {gen_name} not in the catalog")
    gen = build_catalog(cfg, [gen_name])[0]
    catalog = {s.name: s for s in build_catalog(cfg)}
    gen_theta = generator_theta(cfg, gen)
    stimuli = build_five_four_set()
    contexts = generate_context_sequence(stimuli, cfg.context_schedule())
    window = LikelihoodWindow(*r["window"]) if "window" in r else LikelihoodWindow.full(cfg.n)
    cand_theta = r.get("candidate_theta", {})
    rows, estimates = [], {}
    for name, spec in catalog.items():
        theta = spec.theta(cand_theta[name]) if name in cand_theta else default_generator_theta(spec, cfg.n)
        est = trajectory_risk(
            (gen, gen_theta), (spec, theta), contexts, stimuli.reward, window,
            int(r.get("n_trajectories", 200)), cfg.master_seed, stimuli.n_actions,
        )
        estimates[name] = est.to_json()
        rows.append({
            "candidate": name, "kl": repr(est.kl), "kl_se": repr(est.kl_se),
            "hellinger_sq": repr(est.hellinger_sq), "hellinger_se": repr(est.hellinger_se),
        })
    write_rows(rows, ["candidate", "kl", "kl_se", "hellinger_sq", "hellinger_se"], out / "risk.csv")
    write_json({"generator": gen_name, "estimates": estimates}, out / "risk.json")
    print(f"wrote {out / 'risk.csv'}")


def expert_models(cfg: ExperimentConfig) -> list[ExpertSetModel]:
    e = dict(cfg.experts)
    catalog = {s.name: s for s in build_catalog(cfg, CATALOG_NAMES)}
    sets = e.get("sets", DEFAULT_EXPERT_SETS)
    models = []
    for set_name, members in sets.items():
        unknown = [m for m in members if m not in catalog]
        if unknown:
            raise ValueError(f"expert set {set_name}: unknown models {unknown}")
        experts = [PolicyExpert(catalog[m], default_generator_theta(catalog[m], cfg.n)) for m in members]
        models.append(ExpertSetModel(set_name, experts, horizon=cfg.n, feedback_mode=e.get("feedback_mode", "loss")))
    return models


def cmd_experts_select(cfg, out: Path):
    """Simulate Exp4 agents from one expert set and select among all sets."""
    e = dict(cfg.experts)
    models = expert_models(cfg)
    by_name = {m.name: m for m in models}
    gen_name = e.get("generator", models[0].name)
    if gen_name not in by_name:
        raise ValueError(f"expert generator {gen_name} is not a configured set")
    theta = float(e.get("theta", 0.5 * math.sqrt(cfg.n)))
    runs = int(e.get("runs", 50))
    stimuli = build_five_four_set()
    contexts = generate_context_sequence(stimuli, cfg.context_schedule())
    seeds = np.random.SeedSequence(cfg.master_seed).spawn(runs)
    opt = cfg.optimizer_config()
    reports = []
    for s in seeds:
        traj = simulate_exp4(by_name[gen_name], theta, contexts, stimuli.reward, s, stimuli.n_actions)
        reports.append(expert_set_select(models, traj, cfg.stop_time, opt))
    hits = sum(r.selected == gen_name for r in reports)
    write_json(
        {"generator": gen_name, "theta": theta, "runs": runs, "recovery": hits / runs,
         "reports": [r.to_json() for r in reports]},
        out / "experts.json",
    )
    print(f"{gen_name} recovered in {hits}/{runs} runs")


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "sweep-n": cmd_sweep_n,
    "sweep-c": cmd_sweep_c,
    "risk": cmd_risk,
    "experts-select": cmd_experts_select,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partition-bandits")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "select", "sweep-n", "sweep-c", "risk", "experts-select"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="overrides master_seed")
        if name == "select":
            p.add_argument("--method", choices=("holdout", "penalized"), required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_seed(args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(cfg.to_dict(), out / "config.json")
        if args.command == "select":
            cmd_select(cfg, out, args.method)
        else:
            COMMANDS[args.command](cfg, out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
