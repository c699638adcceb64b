"""Command-line front end: ``resopt {gen,thresholds,optimize,simulate,report,sweep}``.

Exit codes: 0 success, 1 usage/config/input error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, kernels
from .analysis import StrategySet, pareto_filter, write_rows_csv, write_strategies_csv
from .config import ConfigError, ExperimentConfig
from .hydroseries import SeriesError, water_year_bounds
from .moea import RunConfig
from .objectives import MefBasis, ObjectiveVector, evaluate_historical, write_objectives_csv
from .pipeline import (
    InputError,
    build_flood,
    build_mef,
    build_reservoir,
    build_scenario,
    ensemble_path,
    fit_model,
    gen_config,
    load_ensemble,
    load_history,
    monthly_validation,
    write_manifest,
)
from .policy_search import archive_policies, optimize
from .reservoir import Formulation, PolicyParams, simulate
from .synthgen import generate, save_packed, write_ensemble_dir

logger = logging.getLogger("resopt")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2


class ValidationFailure(RuntimeError):
    """Outputs were produced but failed their validation checks (exit code 2)."""


def _formulations(args, cfg: ExperimentConfig) -> list[Formulation]:
    names = args.formulation or cfg.optimization.formulations
    out = []
    for n in names:
        f = Formulation.parse(n)
        if f not in out:
            out.append(f)
    return out


def _run_config(cfg: ExperimentConfig, seeds=None) -> RunConfig:
    o = cfg.optimization
    return RunConfig(nfe=o.nfe, population_size=o.population_size,
                     seeds=tuple(seeds if seeds is not None else o.seeds),
                     operators=tuple(o.operators), adaptive=o.adaptive, restarts=o.restarts,
                     checkpoint_interval=o.checkpoint_interval)


def _seeds(args, cfg: ExperimentConfig) -> list[int]:
    return [args.seed] if args.seed is not None else list(cfg.optimization.seeds)


# --- gen -----------------------------------------------------------------------

def cmd_gen(args, cfg: ExperimentConfig, out: Path) -> int:
    if args.seed is not None:
        cfg = cfg.with_updates(generator={"seed": args.seed})
    hist = load_history(cfg)
    model = fit_model(cfg, hist)
    gc = gen_config(cfg)
    ens = generate(model, gc)
    path = ensemble_path(cfg, out)
    path.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        write_ensemble_dir(ens, path.with_suffix(""), gc.seed, model.digest())
        path = path.with_suffix("")
    else:
        save_packed(ens, path)
    rows, ok = monthly_validation(hist, ens, gc.jitter_floor)
    report = out / "generator_validation.csv"
    write_rows_csv(report, rows)
    write_manifest(out, "gen", cfg, {"inflow": cfg.inflow_path()}, {"generator": gc.seed},
                   [path, report], {"model_hash": model.digest(), "realizations": ens.n_realizations,
                                    "steps": ens.steps})
    print(f"generated {ens.n_realizations} realizations x {ens.steps} days -> {path}")
    if not ok:
        failed = [r["month"] for r in rows if not r["pass"]]
        raise ValidationFailure(f"generator validation failed for months {failed}")
    return EXIT_OK


# --- thresholds ------------------------------------------------------------------

def cmd_thresholds(args, cfg: ExperimentConfig, out: Path) -> int:
    hist = load_history(cfg)
    fraction = args.fraction[0] if args.fraction else None
    mef = build_mef(cfg, hist, fraction)
    flood = build_flood(cfg)
    path = out / "mef_schedule.csv"
    mef.to_csv(path)
    inputs = {"inflow": cfg.inflow_path()}
    if cfg.reservoir.flood_threshold <= 0:
        inputs["releases"] = cfg.releases_path()
    write_manifest(out, "thresholds", cfg, inputs, {}, [path],
                   {"method": mef.method, "annual_requirement_mm3": mef.annual_requirement,
                    "flood_threshold_mm3_per_day": flood.ft})
    print(f"method: {mef.method}")
    print(f"annual MEF requirement: {mef.annual_requirement:.1f} Mm3")
    print(f"flood threshold: {flood.ft:.2f} Mm3/day")
    return EXIT_OK


# --- optimize --------------------------------------------------------------------

def _archive_csv(path: Path, result, seed: int) -> None:
    run = next(r for r in result.runs if r.seed == seed)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        n = run.archive.genomes().shape[1] if len(run.archive) else 0
        w.writerow([f"g{i + 1}" for i in range(n)] + [f"min_{x}" for x in analysis.OBJECTIVE_NAMES])
        for m in run.archive.members:
            w.writerow([repr(float(v)) for v in np.concatenate([m.genome, m.objectives])])


def _write_optimize_outputs(form_dir: Path, form: Formulation, result) -> list[Path]:
    written = []
    for r in result.runs:
        log = form_dir / f"seed_{r.seed}_log.jsonl"
        log.write_text("".join(json.dumps(row, sort_keys=True) + "\n" for row in r.log))
        arch = form_dir / f"seed_{r.seed}_archive.csv"
        _archive_csv(arch, result, r.seed)
        usage = form_dir / f"seed_{r.seed}_operators.json"
        usage.write_text(json.dumps({"usage": r.operator_usage, "restarts": r.restarts,
                                     "nfe": r.nfe}, sort_keys=True) + "\n")
        written += [log, arch, usage]
    merged = form_dir / "merged.csv"
    write_strategies_csv(merged, analysis.strategies_from_result(result, form, form.value))
    traj = form_dir / "hv_trajectory.csv"
    ref = result.reference if result.reference is not None else np.full(4, np.nan)
    rows = [{"formulation": form.value, "seed": seed, "nfe": nfe, "hypervolume": hv,
             **{f"ref_{n}": float(v) for n, v in zip(analysis.OBJECTIVE_NAMES, ref)}}
            for seed, traj_rows in result.trajectories.items() for nfe, hv in traj_rows]
    write_rows_csv(traj, rows)
    return written + [merged, traj]


def cmd_optimize(args, cfg: ExperimentConfig, out: Path) -> int:
    sc = build_scenario(cfg, out)
    rc = _run_config(cfg, _seeds(args, cfg))
    ec = sc.eval_config(args.threads)
    outputs = []
    for form in _formulations(args, cfg):
        form_dir = out / "optimize" / form.value
        ckpt = form_dir / "checkpoints"
        ckpt.mkdir(parents=True, exist_ok=True)
        result = optimize(form, sc.reservoir, ec, rc, tuple(cfg.optimization.epsilons),
                          cfg.optimization.rbf_count, cfg.optimization.hv_samples,
                          checkpoint_dir=ckpt, resume=args.resume, stop_at=args.stop_at)
        if args.stop_at is not None and any(r.nfe < rc.nfe for r in result.runs):
            print(f"{form.value}: stopped at {args.stop_at} evaluations; checkpoints in {ckpt}")
            continue
        outputs += _write_optimize_outputs(form_dir, form, result)
        print(f"{form.value}: merged archive of {len(result.merged)} strategies "
              f"from seeds {list(rc.seeds)}")
    write_manifest(out, "optimize", cfg, sc.inputs(), {"optimization": list(rc.seeds)}, outputs,
                   {"ns_denominator_mm3": sc.reservoir.ns_denominator})
    return EXIT_OK


# --- simulate --------------------------------------------------------------------

def _load_policy(path: Path, label: str | None) -> tuple[PolicyParams, Formulation | None]:
    if not path.is_file():
        raise InputError(f"policy file not found: {path}")
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        try:
            return PolicyParams(tuple(data["centers"]), tuple(data["radii"])), (
                Formulation.parse(data["formulation"]) if "formulation" in data else None)
        except KeyError as exc:
            raise InputError(f"{path}: policy JSON needs key {exc}") from None
    strategies = analysis.read_strategies_csv(path)
    for s in strategies:
        if label is None or s.label == label:
            return s.params, s.formulation
    raise InputError(f"{path}: no strategy labelled {label!r}")


def cmd_simulate(args, cfg: ExperimentConfig, out: Path) -> int:
    if not args.policy:
        raise InputError("simulate needs --policy")
    params, policy_form = _load_policy(Path(args.policy), args.label)
    form = Formulation.parse(args.formulation[0]) if args.formulation else (
        policy_form or Formulation.MEF_FIRST)
    hist = load_history(cfg.with_updates(generator={"fit_first_year": 0, "fit_last_year": 0}))
    first, last = cfg.simulation.first_water_year, cfg.simulation.last_water_year
    try:
        window = hist.window(water_year_bounds(first)[0], water_year_bounds(last)[1])
    except SeriesError as exc:
        raise InputError(f"simulation window {first}-{last}: {exc}") from None
    ens_file = ensemble_path(cfg, out)
    # normalize storage exactly as during optimization when the training ensemble exists
    max_inflow = float(load_ensemble(ens_file).flows.max()) if ens_file.exists() else float(window.values.max())
    res = build_reservoir(cfg, build_mef(cfg, hist), build_flood(cfg), max_inflow)
    trace = simulate(window, cfg.reservoir.s0_fraction * res.live_capacity, form, params, res)
    sim_dir = out / "simulate"
    sim_dir.mkdir(parents=True, exist_ok=True)
    trace_path = sim_dir / f"trace_{form.value}_{first}_{last}.csv"
    trace.to_csv(trace_path)
    vec = evaluate_historical(trace, res, MefBasis(cfg.evaluation.mef_basis))
    obj_path = sim_dir / f"objectives_{form.value}_{first}_{last}.csv"
    write_objectives_csv(obj_path, [vec], [form.value])
    inputs = {"inflow": cfg.inflow_path(), "policy": Path(args.policy)}
    if ens_file.exists():
        inputs["ensemble"] = ens_file
    write_manifest(out, "simulate", cfg, inputs, {}, [trace_path, obj_path],
                   {"formulation": form.value, "window": [first, last],
                    "ns_denominator_mm3": res.ns_denominator})
    print(f"{form.value} {first}-{last}: " + ", ".join(
        f"{n}={v:.4g}" for n, v in zip(analysis.OBJECTIVE_NAMES, vec.as_tuple())))
    return EXIT_OK


# --- report ----------------------------------------------------------------------

def cmd_report(args, cfg: ExperimentConfig, out: Path) -> int:
    opt_dir = out / "optimize"
    merged_files = sorted(opt_dir.glob("*/merged.csv")) if opt_dir.is_dir() else []
    sets = [analysis.read_strategies_csv(p) for p in merged_files]
    trained = StrategySet(s for st in sets for s in st)
    if not len(trained):
        raise InputError(f"no optimized archives under {opt_dir} (run `resopt optimize` first)")
    sc = build_scenario(cfg, out)
    e = cfg.evaluation
    seed = args.seed if args.seed is not None else e.reevaluation_seed
    model = fit_model(cfg, sc.history)
    big = replace(gen_config(cfg, seed), realizations=e.reevaluation_realizations)
    basis = MefBasis(e.mef_basis)
    fresh = analysis.reevaluate_generated(trained, sc.reservoir, model, big, basis,
                                          cfg.reservoir.s0_fraction, args.threads,
                                          e.reevaluation_chunk)
    nd_all = pareto_filter(fresh.minimized())
    nd_within = np.zeros(len(fresh), dtype=bool)
    for form in Formulation:
        idx = [i for i, s in enumerate(fresh) if s.formulation is form]
        if idx:
            nd_within[idx] = pareto_filter(fresh.minimized()[idx])
    rep = out / "report"
    rep.mkdir(parents=True, exist_ok=True)
    strategies_path = rep / "strategies.csv"
    write_strategies_csv(strategies_path, fresh, {"nondominated_all": nd_all,
                                                  "nondominated_within": nd_within})
    trained_path = rep / "strategies_training.csv"
    write_strategies_csv(trained_path, trained)

    traj_rows = []
    for p in sorted(opt_dir.glob("*/hv_trajectory.csv")):
        with p.open(newline="") as fh:
            traj_rows += list(csv.DictReader(fh))
    traj_path = rep / "hv_trajectory.csv"
    write_rows_csv(traj_path, traj_rows)

    selection, monthly_rows = {}, []
    sel = cfg.selection
    for form in Formulation:
        subset = StrategySet(s for s, nd in zip(fresh, nd_within) if nd and s.formulation is form)
        if not len(subset):
            continue
        try:
            choice = analysis.select_strategy(subset, sel.bounds(), sel.priorities)
        except analysis.SelectionError as exc:
            selection[form.value] = {"error": str(exc)}
            continue
        selection[form.value] = {"label": choice.label, "centers": list(choice.params.centers),
                                 "radii": list(choice.params.radii),
                                 **dict(zip(analysis.OBJECTIVE_NAMES, choice.objectives.as_tuple()))}
        monthly = analysis.monthly_mef_reliability(choice.params, form, sc.reservoir, sc.ensemble,
                                                   basis, cfg.reservoir.s0_fraction, args.threads)
        monthly_rows += [{"formulation": form.value, "label": choice.label, "month": m,
                          "mef_reliability_pct": v} for m, v in monthly.items()]
    monthly_path = rep / "monthly_reliability.csv"
    write_rows_csv(monthly_path, monthly_rows)
    sel_path = rep / "selection.json"
    sel_path.write_text(json.dumps(selection, indent=2, sort_keys=True) + "\n")

    inputs = {**sc.inputs(), **{f"archive_{p.parent.name}": p for p in merged_files}}
    write_manifest(out, "report", cfg, inputs, {"reevaluation": seed},
                   [strategies_path, trained_path, traj_path, monthly_path, sel_path],
                   {"reevaluation_realizations": e.reevaluation_realizations,
                    "hv_reference_margin": analysis.HV_MARGIN, "hv_seed": analysis.HV_SEED})
    print(f"re-evaluated {len(fresh)} strategies on {e.reevaluation_realizations} realizations; "
          f"{int(nd_all.sum())} nondominated across formulations -> {rep}")
    return EXIT_OK


# --- sweep -----------------------------------------------------------------------

def cmd_sweep(args, cfg: ExperimentConfig, out: Path) -> int:
    fractions = list(args.fraction) if args.fraction else list(cfg.sweep.fractions)
    if any(not 0 < f <= 1 for f in fractions):
        raise ConfigError("--fraction values must lie in (0, 1]")
    sc = build_scenario(cfg, out)
    rc = _run_config(cfg, _seeds(args, cfg))
    rows = analysis.sensitivity_sweep(fractions, sc.history, sc.reservoir, sc.eval_config(args.threads),
                                      rc, tuple(cfg.optimization.epsilons), _formulations(args, cfg),
                                      cfg.optimization.rbf_count)
    sw = out / "sweep"
    sw.mkdir(parents=True, exist_ok=True)
    summary = sw / "sensitivity_summary.csv"
    write_rows_csv(summary, [r.summary() for r in rows])
    members = sw / "sweep_strategies.csv"
    combined = StrategySet(s for r in rows for s in r.strategies)
    write_strategies_csv(members, combined)
    write_manifest(out, "sweep", cfg, sc.inputs(), {"optimization": list(rc.seeds)},
                   [summary, members], {"fractions": fractions})
    for r in rows:
        s = r.summary()
        print(f"fraction {r.fraction:g} {r.formulation.value}: {s['n_strategies']} strategies, "
              f"median MEF reliability {s['mef_rel_pct_median']:.2f}%")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "thresholds": cmd_thresholds,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment TOML file (defaults apply when omitted)")
    common.add_argument("--out", help="output directory (overrides [paths].out)")
    common.add_argument("--seed", type=int, help="override the command's seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results unchanged)")
    common.add_argument("--formulation", action="append", choices=["mef-first", "demand-first"],
                        help="restrict to one formulation (repeatable)")
    common.add_argument("--fraction", action="append", type=float,
                        help="MEF fraction of MAF (repeatable for sweep)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="resopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    gen = sub.add_parser("gen", parents=[common], help="fit the generator and write an ensemble")
    gen.add_argument("--format", choices=["packed", "csv"], default="packed",
                     help="single binary container or one CSV per realization")
    sub.add_parser("thresholds", parents=[common], help="MEF schedule and flood threshold")
    opt = sub.add_parser("optimize", parents=[common], help="multi-seed policy search")
    opt.add_argument("--resume", action="store_true", help="continue from saved checkpoints")
    opt.add_argument("--stop-at", type=int, help="checkpoint and stop after this many evaluations")
    sim = sub.add_parser("simulate", parents=[common], help="trace a policy on the historical window")
    sim.add_argument("--policy", help="policy JSON or strategies CSV")
    sim.add_argument("--label", help="strategy label when --policy is a strategies CSV")
    sub.add_parser("report", parents=[common], help="re-evaluate, sort and summarize archives")
    sub.add_parser("sweep", parents=[common], help="MEF-fraction sensitivity sweep")
    return parser


def _version() -> str:
    from . import __version__
    return __version__


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = ExperimentConfig.load(args.config)
        out = cfg.out_dir(args.out)
        out.mkdir(parents=True, exist_ok=True)
        logger.info("kernel backend: %s", kernels.BACKEND)
        return COMMANDS[args.command](args, cfg, out)
    except (ConfigError, InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationFailure, SeriesError, ValueError) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("interrupted; rerun with --resume to continue from the last checkpoint", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
