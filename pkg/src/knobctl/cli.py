"""Command-line pipeline: run, stats, predict, result.

    knobctl --bench=synth --input=all --outputDir=out --tasks=run,stats,predict,result

Each task reads and writes plain files under ``--outputDir`` so any task can
be rerun on its own once its upstream artifacts exist.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional, Sequence

from . import kernels
from .config import AppConfig, ConfigError, load_config
from .controller import (answer_requests, decision_record, model_controller, oracle_controller,
                         write_jsonl)
from .core import accurate_setting, enumerate_settings
from .dataset import (Dataset, ProfileError, ProfileSchema, distance_bounds, format_profile,
                      normalize_errors, per_input_pareto, read_profile, split, write_profile)
from .eval import (ConstraintGrid, ConstraintTable, emit_reports, inversion_table,
                   oracle_cost_gap, run_grid, speedup_table)
from .models import (evaluate_cost_accuracy, evaluate_fitness_accuracy, train_cost_tree,
                     train_fitness_m5, train_fitness_table, train_linear_cost,
                     train_linear_fitness)
from .models import serialize
from .synthbench import RunReport, SurfaceSpec, generate_dataset, run_external

log = logging.getLogger("knobctl")

TASKS = ("run", "stats", "predict", "result")
DEPENDS = {"run": (), "stats": ("run",), "predict": ("run",), "result": ("stats", "predict")}
DEFAULT_SEED = 1234
CONTROLLERS = ("exhaustive", "precimonious", "oracle")

PROFILE = "profile.tsv"
FAILURES = "failures.tsv"
RUN_META = "run.json"
STATS = "stats.json"
NORMALIZED = "normalized.tsv"
SPLIT = "split.json"
FEASIBLE = "feasible.tsv"
MODEL_DIR = "models"
MODELS = ("cost_tree", "cost_linear", "fitness_table", "fitness_m5", "fitness_linear")

# Artifacts whose presence satisfies a dependency on each task.
PRODUCES = {
    "run": (PROFILE, RUN_META),
    "stats": (STATS,),
    "predict": (SPLIT,) + tuple(os.path.join(MODEL_DIR, f"{m}.json") for m in MODELS),
}

EXIT_CODES = {"usage": 2, "config": 3, "dependency": 4, "data": 5, "harness": 6, "io": 7}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@dataclass(frozen=True)
class TaskPlan:
    tasks: tuple
    bench: str
    inputs: Optional[tuple]  # None means all
    out_dir: str
    seed: int
    workers: int = 1
    controller: Optional[str] = None


def parse_tasks(text: str) -> tuple:
    names = [t.strip() for t in text.split(",") if t.strip()]
    unknown = [t for t in names if t not in TASKS]
    if unknown or not names:
        raise CliError("usage", f"unknown tasks {unknown}; choose from {','.join(TASKS)}")
    return tuple(t for t in TASKS if t in names)


def check_dependencies(plan: TaskPlan) -> None:
    """Fail before any work if a task's inputs will not exist."""
    for pos, task in enumerate(plan.tasks):
        for dep in DEPENDS[task]:
            if dep in plan.tasks[:pos]:
                continue
            missing = [p for p in PRODUCES[dep] if not os.path.exists(os.path.join(plan.out_dir, p))]
            if missing:
                raise CliError("dependency",
                               f"task {task} needs {dep} outputs; missing "
                               + ", ".join(os.path.join(plan.out_dir, p) for p in missing))


def resolve_config(bench: str, path: Optional[str]) -> AppConfig:
    if path:
        if not os.path.exists(path):
            raise CliError("config", f"config file {path} not found")
        return load_config(path)
    ref = resources.files("knobctl").joinpath("benches", f"{bench}.cfg")
    if not ref.is_file():
        raise CliError("config", f"no bundled config for bench {bench!r}; pass --config")
    with resources.as_file(ref) as p:
        return load_config(p)


def _select(ids: Sequence[str], wanted: Optional[tuple]) -> List[str]:
    if wanted is None:
        return list(ids)
    unknown = [i for i in wanted if i not in ids]
    if unknown:
        raise CliError("data", f"unknown inputs {unknown}")
    return [i for i in ids if i in wanted]


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _load_profile(cfg: AppConfig, plan: TaskPlan) -> Dataset:
    path = os.path.join(plan.out_dir, PROFILE)
    if not os.path.exists(path):
        raise CliError("dependency", f"missing run output {path}")
    ds = read_profile(path, cfg.space, cfg.schema)
    if plan.inputs is not None:
        ds = ds.subset(_select(ds.inputs, plan.inputs))
    return ds


def _normalized(cfg, plan) -> Dataset:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return normalize_errors(_load_profile(cfg, plan))


def grid_of(cfg: AppConfig) -> ConstraintGrid:
    return ConstraintGrid.from_config(cfg.ebs_grid, cfg.pbs_grid)


# -- tasks ---------------------------------------------------------------------


def task_run(cfg: AppConfig, plan: TaskPlan) -> RunReport:
    space = cfg.space
    profile = os.path.join(plan.out_dir, PROFILE)
    if cfg.harness is not None:
        if not cfg.inputs:
            raise CliError("config", "[HARNESS] given but no [INPUTS] declared")
        ids = _select(sorted(cfg.inputs), plan.inputs)
        try:
            report = run_external(cfg.harness, space, {i: cfg.inputs[i] for i in ids},
                                  schema=cfg.schema, profile_path=profile, workers=plan.workers)
        except ValueError as exc:
            raise CliError("harness", str(exc)) from None
        swept = space.size
    elif cfg.synth is not None:
        s = cfg.synth
        spec = SurfaceSpec.default(space, s.feature_dim, s.input_sensitivity, s.noise, plan.seed)
        ds = generate_dataset(spec, s.n_inputs, s.settings)
        ds = ds.subset(_select(ds.inputs, plan.inputs))
        write_profile(ds, cfg.schema, profile)
        report = RunReport(ds, [], launched=0)
        swept = space.size if s.settings == "all" else int(s.settings)
    else:
        raise CliError("config", "config has neither a [HARNESS] nor a [SYNTH] section")
    with open(os.path.join(plan.out_dir, FAILURES), "w") as fh:
        fh.write("\t".join(["input_id", *space.names, "reason"]) + "\n")
        for f in report.failures:
            vals = [repr(v) for v in space.values(f.setting)]
            fh.write("\t".join([f.input_id, *vals, f.reason.replace("\t", " ").replace("\n", " ")]) + "\n")
    _dump_json({"swept_settings": swept, "records": len(report.dataset.records),
                "failures": len(report.failures)}, os.path.join(plan.out_dir, RUN_META))
    log.info("run: %d records, %d launched, %d failures", len(report.dataset.records),
             report.launched, len(report.failures))
    return report


def _failure_counts(plan) -> Dict[str, int]:
    path = os.path.join(plan.out_dir, FAILURES)
    counts: Dict[str, int] = {}
    if os.path.exists(path):
        with open(path) as fh:
            next(fh, None)
            for line in fh:
                if line.strip():
                    iid = line.split("\t", 1)[0]
                    counts[iid] = counts.get(iid, 0) + 1
    return counts


def task_stats(cfg: AppConfig, plan: TaskPlan) -> dict:
    ds = _normalized(cfg, plan)
    with open(os.path.join(plan.out_dir, RUN_META)) as fh:
        meta = json.load(fh)
    bounds = distance_bounds(ds)
    fails = _failure_counts(plan)
    errors = [r.error for r in ds.records]
    per_input = {
        i: {"d_min": bounds[i][0], "d_max": bounds[i][1], "records": len(ds.records_for(i)),
            "failures": fails.get(i, 0), "degenerate": i in ds.degenerate}
        for i in ds.inputs
    }
    summary = {
        "inputs": len(ds.inputs),
        "records": len(ds.records),
        "failures": sum(fails.values()),
        "swept_settings": meta["swept_settings"],
        "degenerate_inputs": sorted(ds.degenerate),
        "errors_in_unit_interval": all(0.0 <= e <= 1.0 for e in errors),
        "per_input": per_input,
    }
    if not summary["errors_in_unit_interval"]:
        raise CliError("data", "normalized errors escaped [0, 1]")
    _dump_json(summary, os.path.join(plan.out_dir, STATS))
    schema = cfg.schema
    text = format_profile(ds, schema).splitlines()
    out = [text[0] + "\terror"]
    recs = [r for i in ds.inputs for r in ds.records_for(i)]
    out += [line + "\t" + repr(r.error) for line, r in zip(text[1:], recs)]
    with open(os.path.join(plan.out_dir, NORMALIZED), "w") as fh:
        fh.write("\n".join(out) + "\n")
    return summary


def task_predict(cfg: AppConfig, plan: TaskPlan) -> dict:
    ds = _normalized(cfg, plan)
    try:
        parts = split(ds, cfg.train_ratio, plan.seed)
    except ValueError as exc:
        raise CliError("data", f"cannot split training inputs: {exc}") from None
    grid = grid_of(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        models = {
            "cost_tree": train_cost_tree(parts.train),
            "cost_linear": train_linear_cost(parts.train),
            "fitness_table": train_fitness_table(parts.train, grid.epsilons),
            "fitness_m5": train_fitness_m5(parts.train, grid.epsilons),
            "fitness_linear": train_linear_fitness(parts.train, grid.epsilons),
        }
    mdir = os.path.join(plan.out_dir, MODEL_DIR)
    os.makedirs(mdir, exist_ok=True)
    for name, model in models.items():
        serialize.save(model, os.path.join(mdir, f"{name}.json"))
    _dump_json({"seed": plan.seed, "ratio": cfg.train_ratio,
                "train": list(parts.train.inputs), "test": list(parts.test.inputs)},
               os.path.join(plan.out_dir, SPLIT))
    table = models["fitness_table"]
    cells = [[int((table.fitness_all(c.epsilon) >= c.pi - 1e-9).sum()) for _, _, c in row]
             for row in _rows(grid)]
    with open(os.path.join(plan.out_dir, FEASIBLE), "w") as fh:
        fh.write(ConstraintTable(grid, cells, "feasible").to_tsv(digits=0))
    return models


def _rows(grid):
    cells = list(grid.cells())
    n = len(grid.epsilons)
    return [cells[k:k + n] for k in range(0, len(cells), n)]


def load_models(plan: TaskPlan) -> dict:
    out = {}
    for name in MODELS:
        path = os.path.join(plan.out_dir, MODEL_DIR, f"{name}.json")
        if not os.path.exists(path):
            raise CliError("dependency", f"missing predict output {path}")
        out[name] = serialize.load(path)
    return out


def task_result(cfg: AppConfig, plan: TaskPlan) -> dict:
    for p in (STATS, SPLIT):
        if not os.path.exists(os.path.join(plan.out_dir, p)):
            raise CliError("dependency", f"missing upstream artifact {os.path.join(plan.out_dir, p)}")
    models = load_models(plan)
    ds = _normalized(cfg, plan)
    with open(os.path.join(plan.out_dir, SPLIT)) as fh:
        parts = json.load(fh)
    test = ds.subset([i for i in parts["test"] if i in ds.inputs])
    grid = grid_of(cfg)
    space = cfg.space
    cost, table = models["cost_tree"], models["fitness_table"]
    controllers = {
        "exhaustive": model_controller(cost, table, space, "exhaustive"),
        "precimonious": model_controller(cost, table, space, "precimonious"),
        "m5": model_controller(cost, models["fitness_m5"], space, "exhaustive"),
        "linear": model_controller(models["cost_linear"], models["fitness_linear"], space, "exhaustive"),
    }
    primary = plan.controller or "exhaustive"
    if plan.controller is not None:
        controllers = {k: v for k, v in controllers.items() if k == plan.controller}
    oracle = oracle_controller(test)
    oracle_dec = run_grid(test, oracle, grid)
    decisions = {name: run_grid(test, ctl, grid) for name, ctl in controllers.items()}
    decisions["oracle"] = oracle_dec

    summary = {"backend": kernels.BACKEND, "primary_controller": primary,
               "test_inputs": list(test.inputs), "oracle_cost_gap": {}, "controllers": {}}
    tables = {}
    for name, dec in decisions.items():
        sp = speedup_table(test, None, grid, decisions=dec)
        inv = inversion_table(test, None, None, grid, decisions=dec, oracle_decisions=oracle_dec)
        tables[name] = (sp, inv)
        with open(os.path.join(plan.out_dir, f"speedups_{name}.tsv"), "w") as fh:
            fh.write(sp.to_tsv())
        if name != "oracle":
            with open(os.path.join(plan.out_dir, f"inversions_{name}.tsv"), "w") as fh:
                fh.write(inv.to_tsv())
            summary["oracle_cost_gap"][name] = oracle_cost_gap(test, dec, oracle_dec)
        summary["controllers"][name] = {
            "feasible_cells": int((~sp.na_mask()).sum()),
            "na_cells": int(sp.na_mask().sum()),
        }

    cost_pairs = evaluate_cost_accuracy(cost, test)
    fit_acc = evaluate_fitness_accuracy(table, test, grid.epsilons)
    summary["fitness_under_prediction_fraction"] = fit_acc.under_prediction_fraction
    summary["fitness_mean_abs_deviation"] = fit_acc.mean_abs_deviation
    summary["fitness_settings_skipped"] = fit_acc.skipped
    fitness_points = [(space.values(k), e, p, m) for k, e, p, m in fit_acc.points]
    pareto = {i: per_input_pareto(ds, i) for i in ds.inputs}
    sp, inv = tables[primary]
    emit_reports(plan.out_dir, sp, inv, cost_pairs, fitness_points, pareto, space.names)

    with open(os.path.join(plan.out_dir, "decisions.jsonl"), "w") as fh:
        for name, dec in decisions.items():
            for r, c, con in grid.cells():
                for i in test.inputs:
                    write_jsonl([decision_record(dec[(r, c)][i], space, controller=name,
                                                 input_id=i, epsilon=con.epsilon, pi=con.pi)], fh)
    _dump_json(summary, os.path.join(plan.out_dir, "summary.json"))
    return summary


def task_requests(cfg: AppConfig, plan: TaskPlan, path: str) -> int:
    models = load_models(plan)
    search = plan.controller if plan.controller in ("exhaustive", "precimonious") else "exhaustive"
    with open(path) as fh, open(os.path.join(plan.out_dir, "responses.jsonl"), "w") as out:
        try:
            records = list(answer_requests(fh, models["cost_tree"], models["fitness_table"], search))
        except ValueError as exc:
            raise CliError("data", str(exc)) from None
        write_jsonl(records, out)
    return len(records)


RUNNERS = {"run": task_run, "stats": task_stats, "predict": task_predict, "result": task_result}


# -- entry point -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="knobctl", description="Open-loop knob control for tunable approximate programs.")
    p.add_argument("--bench", default="synth", help="bundled benchmark name (default: synth)")
    p.add_argument("--config", help="application config file; overrides --bench lookup")
    p.add_argument("--input", default="all", help="'all' or a comma-separated list of input ids")
    p.add_argument("--outputDir", "--output-dir", dest="output_dir", required=True,
                   help="directory for all artifacts")
    p.add_argument("--tasks", default=",".join(TASKS), help="comma-separated subset of run,stats,predict,result")
    p.add_argument("--seed", type=int, help=f"split/generation seed (default: config SEED or {DEFAULT_SEED})")
    p.add_argument("--workers", type=int, default=1, help="parallel profiling runs")
    p.add_argument("--controller", choices=CONTROLLERS,
                   help="controller for speedups.tsv/inversions.tsv; default runs all")
    p.add_argument("--requests", help="JSON-lines decision requests to answer with the trained models")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_cli(argv: Optional[Sequence[str]] = None) -> TaskPlan:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.workers < 1:
        raise CliError("usage", "--workers must be >= 1")
    tasks = parse_tasks(args.tasks)
    cfg = resolve_config(args.bench, args.config)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg.seed is not None else DEFAULT_SEED)
    inputs = None if args.input.strip() == "all" else tuple(
        s.strip() for s in args.input.split(",") if s.strip())
    plan = TaskPlan(tasks, args.bench, inputs, args.output_dir, seed, args.workers, args.controller)
    check_dependencies(plan)
    if args.requests:
        if "predict" not in tasks:
            for p in PRODUCES["predict"]:
                if not os.path.exists(os.path.join(plan.out_dir, p)):
                    raise CliError("dependency", f"--requests needs predict outputs; missing {p}")
        if not os.path.exists(args.requests):
            raise CliError("io", f"request file {args.requests} not found")
    os.makedirs(plan.out_dir, exist_ok=True)
    for task in plan.tasks:
        RUNNERS[task](cfg, plan)
    if args.requests:
        task_requests(cfg, plan, args.requests)
    return plan


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        run_cli(argv)
    except CliError as exc:
        print(f"knobctl: error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except ConfigError as exc:
        print(f"knobctl: error: config: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except ProfileError as exc:
        print(f"knobctl: error: data: {exc}", file=sys.stderr)
        return EXIT_CODES["data"]
    except OSError as exc:
        print(f"knobctl: error: io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
