"""Command-line entry point.

Subcommands cover the whole workflow: ``simulate`` renders benchmark
traverses, ``build-map`` turns a reference traverse into a map, ``lcd`` and
``wakeup`` run the two localization tasks, ``eval`` scores results against
ground truth, ``run`` chains all of that for one scenario and records a
manifest, ``rerun`` replays a manifest byte for byte, and ``bench`` times
the inference hot path.

File-producing commands are quiet on success; set ``TOPOLOC_VERBOSE=1`` for
progress lines on stderr.  ``eval``, ``run`` and ``bench`` print a JSON
summary on stdout.  Exit codes: 0 success, 2 configuration error, 3 malformed
or inconsistent data, 4 degenerate inference.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import formats
from .bench import run_benchmark
from .config import Config
from .errors import ConfigError, DataError, MeasurementDegenerateError
from .evaluate import label_ground_truth, recall_at_precision, score_lcd, score_wakeup
from .mapping import build_map
from .motion import MOTION_MODES
from .simulate import (
    ScenarioSpec,
    builtin_scenarios,
    noiseless_scenario,
    simulate_scenario,
)
from .tasks import run_lcd, run_wakeup_batch

log = logging.getLogger("topoloc")

_TOL_M = 5.0
_TOL_DEG = 30.0


def _resolve_scenario(name: str) -> ScenarioSpec:
    scenarios = builtin_scenarios()
    scenarios["S0"] = noiseless_scenario()
    if name in scenarios:
        return scenarios[name]
    p = Path(name)
    if p.exists():
        try:
            return ScenarioSpec.from_dict(formats.read_json(p))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scenario file {p}: {exc}") from exc
    raise ConfigError(
        f"unknown scenario {name!r}; builtins are {sorted(scenarios)} "
        "and anything else must be a scenario JSON file"
    )


def _load_config(args) -> Config:
    """Defaults, overridden by ``--config``, overridden by explicit flags."""
    cfg = Config()
    if getattr(args, "config", None):
        raw = formats.read_json(args.config)
        cfg = Config.from_dict(raw)
    filt = cfg.filter
    if getattr(args, "mode", None) is not None:
        filt = dataclasses.replace(filt, mode=args.mode)
    if getattr(args, "forward_only", False):
        filt = dataclasses.replace(filt, forward_only=True)
    map_cfg = cfg.map
    if getattr(args, "node_spacing", None) is not None:
        map_cfg = dataclasses.replace(map_cfg, node_spacing=args.node_spacing)
    if getattr(args, "window", None) is not None:
        map_cfg = dataclasses.replace(map_cfg, window=args.window)
    task = cfg.task
    if getattr(args, "n_trials", None) is not None:
        task = dataclasses.replace(task, n_trials=args.n_trials)
    if getattr(args, "max_steps", None) is not None:
        task = dataclasses.replace(task, max_steps=args.max_steps)
    if getattr(args, "trial_seed", None) is not None:
        task = dataclasses.replace(task, seed=args.trial_seed)
    return Config(map=map_cfg, filter=filt, task=task)


def _cmd_simulate(args) -> int:
    spec = _resolve_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, ref, query = simulate_scenario(spec, args.seed)
    formats.write_traverse(out / "reference.jsonl", ref)
    formats.write_traverse(out / "query.jsonl", query)
    formats.write_json(
        out / "scenario.json", {"scenario": spec.to_dict(), "seed": int(args.seed)}
    )
    log.info(
        "scenario %s seed %d: %d reference frames, %d query frames -> %s",
        spec.name,
        args.seed,
        len(ref),
        len(query),
        out,
    )
    return 0


def _cmd_build_map(args) -> int:
    cfg = _load_config(args)
    reference = formats.read_traverse(args.reference)
    map_ = build_map(reference, cfg.map.node_spacing, cfg.map.window)
    formats.write_map(args.out, map_)
    log.info("built map with %d nodes -> %s", map_.n_nodes, args.out)
    return 0


def _cmd_lcd(args) -> int:
    cfg = _load_config(args)
    map_ = formats.read_map(args.map)
    query = formats.read_traverse(args.query)
    result = run_lcd(map_, query, cfg.filter.pipeline_params())
    formats.write_lcd_result(args.out, result)
    log.info("%d frames scored -> %s", len(result.frames), args.out)
    return 0


def _cmd_wakeup(args) -> int:
    cfg = _load_config(args)
    map_ = formats.read_map(args.map)
    query = formats.read_traverse(args.query)
    results = run_wakeup_batch(
        map_,
        query,
        n_trials=cfg.task.n_trials,
        seed=cfg.task.seed,
        max_steps=cfg.task.max_steps,
        params=cfg.filter.pipeline_params(),
    )
    formats.write_wakeup_results(args.out, results)
    n_conv = sum(r.converged for r in results)
    log.info("%d/%d trials converged -> %s", n_conv, len(results), args.out)
    return 0


def _curve_summary(curve) -> dict:
    return {
        "n_items": int(curve.n_items),
        "recall_at_precision": {
            "0.90": recall_at_precision(curve, 0.90),
            "0.95": recall_at_precision(curve, 0.95),
            "0.99": recall_at_precision(curve, 0.99),
        },
    }


def _cmd_eval(args) -> int:
    map_ = formats.read_map(args.map)
    query = formats.read_traverse(args.query)
    labels = label_ground_truth(query, map_, args.tol_m, args.tol_deg)
    if args.task == "lcd":
        result = formats.read_lcd_result(args.results)
        curve = score_lcd(result, labels)
        summary = {"task": "lcd", **_curve_summary(curve)}
    else:
        results = formats.read_wakeup_results(args.results)
        score = score_wakeup(results, labels)
        curve = score.curve
        summary = {
            "task": "wakeup",
            **_curve_summary(curve),
            "n_converged": int(sum(r.converged for r in results)),
            "mean_distance_at_0.95": score.mean_distance_at(0.95),
        }
    formats.write_pr_curve(args.out_curve, curve)
    if args.out_labels:
        formats.write_labels(args.out_labels, labels)
    if args.out_summary:
        formats.write_json(args.out_summary, summary)
    print(json.dumps(summary, indent=2))
    return 0


def _execute_run(manifest: dict, out: Path) -> int:
    spec = ScenarioSpec.from_dict(manifest["scenario"])
    cfg = Config.from_dict(manifest["config"])
    seed = int(manifest["seed"])
    task = manifest["task"]
    tol_m = float(manifest["tol_m"])
    tol_deg = float(manifest["tol_deg"])
    if task not in ("lcd", "wakeup"):
        raise DataError(f"manifest names unknown task {task!r}")

    out.mkdir(parents=True, exist_ok=True)
    _, ref, query = simulate_scenario(spec, seed)
    formats.write_traverse(out / "reference.jsonl", ref)
    formats.write_traverse(out / "query.jsonl", query)
    map_ = build_map(ref, cfg.map.node_spacing, cfg.map.window)
    formats.write_map(out / "map.json", map_)
    labels = label_ground_truth(query, map_, tol_m, tol_deg)
    formats.write_labels(out / "labels.jsonl", labels)

    params = cfg.filter.pipeline_params()
    if task == "lcd":
        result = run_lcd(map_, query, params)
        formats.write_lcd_result(out / "results.jsonl", result)
        curve = score_lcd(result, labels)
        summary = {"task": "lcd", **_curve_summary(curve)}
    else:
        results = run_wakeup_batch(
            map_,
            query,
            n_trials=cfg.task.n_trials,
            seed=cfg.task.seed,
            max_steps=cfg.task.max_steps,
            params=params,
        )
        formats.write_wakeup_results(out / "results.jsonl", results)
        score = score_wakeup(results, labels)
        curve = score.curve
        summary = {
            "task": "wakeup",
            **_curve_summary(curve),
            "n_converged": int(sum(r.converged for r in results)),
            "mean_distance_at_0.95": score.mean_distance_at(0.95),
        }
    formats.write_pr_curve(out / "pr.csv", curve)
    formats.write_json(out / "summary.json", summary)
    formats.write_json(out / "manifest.json", manifest)
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_run(args) -> int:
    spec = _resolve_scenario(args.scenario)
    cfg = _load_config(args)
    manifest = {
        "command": "run",
        "task": args.task,
        "scenario": spec.to_dict(),
        "seed": int(args.seed),
        "config": cfg.to_dict(),
        "tol_m": _TOL_M,
        "tol_deg": _TOL_DEG,
    }
    return _execute_run(manifest, Path(args.out))


def _cmd_rerun(args) -> int:
    manifest = formats.read_json(args.manifest)
    if not isinstance(manifest, dict) or manifest.get("command") != "run":
        raise DataError(f"{args.manifest} does not describe a run")
    required = {"command", "task", "scenario", "seed", "config", "tol_m", "tol_deg"}
    missing = required - set(manifest)
    if missing:
        raise DataError(f"{args.manifest}: manifest is missing {sorted(missing)}")
    try:
        return _execute_run(manifest, Path(args.out))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{args.manifest}: invalid manifest: {exc}") from exc


def _cmd_bench(args) -> int:
    report = run_benchmark(
        n_nodes=args.n_nodes,
        dim=args.dim,
        repeats=args.repeats,
        seed=args.seed,
        window=args.window,
    )
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (defaults apply otherwise)")


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--mode",
        choices=MOTION_MODES,
        help="motion-model variant (overrides the config file)",
    )
    p.add_argument(
        "--forward-only",
        action="store_true",
        help="skip backward smoothing and decide on filtered beliefs",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoloc",
        description="topometric localization: simulate, map, localize, evaluate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a benchmark scenario to disk")
    p.add_argument("--scenario", required=True, help="builtin name (S1, S2, S3) or JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("build-map", help="build a map from a reference traverse")
    p.add_argument("--reference", required=True, help="reference traverse (.jsonl)")
    p.add_argument("--out", required=True, help="map file to write (.json)")
    p.add_argument("--node-spacing", type=float, help="metres between nodes")
    p.add_argument("--window", type=int, help="relative-pose band width")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_build_map)

    p = sub.add_parser("lcd", help="loop-closure detection over a query traverse")
    p.add_argument("--map", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out", required=True, help="results file to write (.jsonl)")
    _add_config_flag(p)
    _add_filter_flags(p)
    p.set_defaults(func=_cmd_lcd)

    p = sub.add_parser("wakeup", help="batch of global-localization trials")
    p.add_argument("--map", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out", required=True, help="results file to write (.jsonl)")
    p.add_argument("--n-trials", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--trial-seed", type=int, help="seed for the start-frame draw")
    _add_config_flag(p)
    _add_filter_flags(p)
    p.set_defaults(func=_cmd_wakeup)

    p = sub.add_parser("eval", help="score results against ground truth")
    p.add_argument("--task", choices=("lcd", "wakeup"), required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out-curve", required=True, help="precision-recall CSV to write")
    p.add_argument("--out-summary", help="summary JSON to write")
    p.add_argument("--out-labels", help="ground-truth labels JSONL to write")
    p.add_argument("--tol-m", type=float, default=_TOL_M)
    p.add_argument("--tol-deg", type=float, default=_TOL_DEG)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="simulate, map, localize and score in one go")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--task", choices=("lcd", "wakeup"), default="lcd")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flag(p)
    _add_filter_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("rerun", help="replay a recorded run byte for byte")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_rerun)

    p = sub.add_parser("bench", help="time the per-step inference stages")
    p.add_argument("--n-nodes", type=int, default=3000)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report JSON here as well")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        format="%(message)s",
        level=logging.INFO if os.environ.get("TOPOLOC_VERBOSE") else logging.WARNING,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"topoloc: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"topoloc: data error: {exc}", file=sys.stderr)
        return 3
    except MeasurementDegenerateError as exc:
        print(f"topoloc: inference failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
