"""Command-line front end.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
Log verbosity comes from the ``FEDLAB_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, config_from_mapping, load_config
from .errors import ConfigError, FedLabError, IoError
from .evolution import HealthMode, run_generations
from .fedsim import build_federation, run_experiment
from .metrics import MetricConfig
from .modelio import (
    atomic_write,
    ingest_population,
    read_checkpoint,
    read_sidecar,
    sidecar_path,
    extract_metadata,
    write_model,
)
from .reporting import (
    compare_report,
    load_summary,
    rounds_csv,
    summarize,
    summary_document,
    validate_rounds_csv,
    validate_summary,
)
from .strategies import ClientUpdate, fedavg_aggregate
from .weights import make_rng

log = logging.getLogger("fedlab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(FedLabError):
    pass


def _setup_logging() -> None:
    level = os.environ.get("FEDLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _experiment_config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if args.strategy:
        overrides["strategies"] = list(dict.fromkeys(args.strategy))
    if args.out is not None:
        overrides["output.dir"] = str(args.out)
    if args.health_mode is not None:
        overrides["evolution.health_mode"] = args.health_mode
    if args.config is None:
        data = {}
        for dotted, value in overrides.items():
            parts = dotted.split(".")
            target = data
            for p in parts[:-1]:
                target = target.setdefault(p, {})
            target[parts[-1]] = value
        return config_from_mapping(data, source="<defaults>")
    return load_config(args.config, overrides)


def cmd_simulate(args) -> int:
    cfg = _experiment_config(args)
    out = Path(cfg.output.dir)
    csv_path, summary_path = out / "rounds.csv", out / "summary.json"
    for p in (csv_path, summary_path):
        if p.exists() and not args.overwrite:
            raise IoError(f"{p} exists; pass --overwrite to replace it")

    fed = build_federation(cfg)
    records, per_strategy = [], {}
    for name in cfg.strategies:
        log.info("running %s for %d rounds", name, cfg.rounds)
        recs = run_experiment(cfg, name, fed)
        records.extend(recs)
        per_strategy[name] = summarize(recs, cfg.accuracy_threshold)

    csv_text = rounds_csv(records, cfg.output.wall_clock_in_csv)
    doc = summary_document(per_strategy, cfg.seed, cfg.rounds, cfg.accuracy_threshold, cfg.to_dict())
    atomic_write(csv_path, csv_text.encode("utf-8"), overwrite=args.overwrite)
    atomic_write(summary_path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8"),
                 overwrite=args.overwrite)

    validate_rounds_csv(csv_path.read_text(encoding="utf-8"), cfg.rounds * len(cfg.strategies))
    validate_summary(json.loads(summary_path.read_text(encoding="utf-8")), str(summary_path))
    for name, s in per_strategy.items():
        print(f"{name}: final_accuracy={s['final_accuracy']:.6f} final_loss={s['final_loss']:.6f} "
              f"total_macs={s['total_macs']}")
    print(f"wrote {csv_path} and {summary_path}")
    return EXIT_OK


def _metric_config(args) -> MetricConfig:
    return MetricConfig(
        sigma_target=args.sigma_target if args.sigma_target is not None else MetricConfig().sigma_target,
        zero_tolerance=args.zero_tolerance if args.zero_tolerance is not None else MetricConfig().zero_tolerance,
    )


def cmd_extract(args) -> int:
    side = extract_metadata(args.checkpoint, args.prev, _metric_config(args), overwrite=args.overwrite)
    read_sidecar(sidecar_path(args.checkpoint))
    print(json.dumps({
        "sparsity": side.sparsity,
        "stability": side.stability,
        "health": side.health,
        "stability_assumed": side.stability_assumed,
    }, sort_keys=True))
    return EXIT_OK


def cmd_aggregate(args) -> int:
    if args.strategy == "fedsgd":
        raise UsageError("fedsgd needs client gradients and cannot aggregate checkpoints offline")
    if args.config is not None:
        cfg = load_config(args.config, {"evolution.health_mode": args.health_mode} if args.health_mode else None)
    else:
        cfg = config_from_mapping({"evolution": {"health_mode": args.health_mode or "bounded"}}, source="<defaults>")
    seed = args.seed if args.seed is not None else cfg.seed
    metric_cfg = cfg.metric_config()

    pop = ingest_population(args.directory, metric_cfg)
    # ingestion already checked that all members agree on element count
    dims = read_checkpoint(min(Path(args.directory).glob("*.ckpt")))[1].get("layer_dims")

    if args.strategy == "fedavg":
        updates = [ClientUpdate(p.id, p.weights, num_samples=p.num_samples) for p in pop]
        global_w = fedavg_aggregate(updates)
        info = {"strategy": "fedavg", "members": [p.id for p in pop]}
    else:
        _, global_w, history = run_generations(
            pop, cfg.evolution_config(), cfg.fitness_weights(), metric_cfg, make_rng(seed)
        )
        info = {"strategy": "fedavgen", "elites": history[-1].elite_ids,
                "coefficients": history[-1].coefficients}

    model_id = args.model_id or f"global-{args.strategy}"
    ckpt, side = write_model(global_w, dims, model_id, args.out, metric_cfg,
                             training_meta={"optimizer": "none"}, overwrite=args.overwrite)
    read_checkpoint(args.out)
    read_sidecar(sidecar_path(args.out))
    info.update(out=str(args.out), checksum=ckpt.manifest["checksum"],
                sparsity=side.sparsity, health=side.health)
    print(json.dumps(info, sort_keys=True))
    return EXIT_OK


def cmd_compare(args) -> int:
    if len(args.summaries) < 2:
        raise UsageError("compare needs at least two summary files")
    docs = [(str(p), load_summary(p)) for p in args.summaries]
    sys.stdout.write(compare_report(docs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedlab", description="Federated aggregation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run strategy comparisons and write CSV + summary JSON")
    sim.add_argument("--config", type=Path)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--strategy", action="append", choices=["fedavg", "fedsgd", "fedavgen"],
                     help="repeatable; defaults to the config's list")
    sim.add_argument("--rounds", type=int)
    sim.add_argument("--out", type=Path)
    sim.add_argument("--overwrite", action="store_true")
    sim.add_argument("--health-mode", choices=[m.value for m in HealthMode])
    sim.set_defaults(func=cmd_simulate)

    ext = sub.add_parser("extract", help="compute a checkpoint's metadata sidecar")
    ext.add_argument("checkpoint", type=Path)
    ext.add_argument("--prev", type=Path, help="previous-epoch checkpoint for stability")
    ext.add_argument("--sigma-target", type=float)
    ext.add_argument("--zero-tolerance", type=float)
    ext.add_argument("--overwrite", action="store_true")
    ext.set_defaults(func=cmd_extract)

    agg = sub.add_parser("aggregate", help="aggregate a directory of checkpoints offline")
    agg.add_argument("directory", type=Path)
    agg.add_argument("--strategy", choices=["fedavg", "fedsgd", "fedavgen"], default="fedavgen")
    agg.add_argument("--out", type=Path, required=True, help="output checkpoint path")
    agg.add_argument("--config", type=Path, help="evolution/metric settings")
    agg.add_argument("--seed", type=int)
    agg.add_argument("--health-mode", choices=[m.value for m in HealthMode])
    agg.add_argument("--model-id")
    agg.add_argument("--overwrite", action="store_true")
    agg.set_defaults(func=cmd_aggregate)

    cmp_ = sub.add_parser("compare", help="side-by-side report of summary JSONs")
    cmp_.add_argument("summaries", nargs="+", type=Path)
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FedLabError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
