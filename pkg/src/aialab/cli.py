"""Command-line front end: train / attack / sweep / report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .data import make_split
from .experiment import (DATA_ROOT_ENV, ExperimentConfig, emit_table,
                         load_config_dataset, read_records, run_experiment,
                         run_sweep, write_records, write_table)
from .models import train_gcn

logger = logging.getLogger(__name__)


def _num(text: str):
    """'1000' stays an int count, '0.5' becomes a fraction."""
    try:
        return int(text)
    except ValueError:
        return float(text)


def _int_list(text: str):
    return [int(t) for t in text.split(",") if t.strip()]


def _load_config_file(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        return yaml.safe_load(text) or {}
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return yaml.safe_load(text) or {}


_CONFIG_FLAGS = ("dataset", "format", "attack", "setting", "structure_mode",
                 "knn_k", "knn_metric", "train_size", "candidate_count",
                 "iterations", "operator_kind", "base_threshold", "decay",
                 "dataset_seed", "sensitive_attrs", "seeds", "output")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML config file; flags override it")
    p.add_argument("--data-root", help=f"dataset root (default ${DATA_ROOT_ENV} or .)")
    p.add_argument("--dataset", help="dataset directory under the data root")
    p.add_argument("--format", choices=("edge_list_plus_csv", "planetoid_like"))
    p.add_argument("--attack", choices=("fp", "ri", "fp_ma", "ri_ma", "sa"))
    p.add_argument("--setting", choices=("setting1", "setting2"))
    p.add_argument("--structure-mode", dest="structure_mode",
                   choices=("true_graph", "knn"))
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--knn-metric", dest="knn_metric",
                   choices=("euclidean", "cosine"))
    p.add_argument("--train-size", dest="train_size", type=_num,
                   help="count (int) or fraction (float)")
    p.add_argument("--candidate-count", dest="candidate_count", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--operator-kind", dest="operator_kind",
                   choices=("normalized_adjacency", "combinatorial_laplacian"))
    p.add_argument("--base-threshold", dest="base_threshold", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--dataset-seed", dest="dataset_seed", type=int)
    p.add_argument("--sensitive-attrs", dest="sensitive_attrs", type=_int_list,
                   help="comma-separated column indices, e.g. 0 or 3,7")
    p.add_argument("--seeds", type=_int_list, help="comma-separated run seeds")
    p.add_argument("--base-seed", dest="base_seed", type=int,
                   help="use seeds base..base+num_seeds-1")
    p.add_argument("--num-seeds", dest="num_seeds", type=int)
    p.add_argument("--output", help="record output path (JSONL)")


def _build_config(args) -> ExperimentConfig:
    merged = _load_config_file(args.config) if args.config else {}
    # a --base-seed flag beats seeds listed in the file, but an explicit
    # --seeds flag beats everything
    if getattr(args, "base_seed", None) is not None:
        merged.pop("seeds", None)
    for key in _CONFIG_FLAGS + ("base_seed", "num_seeds"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return ExperimentConfig.from_dict(merged)


def _parse_values(text: str):
    if text.lstrip().startswith("["):
        return json.loads(text)
    out = []
    for item in text.split(","):
        item = item.strip()
        try:
            out.append(json.loads(item))
        except json.JSONDecodeError:
            out.append(item)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aialab",
        description="Attribute-inference attacks on graph models: train a "
                    "target, attack it, sweep configurations, tabulate results.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the target model and report accuracy")
    _add_config_flags(p_train)
    p_train.add_argument("--checkpoint", help="save trained weights here (.npz)")
    p_train.add_argument("--seed", type=int, default=0, help="split/model seed")

    p_attack = sub.add_parser("attack", help="run one attack config end to end")
    _add_config_flags(p_attack)

    p_sweep = sub.add_parser("sweep", help="repeat a config over one axis")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="config field to vary")
    p_sweep.add_argument("--values", required=True, type=_parse_values,
                         help="comma-separated or JSON list of axis values")
    p_sweep.add_argument("--table", help="write the aggregate CSV here")

    p_report = sub.add_parser("report", help="tabulate stored records as CSV")
    p_report.add_argument("--records", required=True, help="JSONL records file")
    p_report.add_argument("--output", help="CSV path (default: stdout)")
    return parser


def _cmd_train(args) -> int:
    cfg = _build_config(args)
    ds = load_config_dataset(cfg, args.data_root)
    split = make_split(ds, cfg.train_size, cfg.candidate_count,
                       seed=args.seed, candidate_seed=cfg.dataset_seed)
    model = train_gcn(ds, split, {"seed": args.seed, **(cfg.gcn or {})})
    print(f"train accuracy: {model.train_accuracy_:.4f}")
    print(f"test accuracy: {model.test_accuracy_:.4f}")
    if args.checkpoint:
        model.save(args.checkpoint)
        print(f"checkpoint written to {args.checkpoint}")
    return 0


def _cmd_attack(args) -> int:
    cfg = _build_config(args)
    record = run_experiment(cfg, args.data_root)
    print(f"{cfg.attack} on {cfg.dataset or 'synthetic'}: "
          f"{record.metric_name} mean={record.mean:.4f} std={record.std:.4f} "
          f"over {len(cfg.seeds)} seeds "
          f"(mean confidence {record.mean_confidence:.4f}, "
          f"queries {record.queries_used:.1f})")
    if record.partial:
        print("warning: some seeds failed; record marked partial", file=sys.stderr)
    if cfg.output:
        print(f"records written to {cfg.output}")
    return 1 if record.partial else 0


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    records = run_sweep(cfg, args.axis, args.values, args.data_root)
    if args.output:
        write_records(args.output, records)
        print(f"records written to {args.output}")
    if args.table:
        write_table(args.table, records)
        print(f"table written to {args.table}")
    if not args.output and not args.table:
        print(emit_table(records), end="")
    return 1 if any(r.partial for r in records) else 0


def _cmd_report(args) -> int:
    records = read_records(args.records)
    text = emit_table(records)
    if args.output:
        Path(args.output).write_text(text)
        print(f"table written to {args.output}")
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    commands = {"train": _cmd_train, "attack": _cmd_attack,
                "sweep": _cmd_sweep, "report": _cmd_report}
    try:
        return commands[args.command](args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
