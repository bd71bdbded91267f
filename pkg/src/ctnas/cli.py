"""Command-line front end.

Subcommands: gen-bench, train-nac, search, eval, report. A single JSON
config file drives all of them; --seed and --out override/augment it. The
effective config is printed to stdout and embedded in JSON outputs, so any
result file can be traced back to its inputs. Exit codes: 0 success,
1 usage or config error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .metrics import kendall_tau, metrics_csv, nac_scores, ranking_risk, surrogate_risk
from .nac import (NacComparator, NacConfig, build_pairs, init_nac, load_nac,
                  nac_to_json, save_nac, train_nac)
from .optim import init_adam
from .oracle import (ConstantComparator, OracleComparator, PerfRecord,
                     SyntheticOracle, TableOracle, BenchTable, load_table,
                     save_table, synth_perf)
from .search import (SearchConfig, SearchError, report_json, report_round_csv,
                     run_search, validate_config)
from .space import SpaceSpec, arch_key, enumerate_space, spec_hash
from .util import canonical_json


class CliError(Exception):
    """Config or usage problem; maps to exit code 1."""


DEFAULT_TRAIN = {"m": 100, "iterations": 2000, "batch_size": 256, "d": 32,
                 "lr": 2e-4, "weight_decay": 5e-4, "holdout": 100,
                 "augment": True}
DEFAULT_ORACLE = {"oracle_seed": 0, "sigma_noise": 0.002}


def load_config(path: str | None, seed_flag: int | None) -> dict:
    doc = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise CliError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise CliError(f"config is not valid JSON: {e}")
    if not isinstance(doc, dict):
        raise CliError("config must be a JSON object")
    known = {"seed", "space", "oracle", "search", "train", "eval"}
    extra = set(doc) - known
    if extra:
        raise CliError(f"unknown config keys: {sorted(extra)}")

    cfg: dict = {}
    try:
        cfg["space"] = SpaceSpec.from_json(doc["space"]) if "space" in doc \
            else SpaceSpec()
    except (KeyError, TypeError, ValueError) as e:
        raise CliError(f"bad space spec: {e}")
    cfg["seed"] = int(seed_flag if seed_flag is not None else doc.get("seed", 0))

    oracle = dict(DEFAULT_ORACLE)
    oracle.update(doc.get("oracle", {}))
    if set(oracle) - set(DEFAULT_ORACLE):
        raise CliError(f"unknown oracle keys: {sorted(set(oracle) - set(DEFAULT_ORACLE))}")
    cfg["oracle"] = oracle

    train = dict(DEFAULT_TRAIN)
    train.update(doc.get("train", {}))
    if set(train) - set(DEFAULT_TRAIN):
        raise CliError(f"unknown train keys: {sorted(set(train) - set(DEFAULT_TRAIN))}")
    cfg["train"] = train

    search_doc = doc.get("search", {})
    base = SearchConfig(seed=cfg["seed"])
    unknown = set(search_doc) - set(base.to_json())
    if unknown:
        raise CliError(f"unknown search keys: {sorted(unknown)}")
    try:
        cfg["search"] = replace(base, **search_doc, )
    except TypeError as e:
        raise CliError(f"bad search config: {e}")
    cfg["search"] = replace(cfg["search"], seed=cfg["seed"])
    bad = validate_config(cfg["search"])
    if bad:
        raise CliError("bad search config: " + "; ".join(bad))

    eval_doc = {"holdout": 100}
    eval_doc.update(doc.get("eval", {}))
    if set(eval_doc) != {"holdout"}:
        raise CliError(f"unknown eval keys: {sorted(set(eval_doc) - {'holdout'})}")
    cfg["eval"] = eval_doc
    return cfg


def effective_config_json(cfg: dict) -> dict:
    return {
        "seed": cfg["seed"],
        "space": cfg["space"].to_json(),
        "oracle": cfg["oracle"],
        "search": cfg["search"].to_json(),
        "train": cfg["train"],
        "eval": cfg["eval"],
    }


def _echo_config(cfg: dict) -> None:
    print("config " + canonical_json(effective_config_json(cfg), indent=None))


def _require_out(args) -> str:
    if not args.out:
        raise CliError("--out is required")
    return args.out


def cmd_gen_bench(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _require_out(args)
    if (args.count is None) == (not args.all):
        raise CliError("pass exactly one of --count or --all")
    if args.count is not None and args.count < 0:
        raise CliError("--count must be >= 0")
    _echo_config(cfg)

    spec = cfg["space"]
    oracle_seed = cfg["oracle"]["oracle_seed"]
    table = BenchTable(spec=spec, provenance="synthetic")
    if args.all:
        archs = list(enumerate_space(spec))
    else:
        rng = np.random.default_rng(cfg["seed"])
        oracle = SyntheticOracle(spec, oracle_seed)
        archs = oracle.sample_archs(args.count, rng) if args.count else []
    for arch in archs:
        acc = synth_perf(arch, spec, oracle_seed)
        table.add(arch, PerfRecord(arch_key=arch_key(arch), mean_acc=acc))
    save_table(table, out)
    print(f"wrote {len(table)} records to {out}")
    return 0


def _split_train_holdout(table, m: int, holdout: int, rng):
    oracle = TableOracle(table)
    train_archs = oracle.sample_archs(m, rng)
    taken = {arch_key(a) for a in train_archs}
    held_archs = oracle.sample_archs(holdout, rng, exclude=taken)
    to_recs = lambda archs: [(a, oracle.mean_acc(a)) for a in archs]
    return to_recs(train_archs), to_recs(held_archs)


def cmd_train_nac(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _require_out(args)
    if not args.bench:
        raise CliError("--bench is required")
    _echo_config(cfg)

    spec = cfg["space"]
    t = cfg["train"]
    table = load_table(args.bench, spec)
    if len(table) < 2:
        raise RuntimeError(f"benchmark has {len(table)} records, need at least 2")
    rng = np.random.default_rng(cfg["seed"])
    train_recs, held_recs = _split_train_holdout(table, t["m"], t["holdout"], rng)
    pairs = build_pairs(train_recs, augment=t["augment"])

    params = init_nac(spec, rng, NacConfig(d=t["d"]))
    adam = init_adam(params.tensors(), lr=t["lr"], weight_decay=t["weight_decay"])
    params, losses = train_nac(pairs, params, adam, t["batch_size"],
                               t["iterations"], rng)

    doc = nac_to_json(params)
    doc["run_config"] = effective_config_json(cfg)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc) + "\n")
    loss_path = str(Path(out).with_suffix(".loss.csv"))
    with open(loss_path, "w", encoding="utf-8") as fh:
        fh.write("iteration,loss\n")
        for i, loss in enumerate(losses, start=1):
            fh.write(f"{i},{loss!r}\n")

    scores = nac_scores(NacComparator(params), [a for a, _ in held_recs])
    ktau = kendall_tau(scores, [acc for _, acc in held_recs]).ktau
    print(f"ktau={ktau!r}")
    print(f"wrote model to {out}, losses to {loss_path}")
    return 0


def cmd_search(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _require_out(args)
    _echo_config(cfg)

    spec = cfg["space"]
    if args.bench:
        oracle = TableOracle(load_table(args.bench, spec))
    else:
        oracle = SyntheticOracle(spec, cfg["oracle"]["oracle_seed"],
                                 cfg["oracle"]["sigma_noise"])
    try:
        report = run_search(cfg["search"], spec, oracle)
    except SearchError as e:
        snap_path = str(Path(out).with_suffix(".snapshot.json"))
        with open(snap_path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(e.snapshot) + "\n")
        print(f"search failed: {e} (state snapshot at {snap_path})",
              file=sys.stderr)
        return 2
    report["config"]["run"] = effective_config_json(cfg)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(report_json(report))
    csv_path = str(Path(out).with_suffix(".rounds.csv"))
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report_round_csv(report))
    print(f"final {report['final']['arch_key']} acc={report['final']['true_acc']!r}")
    print(f"wrote report to {out}, rounds to {csv_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = _require_out(args)
    if not args.bench:
        raise CliError("--bench is required")
    if args.comparator == "model" and not args.model:
        raise CliError("--model is required unless --comparator is perfect/constant")

    spec = cfg["space"]
    checkpoint = args.comparator
    if args.comparator == "model":
        params = load_nac(args.model)
        if spec_hash(params.spec) != spec_hash(spec):
            raise CliError("model was trained on a different space "
                           f"({spec_hash(params.spec)} != {spec_hash(spec)})")
        checkpoint = Path(args.model).name
    _echo_config(cfg)

    table = load_table(args.bench, spec)
    rng = np.random.default_rng(cfg["seed"])
    oracle = TableOracle(table)
    n = min(cfg["eval"]["holdout"], len(table))
    if n < 2:
        raise RuntimeError("need at least 2 benchmark records to evaluate")
    recs = [(a, oracle.mean_acc(a)) for a in oracle.sample_archs(n, rng)]

    if args.comparator == "model":
        cmp = NacComparator(params)
    elif args.comparator == "perfect":
        cmp = OracleComparator(oracle)
    else:
        cmp = ConstantComparator(0.5)

    scores = nac_scores(cmp, [a for a, _ in recs])
    ktau = kendall_tau(scores, [acc for _, acc in recs]).ktau
    rrisk = ranking_risk(cmp, recs)
    srisk = surrogate_risk(cmp, build_pairs(recs, augment=False))
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(metrics_csv([(ktau, rrisk, srisk, checkpoint)]))
    print(f"ktau={ktau!r}")
    print(f"wrote metrics to {out}")
    return 0


def cmd_report(args) -> int:
    if not args.infile:
        raise CliError("--in is required")
    try:
        with open(args.infile, encoding="utf-8") as fh:
            report = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"report not found: {args.infile}")
    except json.JSONDecodeError as e:
        raise CliError(f"report is not valid JSON: {e}")
    for key in ("final", "rounds", "bootstrap"):
        if key not in report:
            raise CliError(f"not a search report (missing {key!r})")

    boot = report["bootstrap"]
    print(f"bootstrap: {boot['labeled']} labeled archs, {boot['pairs']} pairs")
    print(f"initial baseline: {boot['initial_baseline']['arch_key']} "
          f"acc={boot['initial_baseline']['true_acc']!r}")
    for row in report["rounds"]:
        print(f"round {row['round']}: baseline {row['baseline_key']} "
              f"acc={row['baseline_acc']!r} reward={row['mean_reward']!r} "
              f"nac_loss={row['nac_loss']!r}")
    print(f"final: {report['final']['arch_key']} "
          f"acc={report['final']['true_acc']!r}")
    best = report.get("best_sampled", {})
    if best.get("arch_key"):
        print(f"best sampled: {best['arch_key']} acc={best['true_acc']!r}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report_round_csv(report))
        print(f"wrote rounds to {args.out}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors map to exit 1, not argparse's 2
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctnas",
                     description="Contrastive architecture search toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output file path")

    p = sub.add_parser("gen-bench", help="emit a synthetic benchmark table")
    common(p)
    p.add_argument("--count", type=int, help="number of sampled architectures")
    p.add_argument("--all", action="store_true",
                   help="enumerate the whole space instead of sampling")
    p.set_defaults(fn=cmd_gen_bench)

    p = sub.add_parser("train-nac", help="train the comparator on a benchmark")
    common(p)
    p.add_argument("--bench", help="benchmark JSONL file")
    p.set_defaults(fn=cmd_train_nac)

    p = sub.add_parser("search", help="run the full search loop")
    common(p)
    p.add_argument("--bench", help="optional benchmark table as the oracle")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("eval", help="score a trained comparator on held-out archs")
    common(p)
    p.add_argument("--bench", help="benchmark JSONL file")
    p.add_argument("--model", help="trained comparator JSON")
    p.add_argument("--comparator", choices=["model", "perfect", "constant"],
                   default="model")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="summarize a search report")
    common(p)
    p.add_argument("--in", dest="infile", help="search report JSON")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failures: exit 2 with a plain message
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
