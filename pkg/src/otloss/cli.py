"""Command-line front end.

Exit status: 0 on success, 1 on invalid input or configuration, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, dump_config, load_config
from .cost_matrix import (
    LabelSet,
    build_cost_matrix,
    dump_embeddings,
    load_embeddings,
    read_cost_matrix_csv,
    write_cost_matrix_csv,
)
from .synth import SynthConfig, generate, read_dataset_csv, write_dataset_csv


def _read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_labels(path) -> list:
    return [line.strip() for line in _read_text(path).splitlines() if line.strip()]


def _synth_config(path, seed) -> SynthConfig:
    text = _read_text(path) if path else ""
    return load_config(SynthConfig, text, str(path or "<defaults>"), seed=seed)


def cmd_gen_data(args) -> None:
    cfg = _synth_config(args.config, args.seed)
    train, test, table, labels = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train.csv", "w", encoding="utf-8", newline="") as fh:
        write_dataset_csv(train, fh)
    with open(out / "test.csv", "w", encoding="utf-8", newline="") as fh:
        write_dataset_csv(test, fh)
    with open(out / "embeddings.txt", "wb") as fh:
        fh.write(dump_embeddings(table))
    _write_text(out / "labels.txt", "\n".join(labels.labels) + "\n")
    _write_text(out / "synth.cfg", dump_config(cfg))


def cmd_build_cost_matrix(args) -> None:
    names = _read_labels(args.labels)
    with open(args.embeddings, "rb") as fh:
        try:
            table = load_embeddings(fh)
        except ValueError as exc:
            raise ValueError(f"{args.embeddings}: {exc}") from None
    try:
        labels = LabelSet.from_names(names, args.background)
        C = build_cost_matrix(labels, table)
    except ValueError as exc:
        raise ValueError(f"{args.labels}: {exc}") from None
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_cost_matrix_csv(C, fh)


def _load_cost(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return read_cost_matrix_csv(fh)


def _background_index(names, background):
    if background is None:
        return None
    return LabelSet.from_names(names, background).background_index


def cmd_train(args) -> None:
    cfg = load_config(harness.TrainConfig, _read_text(args.config) if args.config else "",
                      str(args.config or "<defaults>"), seed=args.seed)
    cost = _load_cost(args.cost_matrix) if args.cost_matrix else None

    if args.synthetic is not None:
        scfg = _synth_config(args.synthetic or None, args.seed)
        data, test, table, label_set = generate(scfg)
        names, bg = label_set.labels, label_set.background_index
        if cost is None and cfg.loss != "CE":
            cost = build_cost_matrix(label_set, table)
    else:
        if not args.train:
            raise ConfigError("train needs --synthetic or --train")
        if cost is not None:
            names = list(cost.row_labels)
        elif args.labels:
            names = _read_labels(args.labels)
        else:
            raise ConfigError("CSV training data needs --labels or --cost-matrix")
        bg = _background_index(names, args.background)
        with open(args.train, encoding="utf-8", newline="") as fh:
            data = read_dataset_csv(fh, len(names))
        test = None
        if args.test:
            with open(args.test, encoding="utf-8", newline="") as fh:
                test = read_dataset_csv(fh, len(names))
        names = tuple(LabelSet.from_names(names).labels)

    record = harness.train(cfg, data, names, bg, cost, test)
    if not args.timing:
        record.wall_clock_seconds = None
    _write_text(args.out, record.dumps())


def cmd_evaluate(args) -> None:
    record = harness.RunRecord.loads(_read_text(args.run))
    with open(args.data, encoding="utf-8", newline="") as fh:
        ds = read_dataset_csv(fh, len(record.labels))
    ks = tuple(int(k) for k in args.k.split(",")) if args.k else None
    reports = harness.evaluate(record, ds, ks)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, rep in sorted(reports.items()):
        with open(out / f"recall_at_{k}.json", "w", encoding="utf-8", newline="") as fh:
            rep.write_json(fh)
        with open(out / f"recall_at_{k}.csv", "w", encoding="utf-8", newline="") as fh:
            rep.write_csv(fh)
    if args.update_run:
        record.reports = reports
        record.eval_dataset = harness.dataset_fingerprint(ds)
        _write_text(args.run, record.dumps())
    for k, rep in sorted(reports.items()):
        print(f"R@{k}={rep.recall:.4f} mR@{k}={rep.mean_recall:.4f}")


def cmd_compare(args) -> None:
    a = harness.RunRecord.loads(_read_text(args.run_a))
    b = harness.RunRecord.loads(_read_text(args.run_b))
    rows, means = harness.compare(a, b)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        harness.write_comparison_csv(rows, fh)
    summary = harness.comparison_summary(a, b, means)
    _write_text(str(args.out) + ".summary.txt", summary)
    sys.stdout.write(summary)


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors: exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="otloss", description="Semantic optimal-transport loss toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic long-tailed dataset")
    g.add_argument("--config", help="synthetic-data config (key = value)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen_data)

    b = sub.add_parser("build-cost-matrix", help="cosine cost matrix from label embeddings")
    b.add_argument("--labels", required=True, help="one label per line")
    b.add_argument("--embeddings", required=True, help="token<TAB>values file")
    b.add_argument("--background", help="name of the background label")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_cost_matrix)

    t = sub.add_parser("train", help="train a classifier with CE or OT loss")
    t.add_argument("--config", help="training config (key = value)")
    t.add_argument("--seed", type=int)
    t.add_argument("--synthetic", nargs="?", const="", metavar="SYNTH_CFG",
                   help="generate the data in memory (optionally from a config file)")
    t.add_argument("--train", help="training CSV (label,f1,...,fd)")
    t.add_argument("--test", help="test CSV evaluated at the end of training")
    t.add_argument("--labels", help="label names, one per line (CSV data without --cost-matrix)")
    t.add_argument("--background", help="background label name (CSV data)")
    t.add_argument("--cost-matrix", help="cost-matrix CSV")
    t.add_argument("--timing", action="store_true", help="store wall-clock time (makes output non-reproducible)")
    t.add_argument("--out", required=True, help="run record (JSON)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="Recall@K reports for a trained run")
    e.add_argument("--run", required=True)
    e.add_argument("--data", required=True, help="dataset CSV")
    e.add_argument("--k", help="comma-separated K values (default: the run's)")
    e.add_argument("--update-run", action="store_true", help="store the reports in the run record")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="per-class comparison of two evaluated runs")
    c.add_argument("run_a")
    c.add_argument("run_b")
    c.add_argument("--out", required=True, help="comparison CSV; summary goes to <out>.summary.txt")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except OSError as exc:
        print(f"otloss: I/O error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, KeyError) as exc:
        print(f"otloss: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
