"""Command-line interface: synth, train, eval, sweep.

Every command echoes its materialized configuration to the output
directory, exits nonzero on typed failures, and reports them as a single
machine-parsable ``ERROR <TAB> kind <TAB> detail`` line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import RunConfig, dump_config, load_config
from .encoder import SchemaContext, check_compatible, forward, load_params, save_params
from .errors import ConfigError, HyphinError
from .evalbench import ResultRow, emit_tables, linear_probe, synth_hin
from .hingraph import load_graph, split_labels, write_graph
from .rng import substream
from .trainer import build_pipeline, sweep, train

LOG_HEADER = "epoch\tl_co\tl_kl\ttotal\tval_metric"


def _parse_grid(text: str) -> list[float]:
    """Grid shorthand: explicit 'a,b,c' or inclusive 'start:stop:step'."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"grid {text!r} has a bad range")
        values = []
        k = 0
        while True:
            v = round(start + k * step, 10)
            if v > stop + 1e-9:
                break
            values.append(v)
            k += 1
        return values
    values = [float(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise ConfigError(f"grid {text!r} is empty")
    return values


def _run_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def _echo(rc: RunConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    dump_config(rc, os.path.join(out_dir, "effective_config.yaml"))


def _write_log(path: str, reports) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LOG_HEADER + "\n")
        for report in reports:
            fh.write(report.as_tsv_line() + "\n")


def cmd_synth(args) -> int:
    rc = _run_config(args)
    g = synth_hin(rc.synth)
    write_graph(g, args.out)
    _echo(rc, args.out)
    print(
        f"synthetic graph: {g.num_anchor} anchor nodes, "
        f"{len(g.edges)} edges -> {args.out}"
    )
    return 0


def cmd_train(args) -> int:
    rc = _run_config(args)
    g = load_graph(args.graph)
    pipe = build_pipeline(g, rc.metapaths, rc.train)
    os.makedirs(args.out, exist_ok=True)
    _echo(rc, args.out)
    log_path = os.path.join(args.out, "training_log.tsv")
    try:
        result = train(pipe, rc.train)
    except HyphinError as err:
        partial = getattr(err, "partial_log", None)
        if partial:
            _write_log(log_path, partial)
        raise
    _write_log(log_path, result.log)
    save_params(result.best_params, os.path.join(args.out, "best.ckpt"))
    save_params(result.final_params, os.path.join(args.out, "final.ckpt"))
    print(
        f"trained {len(result.log)} epochs; best val metric "
        f"{result.best_metric:.2f} at epoch {result.best_epoch}"
    )
    return 0


def cmd_eval(args) -> int:
    rc = _run_config(args)
    ratios = (
        [int(round(v)) for v in _parse_grid(args.ratios)]
        if args.ratios
        else list(rc.eval_ratios)
    )
    for r in ratios:
        if not 0 < r < 100:
            raise ConfigError(f"label ratio {r} outside (0, 100)")
    n_seeds = args.seeds if args.seeds is not None else rc.eval_seeds
    if n_seeds < 1:
        raise ConfigError("--seeds must be >= 1")

    g = load_graph(args.graph)
    params = load_params(args.checkpoint)
    ctx = SchemaContext.from_graph(g)
    ecfg = rc.train.encoder_config()
    check_compatible(params, ctx, ecfg)
    pipe = build_pipeline(g, rc.metapaths, rc.train, with_split=False)
    fused = forward(ctx, pipe.adj, params, ecfg).fused.value

    os.makedirs(args.out, exist_ok=True)
    rows = []
    seed_lines = []
    for ratio in ratios:
        accs = []
        for s in range(n_seeds):
            split = split_labels(
                g,
                ratio / 100.0,
                rc.train.val_fraction,
                substream(rc.seed, "split", ratio, s),
            )
            acc = linear_probe(
                fused,
                split,
                epochs=rc.train.probe_epochs,
                seed=substream(rc.seed, "probe", ratio, s),
            )
            accs.append(acc)
            seed_lines.append(f"{ratio}%\t{s}\t{acc!r}")
        rows.append(ResultRow(rc.model_name, float(np.mean(accs)), ratio))
    with open(
        os.path.join(args.out, "results_seeds.tsv"), "w", encoding="utf-8"
    ) as fh:
        fh.write("setting\tseed\tacc\n")
        for line in seed_lines:
            fh.write(line + "\n")
    emit_tables(rows, args.out)
    _echo(rc, args.out)
    for row in rows:
        print(f"{row.model}\t{row.acc:.2f}\t{row.setting}%")
    return 0


def cmd_sweep(args) -> int:
    rc = _run_config(args)
    lr_grid = _parse_grid(args.lr_grid) if args.lr_grid else [rc.train.learning_rate]
    dropout_grid = (
        _parse_grid(args.dropout_grid) if args.dropout_grid else [rc.train.dropout]
    )
    g = load_graph(args.graph)
    pipe = build_pipeline(g, rc.metapaths, rc.train)
    best_cfg, rows = sweep(pipe, rc.train, lr_grid, dropout_grid)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep.tsv"), "w", encoding="utf-8") as fh:
        fh.write("learning_rate\tdropout\tbest_metric\tbest_epoch\n")
        for row in rows:
            fh.write(row.as_tsv_line() + "\n")
    _echo(rc, args.out)
    print(
        f"best grid point: lr={best_cfg.learning_rate!r} "
        f"dropout={best_cfg.dropout!r} metric={rows[0].best_metric:.2f}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyphin",
        description="Self-supervised hypergraph embeddings for typed graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=False):
        p.add_argument("--config", default=None, help="YAML configuration file")
        p.add_argument("--seed", type=int, default=None, help="root random seed")
        p.add_argument("--out", required=True, help="output directory")
        if graph:
            p.add_argument("--graph", required=True, help="graph directory")

    p_synth = sub.add_parser("synth", help="generate a planted benchmark graph")
    common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train embeddings on a graph directory")
    common(p_train, graph=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="probe a checkpoint at several label ratios")
    common(p_eval, graph=True)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint file")
    p_eval.add_argument("--ratios", default=None, help="label ratios, e.g. 20,40,60")
    p_eval.add_argument("--seeds", type=int, default=None, help="splits per ratio")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid-search learning rate and dropout")
    common(p_sweep, graph=True)
    p_sweep.add_argument("--lr-grid", default=None, help="e.g. 1e-4,1e-3 or a:b:step")
    p_sweep.add_argument("--dropout-grid", default=None, help="e.g. 0.1:0.5:0.05")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def entry(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HyphinError as err:
        sys.stderr.write(f"ERROR\t{err.kind}\t{err}\n")
        return 1
    except OSError as err:
        sys.stderr.write(f"ERROR\tio\t{err}\n")
        return 1


def main() -> None:
    sys.exit(entry())
