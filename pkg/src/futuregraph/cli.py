"""Command-line pipeline: gen, pretrain-sim, train, eval, ablate, export-graph.

Exit codes: 0 ok, 2 configuration error, 3 missing or unreadable artifact,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint
from .agl import graph_loss_numpy
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, TrainConfig
from .graphs import Dataset, DatasetFormatError, load_dataset, save_dataset
from .simulator import freeze, pretrain
from .training import (NumericalError, ablate, evaluate, fit_normalization, format_ablation, predict,
                       prepare, prepare_global, train)
from .world import make_dataset, parse_split

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4
SPLITS = ("train", "val", "test")
METRIC_COLUMNS = ("mae", "rmse", "mape", "runtime_per_batch", "input_bytes")

log = logging.getLogger("futuregraph")


class MissingArtifact(RuntimeError):
    pass


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_matrix(path: Path, a: np.ndarray) -> None:
    write_csv(path, [f"c{j}" for j in range(a.shape[1])], [[repr(float(x)) for x in row] for row in a])


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(x) for x in r] for r in rows])


def load_split(data_dir: Path, name: str) -> Dataset:
    path = data_dir / f"{name}.jsonl"
    if not path.exists():
        raise MissingArtifact(f"missing dataset file {path} (run `gen` first)")
    return load_dataset(path)


def load_ckpt(path: Path, what: str) -> checkpoint.Checkpoint:
    if not path.exists():
        raise MissingArtifact(f"missing {what}: {path}")
    return checkpoint.load(path)


def _prepared(cfg: RunConfig, stats, data_dir: Path, names=SPLITS):
    sets = {n: load_split(data_dir, n) for n in names}
    first = sets[names[0]]
    if first.global_graph is None:
        raise MissingArtifact(f"dataset {data_dir} has no global graph")
    glob = prepare_global(stats, first.global_graph)
    return glob, {n: prepare(d, stats, cfg.train.dims.m_nodes) for n, d in sets.items()}


def _sim_from(ck: checkpoint.Checkpoint):
    sim = ck.params("sim")
    freeze(sim)
    return sim


# ---------------------------------------------------------------- commands

def cmd_gen(cfg: RunConfig, args) -> int:
    out = Path(args.out or cfg.data_dir)
    minutes = args.minutes if args.minutes is not None else cfg.minutes
    try:
        split = parse_split(args.split) if args.split else cfg.split
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sets = make_dataset(cfg.world, minutes, split, f_aoi=cfg.train.dims.f_aoi)
    out.mkdir(parents=True, exist_ok=True)
    for name, ds in zip(SPLITS, sets):
        save_dataset(ds, out / f"{name}.jsonl")
        print(f"{name} {len(ds.samples)}")
    return EXIT_OK


def cmd_pretrain_sim(cfg: RunConfig, args) -> int:
    data, out = Path(args.data or cfg.data_dir), Path(args.out or cfg.out_dir)
    train_ds = load_split(data, "train")
    stats = fit_normalization(train_ds)
    glob, prep = _prepared(cfg, stats, data, ("train", "val"))
    dims = cfg.train.dims
    res = pretrain(prep["train"], prep["val"], glob.x, epochs=cfg.sim_epochs, lr=cfg.sim_learning_rate,
                   patience=cfg.sim_patience, seed=cfg.sim_seed, hidden=dims.sim_hidden,
                   mlp_hidden=dims.sim_mlp_hidden)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out / "sim.ckpt", checkpoint.build(sim=res.params, stats=stats, config=cfg.to_dict(),
                                                       best_epoch=res.best_epoch))
    write_csv(out / "sim_curve.csv", ["epoch", "train_mae", "val_mae", "best_val_mae"],
              [[i, a, b, c] for i, (a, b, c) in enumerate(zip(res.train_mae, res.val_mae, res.best_val_mae))])
    print(f"simulator best val MAE {res.best_val_mae[-1]:.3f} at epoch {res.best_epoch}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    data, out = Path(args.data or cfg.data_dir), Path(args.out or cfg.out_dir)
    sim_path = Path(args.sim) if args.sim else out / "sim.ckpt"
    if not sim_path.exists():
        raise MissingArtifact(f"missing simulator checkpoint: {sim_path} (run `pretrain-sim` first)")
    sim_ck = checkpoint.load(sim_path)
    stats = sim_ck.stats()
    sim = _sim_from(sim_ck)
    glob, prep = _prepared(cfg, stats, data, ("train", "val"))
    res = train(cfg.train, prep["train"], prep["val"], glob, sim)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out / "model.ckpt", checkpoint.build(
        model=res.params, sim=sim, stats=stats, config=cfg.to_dict(), train_config=cfg.train.to_dict(),
        best_epoch=res.best_epoch, label_scale=res.label_scale))
    keys = ["epoch", "train_loss", "train_mae", "train_graph_loss", "val_mae"]
    write_csv(out / "curves.csv", keys, [[c[k] for k in keys] for c in res.curves])
    skeys = ["epoch", "step", "loss", "l_p", "l_graph", "lam"]
    write_csv(out / "steps.csv", skeys, [[s[k] for k in skeys] for s in res.steps])
    if cfg.train.ablation_mask.use_adaptive_learning:
        _, a_future = predict(res.params, sim, prep["train"], glob, cfg.train)
        tr = prep["train"]
        rows = [[i, int(tr.minutes[i]), graph_loss_numpy(a_future[i], tr.a_truth_norm[i], tr.row_mask[i])]
                for i in range(len(tr))]
        write_csv(out / "graph_loss_train.csv", ["sample", "minute", "graph_loss"], rows)
    print(f"best epoch {res.best_epoch} val MAE {res.best_val_mae:.3f}")
    return EXIT_OK


def _model_from(path: Path):
    ck = load_ckpt(path, "model checkpoint (run `train` first)")
    tcfg = TrainConfig(**ck.meta["train_config"])
    return ck, ck.params("model"), _sim_from(ck), ck.stats(), tcfg


def cmd_eval(cfg: RunConfig, args) -> int:
    data, out = Path(args.data or cfg.data_dir), Path(args.out or cfg.out_dir)
    _, params, sim, stats, tcfg = _model_from(out / "model.ckpt")
    glob, prep = _prepared(cfg, stats, data, (args.split,))
    rep = evaluate(params, sim, prep[args.split], glob, tcfg)
    row = rep.row()
    print(" ".join(f"{k:>18}" for k in METRIC_COLUMNS))
    print(" ".join(f"{row[k]:>18.6g}" for k in METRIC_COLUMNS))
    write_csv(out / f"metrics_{args.split}.csv", METRIC_COLUMNS, [[row[k] for k in METRIC_COLUMNS]])
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args) -> int:
    data, out = Path(args.data or cfg.data_dir), Path(args.out or cfg.out_dir)
    sim_ck = load_ckpt(Path(args.sim) if args.sim else out / "sim.ckpt",
                       "simulator checkpoint (run `pretrain-sim` first)")
    stats = sim_ck.stats()
    sim = _sim_from(sim_ck)
    glob, prep = _prepared(cfg, stats, data)
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else cfg.ablation_seeds
    table = ablate(cfg.train, prep["train"], prep["val"], prep["test"], glob, sim, seeds)
    out.mkdir(parents=True, exist_ok=True)
    header = ["use_ongoing", "use_global", "use_cross_attention", "use_adaptive_learning",
              "mae", "rmse", "mape", "runtime_per_batch", "input_bytes"]
    rows = []
    for r in table:
        m = r.mask
        rows.append([int(m.use_ongoing), int(m.use_global), int(m.use_cross_attention),
                     int(m.use_adaptive_learning)] + [r.median(k) for k in METRIC_COLUMNS])
    write_csv(out / "ablation.csv", header, rows)
    text = format_ablation(table)
    (out / "ablation.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_export_graph(cfg: RunConfig, args) -> int:
    data, out = Path(args.data or cfg.data_dir), Path(args.out or cfg.out_dir)
    _, params, sim, stats, tcfg = _model_from(out / "model.ckpt")
    if not tcfg.ablation_mask.use_adaptive_learning:
        raise ConfigError("this model was trained without adaptive graph learning; there is no future graph")
    glob, prep = _prepared(cfg, stats, data, (args.split,))
    d = prep[args.split]
    if not 0 <= args.sample < len(d):
        raise ConfigError(f"--sample must be in [0, {len(d)})")
    one = d.take([args.sample])
    _, a_future = predict(params, sim, one, glob, tcfg)
    a_f, a_t = a_future[0], one.a_truth_norm[0]
    write_matrix(out / f"a_future_{args.split}_{args.sample}.csv", a_f)
    write_matrix(out / f"a_truth_{args.split}_{args.sample}.csv", a_t)
    print(f"graph_loss {graph_loss_numpy(a_f, a_t, one.row_mask[0]):.12g}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "pretrain-sim": cmd_pretrain_sim, "train": cmd_train, "eval": cmd_eval,
    "ablate": cmd_ablate, "export-graph": cmd_export_graph,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="futuregraph", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_, data=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run config (defaults when omitted)")
        p.add_argument("--out", help="output directory")
        if data:
            p.add_argument("--data", help="directory holding train/val/test .jsonl files")
        return p

    p = add("gen", "generate synthetic train/val/test datasets", data=False)
    p.add_argument("--minutes", type=int, help="simulated query span in minutes")
    p.add_argument("--split", help="train,val,test fractions, e.g. 0.8,0.1,0.1")
    add("pretrain-sim", "pretrain the pressure simulator on truth future graphs")
    p = add("train", "train the forecaster with the frozen simulator")
    p.add_argument("--sim", help="simulator checkpoint (default: OUT/sim.ckpt)")
    p = add("eval", "evaluate a trained model")
    p.add_argument("--split", default="test", choices=SPLITS)
    p = add("ablate", "run the ablation table over seeds")
    p.add_argument("--sim", help="simulator checkpoint (default: OUT/sim.ckpt)")
    p.add_argument("--seeds", help="comma-separated seeds")
    p = add("export-graph", "write learned and truth future graphs for one sample")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--split", default="train", choices=SPLITS)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingArtifact, CheckpointError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
