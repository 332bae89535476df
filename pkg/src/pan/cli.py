"""Command line front end.

    pan train      fit the adversarial encoder, save weights and history
    pan evaluate   attack a saved encoder and report u / p1 / p2 / score
    pan sweep      retrain across privacy weightings, one CSV row each
    pan baseline   dp | fl | dnn | hybrid comparison rows
    pan encode     run a saved encoder over the test split, save features
    pan gradcheck  finite-difference audit of every layer's gradients

Every command takes --config PATH (defaults apply without it), --seed INT
and --out DIR (both override the config).  CSV outputs are byte-stable
for fixed inputs; figures are drawn next to them when report.figures is
on.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data
from .baselines import run_dnn_baseline, run_hybrid_baseline, run_noise_baseline
from .config import RunConfig, load_config, save_config
from .errors import ConfigError, FormatError, TrainingDiverged
from .evaluation import AttackerBudget, evaluate_encoder
from .models import BuildError, build_encoder
from .nn.gradcheck import check_all
from .serialization import load_model, save_model, save_tensors
from .sweep import run_lambda_sweep
from .training import train_pan, validate_training_config

_MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def build_dataset(cfg: RunConfig) -> data.Dataset:
    d = cfg.dataset
    if d.train_count < 1 or d.test_count < 1:
        raise ConfigError("dataset counts must be positive")
    n = d.train_count + d.test_count
    if d.kind == "synthetic":
        full = data.make_synthetic_dual(n, seed=cfg.train.seed, size=d.size)
    elif d.kind == "digits":
        full = data.make_digits(n, seed=cfg.train.seed, size=d.size)
    else:  # mnist: four idx files on disk
        paths = (d.train_images, d.train_labels, d.test_images, d.test_labels)
        if not all(paths):
            base = d.dir or os.environ.get("PAN_MNIST_DIR", "")
            if not base:
                raise ConfigError(
                    "dataset.kind=mnist needs dataset.dir (or PAN_MNIST_DIR, or the "
                    "four explicit dataset.*_images/_labels paths)"
                )
            paths = tuple(str(Path(base) / name) for name in _MNIST_FILES)
        ds = data.load_mnist_pairs(*paths)
        return data.desk_subsample(ds, d.train_count, d.test_count, cfg.train.seed)
    return data.from_arrays(
        full.images, full.y, full.z,
        train_idx=np.arange(d.train_count),
        test_idx=np.arange(d.train_count, n),
    )


def attacker_budget(cfg: RunConfig) -> AttackerBudget:
    e = cfg.eval
    return AttackerBudget(
        epochs=e.attacker_epochs, lr=e.attacker_lr, batch_size=e.attacker_batch,
        classifier_widths=e.widths, seed=cfg.train.seed,
    )


def score_lambdas(cfg: RunConfig) -> tuple[float, float, float]:
    return (cfg.eval.lambda1, cfg.eval.lambda2, cfg.eval.lambda3)


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.out is not None:
        cfg.output.dir = args.out
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_encoder(path, cfg: RunConfig, dataset):
    encoder = build_encoder(dataset.sample_shape, cfg.arch.encoder_preset, seed=cfg.train.seed)
    load_model(path, encoder)
    return encoder


def _write_tradeoff(out: Path, name: str, rows, cfg: RunConfig, say) -> None:
    from .reporting import plot_tradeoff, write_tradeoff_csv

    csv_path = out / ("%s.csv" % name)
    write_tradeoff_csv(csv_path, rows)
    say("wrote %s" % csv_path)
    if cfg.report.figures:
        fig_path = out / ("%s.png" % name)
        plot_tradeoff(fig_path, rows)
        say("wrote %s" % fig_path)


def cmd_train(args, say) -> int:
    cfg = _load_run_config(args)
    dataset = build_dataset(cfg)
    validate_training_config(cfg.train, dataset)
    out = _out_dir(cfg)
    say("training on %d samples (%s), lambdas %g/%g/%g" % (
        dataset.train_idx.size, cfg.dataset.kind,
        cfg.train.lambda1, cfg.train.lambda2, cfg.train.lambda3,
    ))
    models, history = train_pan(dataset, cfg.train, cfg.arch, log=say)
    save_config(out / "run_config.txt", cfg)
    for label, model in (
        ("encoder", models.encoder), ("utility", models.utility),
        ("privacy_d", models.privacy_d), ("privacy_r", models.privacy_r),
    ):
        if model is None:
            continue
        path = out / ("%s.panw" % label)
        save_model(path, model)
        say("wrote %s" % path)
    from .reporting import plot_history, write_history_csv

    write_history_csv(out / "history.csv", history)
    say("wrote %s" % (out / "history.csv"))
    if cfg.report.figures:
        plot_history(out / "history.png", history)
        say("wrote %s" % (out / "history.png"))
    return 0


def cmd_evaluate(args, say) -> int:
    cfg = _load_run_config(args)
    dataset = build_dataset(cfg)
    out = _out_dir(cfg)
    encoder = _load_encoder(args.encoder, cfg, dataset)
    say("attacking encoder %s with budget of %d epochs" % (args.encoder, cfg.eval.attacker_epochs))
    point = evaluate_encoder(
        encoder, dataset, attacker_budget(cfg), score_lambdas(cfg), cfg.eval.sign
    )
    label = "encoder:%s" % Path(args.encoder).stem
    say("u=%.2f%%  p1=%s  p2=%.5f  log_p2=%.4f  score=%.4f" % (
        point.utility,
        "n/a" if point.p1 is None else "%.2f%%" % point.p1,
        point.p2, point.log_p2, point.score,
    ))
    _write_tradeoff(out, "tradeoff", [(label, point)], cfg, say)
    return 0


def cmd_sweep(args, say) -> int:
    cfg = _load_run_config(args)
    dataset = build_dataset(cfg)
    validate_training_config(cfg.train, dataset)
    out = _out_dir(cfg)
    rows = run_lambda_sweep(
        dataset, cfg.train, cfg.sweep.lambda1, cfg.sweep.lambda3,
        cfg.arch, attacker_budget(cfg), score_lambdas(cfg), cfg.eval.sign, log=say,
    )
    _write_tradeoff(out, "sweep", rows, cfg, say)
    from .evaluation import pareto_front
    from .reporting import write_tradeoff_csv

    front = pareto_front([p for _, p in rows])
    keep = set(id(p) for p in front)
    write_tradeoff_csv(out / "sweep_pareto.csv", [(m, p) for m, p in rows if id(p) in keep])
    say("wrote %s (%d of %d points on the front)" % (out / "sweep_pareto.csv", len(front), len(rows)))
    return 0


def cmd_baseline(args, say) -> int:
    cfg = _load_run_config(args)
    dataset = build_dataset(cfg)
    out = _out_dir(cfg)
    budget = attacker_budget(cfg)
    weights = score_lambdas(cfg)
    b = cfg.baseline
    if args.name == "dp":
        rows = run_noise_baseline(
            dataset, "laplace", list(b.dp_factors), budget, weights, cfg.eval.sign,
            seed=cfg.train.seed,
        )
    elif args.name == "fl":
        sigma = b.fl_sigma / 255.0 if b.fl_sigma_scale == "raw" else b.fl_sigma
        rows = run_noise_baseline(
            dataset, "gaussian", [sigma], budget, weights, cfg.eval.sign,
            seed=cfg.train.seed,
        )
    elif args.name == "dnn":
        validate_training_config(cfg.train, dataset)
        _, history, point = run_dnn_baseline(
            dataset, cfg.train, cfg.arch, budget, weights, cfg.eval.sign, log=say
        )
        from .reporting import write_history_csv

        write_history_csv(out / "baseline_dnn_history.csv", history)
        rows = [("dnn", point)]
    else:  # hybrid
        validate_training_config(cfg.train, dataset)
        rows = run_hybrid_baseline(
            dataset, cfg.train, b.hybrid_components, list(b.hybrid_factors),
            cfg.arch, budget, weights, cfg.eval.sign, log=say,
        )
    for label, point in rows:
        say("%s  u=%.2f%%  p2=%.5f  score=%.4f" % (label, point.utility, point.p2, point.score))
    _write_tradeoff(out, "baseline_%s" % args.name, rows, cfg, say)
    return 0


def cmd_encode(args, say) -> int:
    cfg = _load_run_config(args)
    dataset = build_dataset(cfg)
    out = _out_dir(cfg)
    encoder = _load_encoder(args.encoder, cfg, dataset)
    from .evaluation import encode_features

    images = dataset.test_images()
    if args.count is not None:
        if args.count < 1:
            raise ConfigError("--count must be positive")
        images = images[: args.count]
    t0 = time.perf_counter()
    feats = encode_features(encoder, images)
    elapsed = time.perf_counter() - t0
    path = out / "features.panw"
    save_tensors(path, "features", {"features": feats})
    say("wrote %s (%d samples, feature shape %s)" % (path, feats.shape[0], feats.shape[1:]))
    say("encoded in %.3fs total, %.3fms per sample" % (elapsed, 1000.0 * elapsed / max(feats.shape[0], 1)))
    return 0


def cmd_gradcheck(args, say) -> int:
    seed = args.seed if args.seed is not None else 0
    reports = check_all(seed=seed)
    failed = 0
    for r in reports:
        say("%-16s %2d cases  max rel err %.3e  %s" % (r.name, r.cases, r.max_rel_err, "ok" if r.ok else "FAIL"))
        failed += 0 if r.ok else 1
    if failed:
        say("%d layer(s) failed" % failed)
        return 1
    say("all layers pass")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pan", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="override train.seed")
        p.add_argument("--out", help="override output.dir")

    common(sub.add_parser("train", help="train the adversarial encoder"))
    p = sub.add_parser("evaluate", help="attack a saved encoder")
    common(p)
    p.add_argument("--encoder", required=True, help="saved encoder weights (.panw)")
    common(sub.add_parser("sweep", help="retrain across privacy weightings"))
    p = sub.add_parser("baseline", help="run a comparison method")
    common(p)
    p.add_argument("--name", required=True, choices=("dp", "fl", "dnn", "hybrid"))
    p = sub.add_parser("encode", help="save encoded test-split features")
    common(p)
    p.add_argument("--encoder", required=True, help="saved encoder weights (.panw)")
    p.add_argument("--count", type=int, help="encode only the first N test samples")
    common(sub.add_parser("gradcheck", help="audit layer gradients"))
    return parser


_COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "baseline": cmd_baseline,
    "encode": cmd_encode,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)

    def say(msg):
        print(msg)

    try:
        return _COMMANDS[args.command](args, say)
    except (ConfigError, BuildError, data.DataError, FormatError, TrainingDiverged) as e:
        print("error: %s" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
