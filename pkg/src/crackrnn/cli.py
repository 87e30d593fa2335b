"""Command-line entry point wiring the modules into reproducible experiments.

Subcommands: ``generate`` (synthesize a fleet dataset), ``train`` (fit the
hybrid cell from inspections), ``evaluate`` (emit result CSVs and figures
for one result kind) and ``sweep`` (training-set-size or observation-
distribution studies).  Exit codes: 0 success, 2 configuration error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .cell import DamageCell, LearnedStressModel
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, NumericalError
from .evaluation import (
    DISTRIBUTION_CASES,
    evaluate,
    ratio_band,
    sweep_distribution,
    sweep_train_size,
    write_distribution_sweep_csv,
    write_index,
    write_ratio_band_csv,
    write_scatter_csv,
    write_size_sweep_csv,
    write_unreliability_csv,
)
from .fleet import FleetDataset, manifest_sha256
from .mlp import MlpNetwork, build_stress_mlp
from .training import predict_fleet, train_on_subset

logger = logging.getLogger(__name__)

RESULT_KINDS = ("scatter", "ratio", "size_sweep", "distribution_sweep", "unreliability")


def _setup_logging() -> None:
    level = os.environ.get("CRACKRNN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _echo_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg.save(out_dir / "config.json")


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid --sizes list {text!r}: {e}") from e
    if not sizes:
        raise ConfigError("--sizes must name at least one size")
    return sizes


def _config_overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": getattr(args, "seed", None),
        "years": getattr(args, "years", None),
        "inspection.n": getattr(args, "inspection_n", None),
        "inspection.strategy": getattr(args, "inspection_strategy", None),
        "inspection.year": getattr(args, "inspection_year", None),
        "training.epochs": getattr(args, "epochs", None),
        "training.learning_rate": getattr(args, "learning_rate", None),
        "training.seed": getattr(args, "training_seed", None),
    }


def _load_dataset(data_dir: str) -> FleetDataset:
    return FleetDataset.load(data_dir)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    out = Path(args.out)
    dataset = FleetDataset.generate(
        seed=cfg.seed, years=cfg.years, flights_per_day=cfg.flights_per_day,
        paris=cfg.paris(), a0=cfg.a0_m, a_max=cfg.a_max_m,
        inspection_n=cfg.inspection.n, inspection_strategy=cfg.inspection.strategy,
        inspection_year=cfg.inspection.year)
    dataset.save(out)
    _echo_config(cfg, out)
    logger.info("wrote dataset for %d airplanes x %d cycles to %s",
                dataset.n_planes, dataset.n_cycles, out)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    dataset = _load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cell, report = train_on_subset(dataset, dataset.inspection_ids, cfg.training)
    net: MlpNetwork = cell.stress_model.net
    ckpt_path = out / "checkpoint.json"
    net.save(ckpt_path, meta={"data_manifest_sha256": dataset.manifest_sha256()})
    report.checkpoint = ckpt_path.name
    (out / "train_report.json").write_text(
        json.dumps(report.to_json_dict(), sort_keys=True, indent=1))
    _echo_config(cfg, out)
    if not args.no_figures:
        from .plotting import plot_loss_history
        plot_loss_history(report.loss_history, out / "figures" / "loss_history.png")
    logger.info("trained %d epochs to mse %.3e in %.1fs",
                report.epochs_run, report.final_loss, report.wall_time_s)
    return 0


def _load_checkpoint_for(dataset: FleetDataset, path: str) -> MlpNetwork:
    ckpt_path = Path(path)
    if not ckpt_path.exists():
        raise DataError(f"checkpoint not found: {ckpt_path}")
    try:
        ckpt = json.loads(ckpt_path.read_text())
        net = MlpNetwork.from_checkpoint(ckpt)
    except (KeyError, ValueError) as e:
        raise DataError(f"corrupt checkpoint {ckpt_path}: {e}") from e
    trained_hash = ckpt.get("meta", {}).get("data_manifest_sha256")
    data_hash = dataset.manifest_sha256()
    if trained_hash is not None and trained_hash != data_hash:
        raise DataError(
            f"checkpoint/dataset mismatch: checkpoint was trained against manifest "
            f"{trained_hash}, dataset manifest is {data_hash}")
    return net


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    dataset = _load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    figures = not args.no_figures
    kind = args.figure
    cycle = dataset.inspection_cycle
    actual_y5 = dataset.true_crack[:, cycle - 1]
    a0 = dataset.manifest["a0_m"]

    if kind in ("scatter", "ratio"):
        if args.checkpoint is None:
            raise ConfigError(f"--checkpoint is required for --figure {kind}")
        net = _load_checkpoint_for(dataset, args.checkpoint)
        before_net = build_stress_mlp(net.normalizer, seed=net.init_seed,
                                      dk_ref=net.dk_ref)
        paris = dataset.paris()
        traj_after = predict_fleet(DamageCell(LearnedStressModel(net), paris),
                                   dataset.histories[:, :cycle], a0)
        traj_before = predict_fleet(DamageCell(LearnedStressModel(before_net), paris),
                                    dataset.histories[:, :cycle], a0)

    if kind == "scatter":
        phases = {"before": traj_before[:, -1], "after": traj_after[:, -1]}
        write_scatter_csv(out / "scatter.csv", actual_y5, phases)
        summaries = {ph: evaluate(pred, actual_y5).to_json_dict()
                     for ph, pred in phases.items()}
        (out / "scatter_summary.json").write_text(
            json.dumps(summaries, sort_keys=True, indent=1))
        files = ["scatter.csv", "scatter_summary.json"]
        if figures:
            from .plotting import plot_scatter
            plot_scatter(actual_y5, phases, out / "figures" / "scatter.png")
            files.append("figures/scatter.png")
        write_index(out, {"scatter": files})

    elif kind == "ratio":
        truth = dataset.true_crack[:, :cycle]
        band_after = ratio_band(traj_after, truth)
        band_before = ratio_band(traj_before, truth)
        write_ratio_band_csv(out / "ratio_band.csv", band_after)
        write_ratio_band_csv(out / "ratio_band_before.csv", band_before)
        files = ["ratio_band.csv", "ratio_band_before.csv"]
        if figures:
            from .plotting import plot_ratio_band
            plot_ratio_band({"before": band_before, "after": band_after},
                            out / "figures" / "ratio_band.png")
            files.append("figures/ratio_band.png")
        write_index(out, {"ratio": files})

    elif kind == "size_sweep":
        sizes = _parse_sizes(args.sizes)
        results = sweep_train_size(sizes, dataset, cfg.training)
        write_size_sweep_csv(out / "size_sweep.csv", results)
        files = ["size_sweep.csv"]
        if figures:
            from .plotting import plot_size_sweep
            plot_size_sweep([(s, m) for s, m, _ in results],
                            out / "figures" / "size_sweep.png")
            files.append("figures/size_sweep.png")
        write_index(out, {"size_sweep": files})

    elif kind == "distribution_sweep":
        results = sweep_distribution(args.n, dataset, cfg.training)
        write_distribution_sweep_csv(out / "distribution_sweep.csv", results)
        files = ["distribution_sweep.csv"]
        if figures:
            from .plotting import plot_distribution_sweep
            plot_distribution_sweep(
                {c: (DISTRIBUTION_CASES[c], s.mse) for c, (s, _) in results.items()},
                out / "figures" / "distribution_sweep.png")
            files.append("figures/distribution_sweep.png")
        write_index(out, {"distribution_sweep": files})

    elif kind == "unreliability":
        thresholds = [float(x) for x in args.a_th.split(",") if x.strip()]
        if not thresholds:
            raise ConfigError("--a-th must name at least one threshold")
        write_unreliability_csv(out / "unreliability.csv", dataset.true_crack, thresholds)
        files = ["unreliability.csv"]
        if figures:
            from .plotting import plot_unreliability
            from .fleet import unreliability_curve
            curves = {a: unreliability_curve(dataset.true_crack, a) for a in thresholds}
            plot_unreliability(curves, out / "figures" / "unreliability.png")
            files.append("figures/unreliability.png")
        write_index(out, {"unreliability": files})

    _echo_config(cfg, out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    args.figure = "size_sweep" if args.kind == "size" else "distribution_sweep"
    return cmd_evaluate(args)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crackrnn",
        description="Fleet fatigue-crack prognosis with a hybrid recurrent cell.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_training: bool = False) -> None:
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--years", type=int, default=None)
        p.add_argument("--inspection-n", type=int, default=None)
        p.add_argument("--inspection-strategy", default=None)
        p.add_argument("--inspection-year", type=int, default=None)
        if with_training:
            p.add_argument("--epochs", type=int, default=None)
            p.add_argument("--learning-rate", type=float, default=None)
            p.add_argument("--training-seed", type=int, default=None)

    gen = sub.add_parser("generate", help="synthesize a fleet dataset")
    add_common(gen)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train the hybrid cell from inspections")
    add_common(tr, with_training=True)
    tr.add_argument("--data", required=True, help="dataset directory")
    tr.add_argument("--out", required=True, help="output directory")
    tr.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="emit result CSVs and figures")
    add_common(ev, with_training=True)
    ev.add_argument("--checkpoint", default=None, help="trained checkpoint JSON")
    ev.add_argument("--data", required=True, help="dataset directory")
    ev.add_argument("--figure", required=True, choices=RESULT_KINDS)
    ev.add_argument("--sizes", default="5,15,30,45,60",
                    help="comma-separated sizes for size_sweep")
    ev.add_argument("--n", type=int, default=15,
                    help="observations per case for distribution_sweep")
    ev.add_argument("--a-th", default="0.05",
                    help="comma-separated thresholds (m) for unreliability")
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="run a training-subset study")
    add_common(sw, with_training=True)
    sw.add_argument("--kind", required=True, choices=("size", "distribution"))
    sw.add_argument("--data", required=True, help="dataset directory")
    sw.add_argument("--sizes", default="5,15,30,45,60")
    sw.add_argument("--n", type=int, default=15)
    sw.add_argument("--checkpoint", default=None, help=argparse.SUPPRESS)
    sw.add_argument("--a-th", default="0.05", help=argparse.SUPPRESS)
    sw.add_argument("--out", required=True, help="output directory")
    sw.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sw.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
