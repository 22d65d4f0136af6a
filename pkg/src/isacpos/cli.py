"""Command-line entry point: simulate, train, evaluate, compare.

The subcommands chain into reproducible experiments::

    isacpos simulate --config scenario.yaml --trajectory path.yaml --seed 1 --out data/
    isacpos train    --data data/ --model-out model.json
    isacpos evaluate --data data/ --method dnn-fusion --model model.json --out eval/
    isacpos compare  --manifest experiment.yaml --out results/

All outputs are CSV or JSON written atomically; the default output root can
be set with the ISACPOS_OUT environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import ekf as ekf_mod
from . import experiments, io, metrics
from .config import (
    TrainSettings,
    load_manifest,
    load_scenario,
    load_trajectory,
    train_settings_from_dict,
)
from .fusion import load_fusion, save_fusion
from .simulate import ScenarioRun, run_scenario

OUTPUT_ROOT_ENV = "ISACPOS_OUT"


def _default_out(name: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return (Path(root) / name) if root else Path(name)


def _load_run(data_dir: Path) -> ScenarioRun:
    for name in ("isac.csv", "imu.csv", "truth.csv"):
        if not (data_dir / name).exists():
            raise FileNotFoundError(f"missing measurement file: {data_dir / name}")
    return ScenarioRun(
        isac=io.read_isac_csv(data_dir / "isac.csv"),
        imu=io.read_imu_csv(data_dir / "imu.csv"),
        truth=io.read_truth_csv(data_dir / "truth.csv"),
        trajectory=None,
        report=None,
    )


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    spec = load_trajectory(args.trajectory)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    run = run_scenario(spec, cfg)
    outdir = Path(args.out)
    io.write_isac_csv(outdir / "isac.csv", run.isac)
    io.write_imu_csv(outdir / "imu.csv", run.imu)
    io.write_truth_csv(outdir / "truth.csv", run.truth)
    with io.atomic_write(outdir / "run_report.txt") as handle:
        handle.write(run.report.to_text())
    print(
        f"wrote {len(run.isac)} sensing, {len(run.imu)} inertial, "
        f"{len(run.truth)} truth samples to {outdir}"
    )
    return 0


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    run = _load_run(data_dir)
    cfg = load_scenario(args.config)
    settings = TrainSettings()
    if args.train_config:
        import yaml

        with open(args.train_config, encoding="utf-8") as handle:
            settings = train_settings_from_dict(yaml.safe_load(handle) or {})
    seed = args.seed if args.seed is not None else cfg.rng_seed
    model = experiments.train_positioner(run, cfg, settings, seed)
    save_fusion(args.model_out, model)

    history_path = (
        Path(args.history_out) if args.history_out else Path(args.model_out).with_suffix(".history.csv")
    )
    with io.atomic_write(history_path) as handle:
        handle.write("stage,epoch,train_loss,val_loss\n")
        for stage, trained in (("stage1", model.stage1_), ("stage2", model.stage2_)):
            for epoch, (train_loss, val_loss) in enumerate(trained.history_, start=1):
                handle.write(f"{stage},{epoch},{train_loss!r},{val_loss!r}\n")
    print(f"wrote model to {args.model_out} and loss history to {history_path}")
    return 0


def cmd_evaluate(args) -> int:
    data_dir = Path(args.data)
    run = _load_run(data_dir)
    cfg = load_scenario(args.config)
    model = None
    if args.method in (experiments.METHOD_DNN_FUSION, experiments.METHOD_DNN_ISAC):
        if not args.model:
            raise ValueError(f"method {args.method} requires --model")
        model = load_fusion(args.model)
    ekf_noise = ekf_mod.EkfNoise(
        accel_std=(
            args.ekf_accel_std
            if args.ekf_accel_std is not None
            else max(cfg.noise.accel_noise_std, 1e-3)
        ),
        range_var=args.ekf_range_std**2,
    )
    pairs, fusion_estimates = experiments.evaluate_method(
        args.method, run, cfg, model, ekf_noise
    )
    outdir = Path(args.out)
    if fusion_estimates is not None:
        io.write_fusion_estimates_csv(outdir / "estimates.csv", fusion_estimates)
    else:
        io.write_estimates_csv(outdir / "estimates.csv", pairs)
    series = metrics.align_and_error(pairs, run.truth)
    io.write_error_csv(outdir / "errors.csv", series.t, series.errors)
    print(
        f"{args.method}: {series.errors.size} estimates, "
        f"mean error {series.mean:.4f} m, p90 {metrics.percentile(series, 0.9):.4f} m"
    )
    return 0


def cmd_compare(args) -> int:
    manifest = load_manifest(args.manifest, default_output=_default_out("comparison"))
    if args.out:
        manifest.output_dir = Path(args.out)
    result = experiments.comparison_from_manifest(manifest)
    experiments.write_comparison(manifest.output_dir, result)
    print((manifest.output_dir / "report.txt").read_text(), end="")
    if args.assert_ordering:
        fusion = result.aggregate_mean(experiments.METHOD_DNN_FUSION)
        isac_only = result.aggregate_mean(experiments.METHOD_DNN_ISAC)
        if not fusion < isac_only:
            print(
                f"ordering violated: dnn-fusion mean {fusion:.4f} m is not below "
                f"dnn-isac mean {isac_only:.4f} m",
                file=sys.stderr,
            )
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isacpos",
        description="Sensor-fusion positioning experiments: radar sensing + inertial data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate measurement CSVs for a scenario")
    p_sim.add_argument("--config", required=True, help="scenario YAML")
    p_sim.add_argument("--trajectory", required=True, help="trajectory YAML")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sim.add_argument("--out", default=_default_out("data"), help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_train = sub.add_parser("train", help="train the cascaded positioner on measurement CSVs")
    p_train.add_argument("--data", required=True, help="directory with isac/imu/truth CSVs")
    p_train.add_argument("--config", required=True, help="scenario YAML (geometry, waveform)")
    p_train.add_argument("--train-config", default=None, help="training settings YAML")
    p_train.add_argument("--seed", type=int, default=None, help="training seed")
    p_train.add_argument("--model-out", required=True, help="output model JSON path")
    p_train.add_argument("--history-out", default=None, help="loss history CSV path")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="run one positioning method over measurement CSVs")
    p_eval.add_argument("--data", required=True, help="directory with isac/imu/truth CSVs")
    p_eval.add_argument("--config", required=True, help="scenario YAML")
    p_eval.add_argument("--method", required=True, choices=experiments.ALL_METHODS)
    p_eval.add_argument("--model", default=None, help="fusion model JSON (dnn methods)")
    p_eval.add_argument("--ekf-range-std", type=float, default=0.1)
    p_eval.add_argument("--ekf-accel-std", type=float, default=None)
    p_eval.add_argument("--out", default=_default_out("eval"), help="output directory")
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = sub.add_parser("compare", help="multi-seed comparison across methods")
    p_cmp.add_argument("--manifest", required=True, help="experiment manifest YAML")
    p_cmp.add_argument("--out", default=None, help="override the manifest output directory")
    p_cmp.add_argument(
        "--assert-ordering",
        action="store_true",
        help="exit nonzero unless dnn-fusion beats dnn-isac on seed-averaged mean error",
    )
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
