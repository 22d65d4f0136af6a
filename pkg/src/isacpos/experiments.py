"""End-to-end experiment machinery: train/evaluate cells, multi-seed
comparisons, and the calibrated benchmark scenario.

A comparison cell simulates a training run, fits the cascaded positioner on
it, then evaluates every requested method on a fresh simulation of the same
scenario (same trajectory, independent noise seed). Everything is
deterministic given the manifest seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ekf as ekf_mod
from . import io, metrics
from .config import ExperimentManifest, TrainSettings
from .fusion import CascadedPositioner, FusionEstimate, initial_heading
from .geometry import geometric_track
from .metrics import ErrorSeries, SummaryRow
from .radar import WaveformConfig
from .simulate import NoiseConfig, ScenarioConfig, ScenarioRun, TrajectorySpec, run_scenario
from .types import Pose2D, SensorGeometry, merge_streams

METHOD_DNN_FUSION = "dnn-fusion"
METHOD_DNN_ISAC = "dnn-isac"
METHOD_EKF_FUSION = "ekf-fusion"
METHOD_GEOMETRIC = "geometric"
ALL_METHODS = (METHOD_DNN_FUSION, METHOD_DNN_ISAC, METHOD_EKF_FUSION, METHOD_GEOMETRIC)

_EVAL_SEED_OFFSET = 100_003  # derives the held-out evaluation noise stream


def benchmark_trajectory() -> TrajectorySpec:
    """Rectangular sweep with a diagonal return leg inside the 3.5 m area."""
    return TrajectorySpec(
        waypoints=[
            Pose2D(0.5, 0.5),
            Pose2D(3.0, 0.5),
            Pose2D(3.0, 3.0),
            Pose2D(0.5, 3.0),
            Pose2D(0.5, 0.5),
            Pose2D(3.0, 3.0),
        ],
        speeds=[0.3, 0.3, 0.3, 0.3, 0.25],
        dwells=[0.4, 0.4, 0.4, 0.4, 0.4, 0.4],
        ramp_accel=0.5,
    )


def benchmark_config(seed: int = 0) -> ScenarioConfig:
    """Scenario with noise calibrated so the sensing-only DNN lands in the
    5-15 cm average-error regime; 128 symbols per frame keep the multi-seed
    comparison inside its runtime budget."""
    return ScenarioConfig(
        aoi_extent=(3.5, 3.5),
        geometry=SensorGeometry(isac_position=(-0.5, 1.75)),
        isac_rate=33.0,
        imu_rate=50.0,
        truth_rate=100.0,
        noise=NoiseConfig(
            accel_noise_std=0.02,
            gyro_noise_std=0.002,
            accel_bias=0.0,
            csi_noise_std=1.0,
            clutter_amplitude=0.3,
            clutter_scatterers=5,
            echo_amplitude=1.0,
        ),
        waveform=WaveformConfig(num_symbols=128),
        detection_threshold=12.0,
        clutter_alpha=0.1,
        rng_seed=seed,
    )


def benchmark_train_settings() -> TrainSettings:
    return TrainSettings(max_epochs=120, patience=15, teacher_noise_std=0.02)


def benchmark_ekf_noise(cfg: ScenarioConfig) -> ekf_mod.EkfNoise:
    return ekf_mod.EkfNoise(accel_std=max(cfg.noise.accel_noise_std, 1e-3), range_var=0.04**2)


def train_positioner(
    run: ScenarioRun, cfg: ScenarioConfig, settings: TrainSettings, seed: int
) -> CascadedPositioner:
    """Fit the cascaded positioner on one simulated run."""
    model = CascadedPositioner(
        geometry=cfg.geometry,
        range_slack=cfg.waveform.range_bin_width,
        teacher_noise_std=settings.teacher_noise_std,
        stage2_noise_std=settings.stage2_noise_std,
        learning_rate=settings.learning_rate,
        batch_size=settings.batch_size,
        max_epochs=settings.max_epochs,
        patience=settings.patience,
        validation_fraction=settings.validation_fraction,
        random_state=seed,
    )
    return model.fit(run.isac, run.imu, run.truth)


def evaluate_method(
    method: str,
    run: ScenarioRun,
    cfg: ScenarioConfig,
    model: CascadedPositioner | None = None,
    ekf_noise: ekf_mod.EkfNoise | None = None,
):
    """Produce position estimates for one method on one simulated run.

    Returns ``(pairs, fusion_estimates)`` where ``pairs`` is a list of
    ``(t, Pose2D)`` and ``fusion_estimates`` carries the stage-1 usage flags
    (fusion method only, else None).
    """
    slack = cfg.waveform.range_bin_width
    if method == METHOD_DNN_FUSION:
        if model is None:
            raise ValueError(f"method {method} needs a trained model")
        estimates = model.predict(merge_streams(run.isac, run.imu))
        return [(e.t, e.position) for e in estimates], estimates
    if method == METHOD_DNN_ISAC:
        if model is None:
            raise ValueError(f"method {method} needs a trained model")
        return model.predict_isac_only(run.isac), None
    if method == METHOD_EKF_FUSION:
        noise = ekf_noise if ekf_noise is not None else benchmark_ekf_noise(cfg)
        initial = ekf_mod.initial_state(run.truth[0].position)
        track = ekf_mod.run_ekf(
            run.isac,
            run.imu,
            cfg.geometry,
            noise,
            initial,
            initial_yaw=initial_heading(run.truth),
            start_t=run.truth[0].t,
            range_slack=slack,
        )
        return track, None
    if method == METHOD_GEOMETRIC:
        return geometric_track(run.isac, cfg.geometry, slack), None
    raise ValueError(f"unknown method {method!r}; expected one of {ALL_METHODS}")


@dataclass
class CellResult:
    """One seed's worth of a comparison: per-method estimates and errors."""

    seed: int
    series: dict[str, ErrorSeries]
    estimates: dict[str, list[tuple[float, Pose2D]]]
    fusion_estimates: list[FusionEstimate] | None
    model: CascadedPositioner | None
    train_run: ScenarioRun
    eval_run: ScenarioRun


def run_cell(
    spec: TrajectorySpec,
    cfg: ScenarioConfig,
    methods: list[str],
    settings: TrainSettings,
    ekf_noise: ekf_mod.EkfNoise | None = None,
) -> CellResult:
    """Simulate, train, and evaluate all requested methods for one seed."""
    train_run = run_scenario(spec, cfg)
    eval_run = run_scenario(spec, cfg.with_seed(cfg.rng_seed + _EVAL_SEED_OFFSET))

    model = None
    if METHOD_DNN_FUSION in methods or METHOD_DNN_ISAC in methods:
        model = train_positioner(train_run, cfg, settings, cfg.rng_seed)

    series: dict[str, ErrorSeries] = {}
    estimates: dict[str, list[tuple[float, Pose2D]]] = {}
    fusion_estimates = None
    for method in methods:
        pairs, full = evaluate_method(method, eval_run, cfg, model, ekf_noise)
        estimates[method] = pairs
        if full is not None:
            fusion_estimates = full
        series[method] = metrics.align_and_error(pairs, eval_run.truth)
    return CellResult(
        seed=cfg.rng_seed,
        series=series,
        estimates=estimates,
        fusion_estimates=fusion_estimates,
        model=model,
        train_run=train_run,
        eval_run=eval_run,
    )


@dataclass
class ComparisonResult:
    """Multi-seed comparison: per-seed rows plus seed-averaged aggregates."""

    methods: list[str]
    cells: list[CellResult]
    per_seed_rows: list[tuple[int, SummaryRow]] = field(default_factory=list)
    aggregate_rows: list[SummaryRow] = field(default_factory=list)

    def aggregate_mean(self, method: str) -> float:
        for row in self.aggregate_rows:
            if row.method == method:
                return row.average_error
        raise KeyError(method)

    def pooled_errors(self, method: str) -> np.ndarray:
        return np.concatenate([cell.series[method].errors for cell in self.cells])


def run_comparison(
    spec: TrajectorySpec,
    cfg: ScenarioConfig,
    seeds: list[int],
    methods: list[str],
    settings: TrainSettings,
    ekf_noise: ekf_mod.EkfNoise | None = None,
) -> ComparisonResult:
    """Run one cell per seed and aggregate the summary over seeds."""
    cells = [
        run_cell(spec, cfg.with_seed(seed), methods, settings, ekf_noise) for seed in seeds
    ]
    result = ComparisonResult(methods=list(methods), cells=cells)
    for cell in cells:
        for method in methods:
            series = cell.series[method]
            result.per_seed_rows.append(
                (
                    cell.seed,
                    SummaryRow(
                        method, series.mean, metrics.percentile(series, 0.9), series.errors.size
                    ),
                )
            )
    for method in methods:
        means = [cell.series[method].mean for cell in cells]
        p90s = [metrics.percentile(cell.series[method], 0.9) for cell in cells]
        counts = sum(cell.series[method].errors.size for cell in cells)
        result.aggregate_rows.append(
            SummaryRow(method, float(np.mean(means)), float(np.mean(p90s)), counts)
        )
    return result


def write_comparison(outdir: str | Path, result: ComparisonResult) -> None:
    """Export summary CSV, per-method CDF CSVs, and the text report."""
    outdir = Path(outdir)
    with io.atomic_write(outdir / "summary.csv") as handle:
        handle.write("seed,method,average_error_m,p90_m,sample_count\n")
        for seed, row in result.per_seed_rows:
            handle.write(
                f"{seed},{row.method},{row.average_error!r},{row.p90!r},{row.sample_count}\n"
            )
        for row in result.aggregate_rows:
            handle.write(
                f"mean,{row.method},{row.average_error!r},{row.p90!r},{row.sample_count}\n"
            )
    for method in result.methods:
        errors = np.sort(result.pooled_errors(method))
        fractions = np.arange(1, errors.size + 1) / errors.size
        io.write_cdf_csv(outdir / f"cdf_{method}.csv", errors, fractions)
    report_lines = ["seed-averaged results", "====================="]
    for row in result.aggregate_rows:
        report_lines.append(
            f"{row.method}: mean error {row.average_error:.4f} m, "
            f"p90 {row.p90:.4f} m over {row.sample_count} samples"
        )
    for i, a in enumerate(result.aggregate_rows):
        for b in result.aggregate_rows[i + 1 :]:
            if b.average_error > 0:
                gain = (1.0 - a.average_error / b.average_error) * 100.0
                report_lines.append(
                    f"{a.method} vs {b.method}: {gain:+.1f}% lower seed-averaged mean error"
                )
    with io.atomic_write(outdir / "report.txt") as handle:
        handle.write("\n".join(report_lines) + "\n")


def comparison_from_manifest(manifest: ExperimentManifest) -> ComparisonResult:
    from .config import load_scenario, load_trajectory

    cfg = load_scenario(manifest.scenario_path)
    spec = load_trajectory(manifest.trajectory_path)
    accel_std = (
        manifest.ekf_accel_std
        if manifest.ekf_accel_std is not None
        else max(cfg.noise.accel_noise_std, 1e-3)
    )
    ekf_noise = ekf_mod.EkfNoise(accel_std=accel_std, range_var=manifest.ekf_range_std**2)
    return run_comparison(
        spec, cfg, manifest.seeds, manifest.methods, manifest.train, ekf_noise
    )
