"""Fleet-level evaluation metrics and experiment sweeps.

Emits one CSV per figure-style result (prediction scatter, ratio bands,
training-set-size sweep, observation-distribution sweep, unreliability
curves) plus a JSON index mapping result names to files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fleet import INSPECTION_STRATEGIES, FleetDataset, sample_inspection, unreliability_curve
from .training import TrainingConfig, TrainReport, predict_fleet, train_on_subset

__all__ = [
    "EvalSummary",
    "evaluate",
    "ratio_band",
    "sweep_train_size",
    "sweep_distribution",
    "DISTRIBUTION_CASES",
    "write_scatter_csv",
    "write_ratio_band_csv",
    "write_size_sweep_csv",
    "write_distribution_sweep_csv",
    "write_unreliability_csv",
    "write_index",
]

# Observation-distribution cases, by the shape of the observed crack
# histogram: 0 biased low, 1 representative of the fleet, 2 spread wide
# across the range, 3 biased high.
DISTRIBUTION_CASES = {
    0: "low_biased",
    1: "representative",
    2: "wide_spread",
    3: "high_biased",
}


@dataclass
class EvalSummary:
    mse: float
    max_abs_error: float
    mean_abs_error: float
    ratio_min: float
    ratio_max: float
    n_planes: int
    scatter: list[tuple[float, float]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "mse": self.mse,
            "max_abs_error": self.max_abs_error,
            "mean_abs_error": self.mean_abs_error,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "n_planes": self.n_planes,
        }


def evaluate(predicted, actual) -> EvalSummary:
    """Terminal-crack prediction summary over a set of airplanes."""
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if predicted.size != actual.size or predicted.size == 0:
        raise ValueError(f"need equal non-empty lengths, got {predicted.size} "
                         f"and {actual.size}")
    if np.any(actual <= 0.0):
        raise ValueError("actual crack lengths must be strictly positive")
    err = predicted - actual
    ratio = predicted / actual
    return EvalSummary(
        mse=float(np.mean(err * err)),
        max_abs_error=float(np.max(np.abs(err))),
        mean_abs_error=float(np.mean(np.abs(err))),
        ratio_min=float(ratio.min()),
        ratio_max=float(ratio.max()),
        n_planes=predicted.size,
        scatter=list(zip(actual.tolist(), predicted.tolist())),
    )


def ratio_band(predicted_traj: np.ndarray, actual_traj: np.ndarray) -> np.ndarray:
    """Per-cycle (min, max) of predicted/actual over the fleet; shape (T, 2)."""
    predicted_traj = np.atleast_2d(np.asarray(predicted_traj, dtype=np.float64))
    actual_traj = np.atleast_2d(np.asarray(actual_traj, dtype=np.float64))
    if predicted_traj.shape != actual_traj.shape:
        raise ValueError(f"trajectory shapes differ: {predicted_traj.shape} "
                         f"vs {actual_traj.shape}")
    if np.any(actual_traj <= 0.0):
        raise ValueError("actual trajectories must be strictly positive")
    ratio = predicted_traj / actual_traj
    return np.stack([ratio.min(axis=0), ratio.max(axis=0)], axis=1)


def _fleet_mse(cell, dataset: FleetDataset) -> tuple[float, np.ndarray]:
    cycle = dataset.inspection_cycle
    traj = predict_fleet(cell, dataset.histories[:, :cycle], dataset.manifest["a0_m"])
    pred = traj[:, -1]
    actual = dataset.true_crack[:, cycle - 1]
    return float(np.mean((pred - actual) ** 2)), pred


def sweep_train_size(sizes: list[int], dataset: FleetDataset,
                     cfg: TrainingConfig) -> list[tuple[int, float, TrainReport]]:
    """Train one model per training-set size on representative samples.

    The dataset stays frozen across sizes so differences reflect only the
    training subset.  Returns (size, fleet mse, report) per size.
    """
    if any(not 1 <= s <= dataset.n_planes for s in sizes):
        raise ConfigError(f"sweep sizes must lie in [1, {dataset.n_planes}], got {sizes}")
    cycle = dataset.inspection_cycle
    year_cracks = dataset.true_crack[:, cycle - 1]
    seed = dataset.manifest["seed"]
    results = []
    for size in sizes:
        ids = sample_inspection(year_cracks, size, "representative", seed)
        cell, report = train_on_subset(dataset, ids, cfg)
        mse, _ = _fleet_mse(cell, dataset)
        results.append((size, mse, report))
    return results


def sweep_distribution(n: int, dataset: FleetDataset, cfg: TrainingConfig,
                       cases: list[int] | None = None,
                       ) -> dict[int, tuple[EvalSummary, TrainReport]]:
    """Train one model per observation-distribution case at fixed n."""
    if n < 2:
        raise ConfigError("distribution sweep needs at least 2 observations")
    if cases is None:
        cases = sorted(DISTRIBUTION_CASES)
    cycle = dataset.inspection_cycle
    year_cracks = dataset.true_crack[:, cycle - 1]
    seed = dataset.manifest["seed"]
    out: dict[int, tuple[EvalSummary, TrainReport]] = {}
    for case in cases:
        strategy = DISTRIBUTION_CASES[case]
        ids = sample_inspection(year_cracks, n, strategy, seed)
        cell, report = train_on_subset(dataset, ids, cfg)
        _, pred = _fleet_mse(cell, dataset)
        out[case] = (evaluate(pred, year_cracks), report)
    return out


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(x: float) -> str:
    return repr(float(x))


def write_scatter_csv(path: Path, actual: np.ndarray,
                      predicted_by_phase: dict[str, np.ndarray]) -> None:
    with open(path, "w") as fh:
        fh.write("actual_m,predicted_m,phase\n")
        for phase in sorted(predicted_by_phase):
            predicted = predicted_by_phase[phase]
            for a, p in zip(actual, predicted):
                fh.write(f"{_fmt(a)},{_fmt(p)},{phase}\n")


def write_ratio_band_csv(path: Path, band: np.ndarray, phase: str | None = None) -> None:
    header = "cycle,ratio_min,ratio_max" + (",phase" if phase else "")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        suffix = f",{phase}" if phase else ""
        for t in range(band.shape[0]):
            fh.write(f"{t + 1},{_fmt(band[t, 0])},{_fmt(band[t, 1])}{suffix}\n")


def write_size_sweep_csv(path: Path, results: list[tuple[int, float, TrainReport]]) -> None:
    with open(path, "w") as fh:
        fh.write("n_train,fleet_mse\n")
        for size, mse, _ in results:
            fh.write(f"{size},{_fmt(mse)}\n")


def write_distribution_sweep_csv(path: Path,
                                 results: dict[int, tuple[EvalSummary, TrainReport]]) -> None:
    with open(path, "w") as fh:
        fh.write("case,strategy,fleet_mse,ratio_min,ratio_max\n")
        for case in sorted(results):
            summary, _ = results[case]
            fh.write(f"{case},{DISTRIBUTION_CASES[case]},{_fmt(summary.mse)},"
                     f"{_fmt(summary.ratio_min)},{_fmt(summary.ratio_max)}\n")


def write_unreliability_csv(path: Path, true_crack: np.ndarray,
                            thresholds: list[float]) -> None:
    with open(path, "w") as fh:
        fh.write("cycle,a_th,proportion\n")
        for a_th in thresholds:
            curve = unreliability_curve(true_crack, a_th)
            for t, prop in enumerate(curve):
                fh.write(f"{t + 1},{_fmt(a_th)},{_fmt(prop)}\n")


def write_index(out_dir: Path, entries: dict[str, list[str]]) -> None:
    """JSON index mapping result names to the files backing them."""
    path = out_dir / "index.json"
    existing: dict[str, list[str]] = {}
    if path.exists():
        existing = json.loads(path.read_text())
    existing.update(entries)
    path.write_text(json.dumps(existing, sort_keys=True, indent=1))
