"""Synthetic fleet generator: mission mixes, load histories, ground-truth
crack trajectories and inspection subsets.

The fleet is 300 airplanes, 100 per mission mix.  Each airplane flies a
fixed fraction of its mix's first mission; the fraction grid runs 0.00,
0.01, ... 0.99 within each cohort.  Per flight, the mission is an
independent Bernoulli draw with that fraction, seeded per airplane so the
dataset is reproducible bit for bit from one master seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .cell import ParisParams, unroll_physics
from .errors import DataError

__all__ = [
    "MISSION_STRESS_MPA",
    "MIX_MISSIONS",
    "Airplane",
    "FleetDataset",
    "build_fleet",
    "generate_history",
    "generate_fleet_histories",
    "simulate_truth",
    "sample_inspection",
    "unreliability_curve",
    "INSPECTION_STRATEGIES",
]

MISSION_STRESS_MPA = {0: 92.5, 1: 100.0, 2: 110.0, 3: 130.0}
MIX_MISSIONS = {0: (0, 3), 1: (1, 2), 2: (1, 3)}
PLANES_PER_MIX = 100
DAYS_PER_YEAR = 365

INSPECTION_STRATEGIES = ("representative", "low_biased", "wide_spread", "high_biased")

# Seed-derivation domains under the master seed.
_DOMAIN_FLIGHTS = 0
_DOMAIN_INSPECTION = 1


@dataclass(frozen=True)
class Airplane:
    id: int
    mix_id: int
    fraction: float  # share of flights on the mix's first mission

    @property
    def stress_pair(self) -> tuple[float, float]:
        first, second = MIX_MISSIONS[self.mix_id]
        return MISSION_STRESS_MPA[first], MISSION_STRESS_MPA[second]

    @property
    def expected_stress(self) -> float:
        s1, s2 = self.stress_pair
        return self.fraction * s1 + (1.0 - self.fraction) * s2


def build_fleet() -> list[Airplane]:
    """All 300 airplanes.  The fraction grid is deterministic; randomness
    enters only through flight draws."""
    fleet = []
    for mix_id in sorted(MIX_MISSIONS):
        for k in range(PLANES_PER_MIX):
            fleet.append(Airplane(id=mix_id * PLANES_PER_MIX + k,
                                  mix_id=mix_id,
                                  fraction=k / PLANES_PER_MIX))
    return fleet


def _plane_rng(seed: int, plane_id: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(_DOMAIN_FLIGHTS, plane_id)))


def generate_history(plane: Airplane, years: int, flights_per_day: int, seed: int) -> np.ndarray:
    """Per-cycle stress ranges for one airplane over ``years`` of service."""
    if years < 1:
        raise ValueError("years must be at least 1")
    n = flights_per_day * DAYS_PER_YEAR * years
    s1, s2 = plane.stress_pair
    draws = _plane_rng(seed, plane.id).random(n)
    return np.where(draws < plane.fraction, s1, s2)


def generate_fleet_histories(fleet: list[Airplane], years: int,
                             flights_per_day: int, seed: int) -> np.ndarray:
    """(n_planes, T) load histories, row order by airplane id."""
    return np.stack([generate_history(p, years, flights_per_day, seed)
                     for p in sorted(fleet, key=lambda p: p.id)])


def simulate_truth(histories: np.ndarray, paris: ParisParams, a0: float) -> np.ndarray:
    """Ground-truth crack trajectories from the closed-form physics cell."""
    return unroll_physics(paris, a0, histories)


def sample_inspection(year_cracks: np.ndarray, n: int, strategy: str,
                      seed: int) -> np.ndarray:
    """Pick ``n`` airplane ids for inspection, by rank of inspection-year crack.

    low_biased takes the lowest n ranks, high_biased the highest,
    wide_spread n evenly spaced ranks including both extremes, and
    representative one random pick from each of n contiguous rank strata.
    Returns sorted airplane ids.
    """
    year_cracks = np.asarray(year_cracks, dtype=np.float64)
    n_planes = year_cracks.size
    if not 1 <= n <= n_planes:
        raise ValueError(f"inspection count must be in [1, {n_planes}], got {n}")
    if strategy not in INSPECTION_STRATEGIES:
        raise ValueError(f"unknown inspection strategy {strategy!r}; "
                         f"expected one of {INSPECTION_STRATEGIES}")
    order = np.lexsort((np.arange(n_planes), year_cracks))  # stable on ties
    if strategy == "low_biased":
        chosen = order[:n]
    elif strategy == "high_biased":
        chosen = order[-n:]
    elif strategy == "wide_spread":
        ranks = np.unique(np.round(np.linspace(0, n_planes - 1, n)).astype(int))
        # Rounding can collapse adjacent ranks for n close to n_planes;
        # top up from unused ranks to keep exactly n picks.
        if ranks.size < n:
            unused = np.setdiff1d(np.arange(n_planes), ranks)
            ranks = np.sort(np.concatenate([ranks, unused[:n - ranks.size]]))
        chosen = order[ranks]
    else:  # representative
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(_DOMAIN_INSPECTION,)))
        bounds = np.linspace(0, n_planes, n + 1).astype(int)
        picks = [int(rng.integers(lo, hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
        chosen = order[np.asarray(picks)]
    return np.sort(chosen)


def unreliability_curve(true_crack: np.ndarray, a_th: float) -> np.ndarray:
    """Per-cycle fraction of the fleet with crack length >= a_th."""
    true_crack = np.atleast_2d(np.asarray(true_crack, dtype=np.float64))
    if true_crack.size == 0:
        raise ValueError("need at least one trajectory")
    return (true_crack >= a_th).mean(axis=0)


# ---------------------------------------------------------------------------
# dataset container and on-disk layout


HISTORIES_FILE = "histories.csv"
TRUTH_FILE = "truth.csv"
INSPECTIONS_FILE = "inspections.csv"
MANIFEST_FILE = "manifest.json"


@dataclass
class FleetDataset:
    airplanes: list[Airplane]
    histories: np.ndarray       # (n_planes, T) stress ranges, MPa
    true_crack: np.ndarray      # (n_planes, T) crack length, m
    inspection_ids: np.ndarray  # sorted airplane ids with an inspection
    inspection_cracks: np.ndarray  # true crack at the inspection cycle
    manifest: dict

    @property
    def n_planes(self) -> int:
        return self.histories.shape[0]

    @property
    def n_cycles(self) -> int:
        return self.histories.shape[1]

    @property
    def inspection_cycle(self) -> int:
        insp = self.manifest["inspection"]
        return insp["year"] * self.manifest["flights_per_day"] * DAYS_PER_YEAR

    def paris(self) -> ParisParams:
        p = self.manifest["paris"]
        return ParisParams(c=p["c"], m=p["m"], f=p["f"])

    def manifest_sha256(self) -> str:
        return manifest_sha256(self.manifest)

    @classmethod
    def generate(cls, seed: int, years: int = 5, flights_per_day: int = 4,
                 paris: ParisParams = ParisParams(), a0: float = 0.005,
                 a_max: float = 0.05, inspection_n: int = 60,
                 inspection_strategy: str = "representative",
                 inspection_year: int = 5) -> "FleetDataset":
        if inspection_year > years:
            raise ValueError("inspection year cannot exceed the simulated years")
        fleet = build_fleet()
        histories = generate_fleet_histories(fleet, years, flights_per_day, seed)
        truth = simulate_truth(histories, paris, a0)
        cycle = inspection_year * flights_per_day * DAYS_PER_YEAR
        year_cracks = truth[:, cycle - 1]
        ids = sample_inspection(year_cracks, inspection_n, inspection_strategy, seed)
        manifest = {
            "format_version": 1,
            "seed": seed,
            "years": years,
            "flights_per_day": flights_per_day,
            "n_planes": len(fleet),
            "paris": {"c": paris.c, "m": paris.m, "f": paris.f},
            "a0_m": a0,
            "a_max_m": a_max,
            "mission_stress_mpa": {str(k): v for k, v in MISSION_STRESS_MPA.items()},
            "mission_mixes": {str(k): list(v) for k, v in MIX_MISSIONS.items()},
            "inspection": {"n": inspection_n, "strategy": inspection_strategy,
                           "year": inspection_year},
        }
        return cls(fleet, histories, truth, ids, year_cracks[ids], manifest)

    # -- persistence -------------------------------------------------------

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_long_csv(out / HISTORIES_FILE, "delta_s_mpa", self.histories)
        _write_long_csv(out / TRUTH_FILE, "crack_m", self.true_crack)
        with open(out / INSPECTIONS_FILE, "w") as fh:
            fh.write("plane_id,crack_m\n")
            for pid, crack in zip(self.inspection_ids.tolist(),
                                  self.inspection_cracks.tolist()):
                fh.write(f"{pid},{crack!r}\n")
        (out / MANIFEST_FILE).write_text(canonical_json(self.manifest))

    @classmethod
    def load(cls, data_dir: str | Path) -> "FleetDataset":
        data = Path(data_dir)
        manifest_path = data / MANIFEST_FILE
        if not manifest_path.exists():
            raise DataError(f"missing manifest: {manifest_path}")
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as e:
            raise DataError(f"corrupt manifest {manifest_path}: line {e.lineno}: {e.msg}") from e
        n_planes = manifest["n_planes"]
        n_cycles = manifest["years"] * manifest["flights_per_day"] * DAYS_PER_YEAR
        histories = _read_long_csv(data / HISTORIES_FILE, "delta_s_mpa", n_planes, n_cycles)
        truth = _read_long_csv(data / TRUTH_FILE, "crack_m", n_planes, n_cycles)
        ids, cracks = _read_inspections(data / INSPECTIONS_FILE)
        if np.any(ids < 0) or np.any(ids >= n_planes):
            raise DataError(f"{data / INSPECTIONS_FILE}: plane_id out of range")
        return cls(build_fleet(), histories, truth, ids, cracks, manifest)


def canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def manifest_sha256(manifest: dict) -> str:
    return hashlib.sha256(canonical_json(manifest).encode()).hexdigest()


def _write_long_csv(path: Path, value_col: str, matrix: np.ndarray) -> None:
    n, t_total = matrix.shape
    with open(path, "w") as fh:
        fh.write(f"plane_id,cycle_index,{value_col}\n")
        for pid in range(n):
            row = matrix[pid].tolist()  # Python floats, shortest repr
            fh.writelines(f"{pid},{t + 1},{v!r}\n" for t, v in enumerate(row))


def _read_long_csv(path: Path, value_col: str, n_planes: int, n_cycles: int) -> np.ndarray:
    if not path.exists():
        raise DataError(f"missing data file: {path}")
    try:
        frame = pd.read_csv(path, dtype={"plane_id": np.int64, "cycle_index": np.int64,
                                         value_col: np.float64},
                            float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as e:
        raise DataError(f"corrupt data file {path}: {e}") from e
    for col in ("plane_id", "cycle_index", value_col):
        if col not in frame.columns:
            raise DataError(f"{path}: line 1: missing column {col!r}")
    if len(frame) != n_planes * n_cycles:
        raise DataError(f"{path}: expected {n_planes * n_cycles} rows per manifest, "
                        f"found {len(frame)}")
    frame = frame.sort_values(["plane_id", "cycle_index"], kind="stable")
    pids = frame["plane_id"].to_numpy()
    cycles = frame["cycle_index"].to_numpy()
    expect_pid = np.repeat(np.arange(n_planes), n_cycles)
    expect_cycle = np.tile(np.arange(1, n_cycles + 1), n_planes)
    if not (np.array_equal(pids, expect_pid) and np.array_equal(cycles, expect_cycle)):
        bad = int(np.argmax((pids != expect_pid) | (cycles != expect_cycle)))
        raise DataError(f"{path}: line {bad + 2}: unexpected plane_id/cycle_index")
    return frame[value_col].to_numpy().reshape(n_planes, n_cycles)


def _read_inspections(path: Path) -> tuple[np.ndarray, np.ndarray]:
    if not path.exists():
        raise DataError(f"missing data file: {path}")
    try:
        frame = pd.read_csv(path, dtype={"plane_id": np.int64, "crack_m": np.float64},
                            float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as e:
        raise DataError(f"corrupt data file {path}: {e}") from e
    for col in ("plane_id", "crack_m"):
        if col not in frame.columns:
            raise DataError(f"{path}: line 1: missing column {col!r}")
    if len(frame) == 0:
        raise DataError(f"{path}: no inspection rows")
    if np.any(frame["crack_m"].to_numpy() <= 0.0):
        bad = int(np.argmax(frame["crack_m"].to_numpy() <= 0.0))
        raise DataError(f"{path}: line {bad + 2}: crack_m must be positive")
    return frame["plane_id"].to_numpy(), frame["crack_m"].to_numpy()
