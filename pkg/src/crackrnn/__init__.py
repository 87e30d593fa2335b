"""Fleet fatigue-crack prognosis with a hybrid physics/ML recurrent cell.

A trainable stress-intensity estimator feeds a fixed crack-growth power
law inside a recurrent cell.  The cell trains by backpropagation through
time from full load histories and sparse terminal crack observations,
and the package ships the synthetic fleet simulator, trainer, evaluation
sweeps and CLI needed to reproduce the reference experiments.
"""

from .autodiff import Tape, Tensor, finite_difference_gradient
from .cell import (
    DamageCell,
    LearnedStressModel,
    ParisParams,
    PhysicsStressModel,
    cell_step,
    paris_increment,
    stress_intensity_physics,
    unroll_physics,
)
from .config import ExperimentConfig, InspectionConfig, load_config
from .errors import ConfigError, DataError, NumericalError
from .evaluation import EvalSummary, evaluate, ratio_band, sweep_distribution, sweep_train_size
from .fleet import (
    Airplane,
    FleetDataset,
    build_fleet,
    generate_history,
    sample_inspection,
    simulate_truth,
    unreliability_curve,
)
from .mlp import MlpNetwork, Normalizer, build_stress_mlp, fit_normalizer
from .training import Adam, TrainingConfig, TrainReport, mse_loss, predict_fleet, train, train_on_subset

__version__ = "0.1.0"
