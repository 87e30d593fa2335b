"""Training of the hybrid cell from terminal crack observations.

Each epoch unrolls every training airplane over its full load history up
to the inspection cycle, scores the terminal crack predictions against
the observed cracks with mean squared error, backpropagates through all
cycles and applies one full-batch adaptive-moment update to the trainable
parameters.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .cell import DamageCell, LearnedStressModel, ParisParams
from .errors import NumericalError
from .fleet import FleetDataset
from .mlp import MlpNetwork, build_stress_mlp, fit_normalizer

__all__ = [
    "TrainingConfig",
    "TrainReport",
    "Adam",
    "mse_loss",
    "train",
    "predict_fleet",
    "default_dk_ref",
    "train_on_subset",
]

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    """Full-batch training settings.

    ``optimizer`` selects between a quasi-Newton fit (``lbfgs``, the
    default: the loss is smooth, deterministic and full-batch, where
    curvature information dominates first-order methods) and adaptive
    moment estimation (``adam``).  ``epochs`` caps Adam epochs or
    quasi-Newton iterations.  The moment decays, epsilon, learning rate
    and gradient clipping apply to Adam only.
    """

    epochs: int = 600
    optimizer: str = "lbfgs"
    learning_rate: float = 8e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch: str = "full"
    seed: int = 0
    log_every: int = 50
    early_stop_patience: int = 50
    early_stop_min_improvement: float = 1e-12
    clip_norm: float = 1e3
    history_size: int = 30  # quasi-Newton memory

    def __post_init__(self) -> None:
        if self.optimizer not in ("lbfgs", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("moment decay rates must lie in (0, 1)")
        if self.batch != "full":
            raise ValueError("only full-batch training is supported")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class TrainReport:
    loss_history: list[float] = field(default_factory=list)
    grad_norm_history: list[float] = field(default_factory=list)
    epochs_run: int = 0
    clip_events: int = 0
    final_loss: float = math.nan
    wall_time_s: float = 0.0
    seed: int = 0
    config: dict = field(default_factory=dict)
    checkpoint: str | None = None

    def to_json_dict(self) -> dict:
        # Wall time is intentionally left out: report files must be
        # byte-identical across reruns with the same seed.
        return {
            "loss_history": self.loss_history,
            "grad_norm_history": self.grad_norm_history,
            "epochs_run": self.epochs_run,
            "clip_events": self.clip_events,
            "final_loss": self.final_loss,
            "seed": self.seed,
            "config": self.config,
            "checkpoint": self.checkpoint,
        }


class Adam:
    """Adaptive moment estimation over a fixed parameter list."""

    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1**self.t)
            v_hat = self.v[i] / (1.0 - b2**self.t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def mse_loss(predicted, observed) -> float:
    """Mean squared error between terminal crack predictions and observations."""
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    observed = np.asarray(observed, dtype=np.float64).ravel()
    if predicted.size != observed.size:
        raise ValueError(f"length mismatch: {predicted.size} predictions "
                         f"vs {observed.size} observations")
    if predicted.size == 0:
        raise ValueError("need at least one observation")
    diff = predicted - observed
    return float(np.mean(diff * diff))


def default_dk_ref(ds_mean: float, a0: float, a_max: float) -> float:
    """Physical operating point for the estimator's output layer at init."""
    return ds_mean * math.sqrt(math.pi * math.sqrt(a0 * a_max))


class _TerminalLossProblem:
    """Shared forward/backward machinery for both optimizers."""

    def __init__(self, cell: DamageCell, histories: np.ndarray,
                 observations: np.ndarray, a0: float, plane_ids: np.ndarray):
        n_planes, n_cycles = histories.shape
        self.cell = cell
        self.params = cell.trainable_parameters()
        self.plane_ids = plane_ids
        self.load_columns = [ad.constant(histories[:, t:t + 1]) for t in range(n_cycles)]
        self.obs_t = ad.constant(observations.reshape(-1, 1))
        self.a0_col = np.full((n_planes, 1), float(a0))
        self.epoch = 0

    def loss_and_grads(self) -> tuple[float, list[np.ndarray]]:
        cell_zero_grad(self.cell)
        with Tape() as tape:
            state = ad.constant(self.a0_col)
            for ds in self.load_columns:
                state = self.cell.step(state, ds)
            loss_t = ad.mean_all(ad.square(ad.sub(state, self.obs_t)))
            loss = float(loss_t.value)
            if not math.isfinite(loss):
                bad = self.plane_ids[~np.isfinite(state.value[:, 0])]
                raise NumericalError("non-finite training loss", epoch=self.epoch,
                                     plane_ids=bad, param_norm=_param_norm(self.params))
            grad_map = tape.backward(loss_t, wrt=self.params)
        grads = [grad_map[p.name] for p in self.params]
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NumericalError("non-finite gradient", epoch=self.epoch,
                                     plane_ids=self.plane_ids,
                                     param_norm=_param_norm(self.params))
        return loss, grads


def train(cell: DamageCell, histories: np.ndarray, observations: np.ndarray,
          a0: float, cfg: TrainingConfig,
          plane_ids: np.ndarray | None = None) -> TrainReport:
    """Fit the cell's trainable parameters in place; returns the report.

    ``histories`` is (B, T) with T the inspection cycle; ``observations``
    holds the B observed terminal cracks.  Non-finite losses or gradients
    abort with a diagnostic.
    """
    histories = np.atleast_2d(np.asarray(histories, dtype=np.float64))
    observations = np.asarray(observations, dtype=np.float64).ravel()
    n_planes, n_cycles = histories.shape
    if observations.size != n_planes:
        raise ValueError(f"{n_planes} histories but {observations.size} observations")
    if plane_ids is None:
        plane_ids = np.arange(n_planes)

    problem = _TerminalLossProblem(cell, histories, observations, a0, plane_ids)
    report = TrainReport(seed=cfg.seed, config=asdict(cfg))
    started = time.perf_counter()
    if cfg.epochs > 0:
        if cfg.optimizer == "adam":
            _train_adam(problem, cfg, report)
        else:
            _train_lbfgs(problem, cfg, report)
    report.wall_time_s = time.perf_counter() - started
    report.final_loss = report.loss_history[-1] if report.loss_history else math.nan
    return report


def _train_adam(problem: _TerminalLossProblem, cfg: TrainingConfig,
                report: TrainReport) -> None:
    params = problem.params
    opt = Adam(params, lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2,
               epsilon=cfg.epsilon)
    best_loss = math.inf
    best_epoch = -1
    for epoch in range(cfg.epochs):
        problem.epoch = epoch
        loss, grads = problem.loss_and_grads()
        grad_norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
        if grad_norm > cfg.clip_norm:
            grads = [g * (cfg.clip_norm / grad_norm) for g in grads]
            report.clip_events += 1
            logger.info("epoch %d: clipped gradient norm %.3g -> %.3g",
                        epoch, grad_norm, cfg.clip_norm)
        opt.step(grads)

        report.loss_history.append(loss)
        report.grad_norm_history.append(grad_norm)
        report.epochs_run = epoch + 1
        if epoch % cfg.log_every == 0:
            logger.info("epoch %d: mse %.6e, grad norm %.3e", epoch, loss, grad_norm)

        if loss < best_loss - cfg.early_stop_min_improvement:
            best_loss = loss
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.early_stop_patience:
            logger.info("early stop at epoch %d (best %.6e at epoch %d)",
                        epoch, best_loss, best_epoch)
            break


def _train_lbfgs(problem: _TerminalLossProblem, cfg: TrainingConfig,
                 report: TrainReport) -> None:
    from scipy.optimize import minimize

    net_params = problem.params
    shapes = [p.value.shape for p in net_params]
    sizes = [p.value.size for p in net_params]
    last = {"loss": math.nan, "grad_norm": math.nan}

    def set_theta(theta: np.ndarray) -> None:
        offset = 0
        for p, shape, size in zip(net_params, shapes, sizes):
            p.value = theta[offset:offset + size].reshape(shape).copy()
            offset += size

    def fun(theta: np.ndarray) -> tuple[float, np.ndarray]:
        set_theta(theta)
        loss, grads = problem.loss_and_grads()
        flat = np.concatenate([g.ravel() for g in grads])
        last["loss"] = loss
        last["grad_norm"] = float(np.linalg.norm(flat))
        return loss, flat

    def callback(_xk: np.ndarray) -> None:
        report.loss_history.append(last["loss"])
        report.grad_norm_history.append(last["grad_norm"])
        problem.epoch = len(report.loss_history)
        report.epochs_run = problem.epoch
        if (problem.epoch - 1) % cfg.log_every == 0:
            logger.info("iteration %d: mse %.6e, grad norm %.3e",
                        problem.epoch - 1, last["loss"], last["grad_norm"])

    theta0 = np.concatenate([p.value.ravel() for p in net_params])
    result = minimize(fun, theta0, jac=True, method="L-BFGS-B", callback=callback,
                      options={"maxiter": cfg.epochs,
                               "maxcor": cfg.history_size,
                               "ftol": cfg.early_stop_min_improvement,
                               "gtol": 1e-16})
    set_theta(result.x)
    # The minimizer may end between callbacks; pin the report to the
    # returned point.
    final_loss = float(result.fun)
    if not report.loss_history or report.loss_history[-1] != final_loss:
        report.loss_history.append(final_loss)
        report.grad_norm_history.append(float(np.linalg.norm(result.jac)))
    report.epochs_run = len(report.loss_history)
    logger.info("quasi-Newton fit: %d iterations, mse %.6e (%s)",
                int(result.nit), final_loss, result.message)


def cell_zero_grad(cell: DamageCell) -> None:
    for p in cell.trainable_parameters():
        p.grad = None


def _param_norm(params: list[Tensor]) -> float:
    return math.sqrt(sum(float((p.value * p.value).sum()) for p in params))


def predict_fleet(cell: DamageCell, histories: np.ndarray, a0: float) -> np.ndarray:
    """Crack trajectories for every airplane; no observations consulted."""
    return cell.unroll(a0, histories)


def train_on_subset(dataset: FleetDataset, plane_ids: np.ndarray,
                    cfg: TrainingConfig) -> tuple[DamageCell, TrainReport]:
    """Build a fresh hybrid cell and train it on the given airplanes.

    Observations are the dataset's true cracks at the inspection cycle;
    the input normalizer is fitted on the subset's own load histories.
    """
    plane_ids = np.asarray(plane_ids, dtype=np.int64)
    manifest = dataset.manifest
    a0 = manifest["a0_m"]
    a_max = manifest["a_max_m"]
    cycle = dataset.inspection_cycle
    hist = dataset.histories[plane_ids, :cycle]
    obs = dataset.true_crack[plane_ids, cycle - 1]

    norm = fit_normalizer(hist, (a0, a_max))
    dk_ref = default_dk_ref(norm.mean[0], a0, a_max)
    net = build_stress_mlp(norm, seed=cfg.seed, dk_ref=dk_ref)
    cell = DamageCell(LearnedStressModel(net), dataset.paris())
    report = train(cell, hist, obs, a0, cfg, plane_ids=plane_ids)
    return cell, report
