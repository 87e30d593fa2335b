"""Cumulative-damage recurrent cell for fatigue crack growth.

One step advances the crack length by one load cycle: a stress-intensity
sub-model (closed-form physics or the learned estimator) feeds a fixed
power-law layer, and the increment accumulates onto the state.  Unrolling
over a whole load history yields the crack trajectory; under the learned
sub-model the unroll is differentiable end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .mlp import MlpNetwork

__all__ = [
    "ParisParams",
    "PhysicsStressModel",
    "LearnedStressModel",
    "DamageCell",
    "stress_intensity_physics",
    "paris_increment",
    "cell_step",
    "unroll_physics",
]


@dataclass(frozen=True)
class ParisParams:
    """Power-law constants (crack in m, stress intensity in MPa*sqrt(m)).

    ``trainable`` is a configuration flag only; the shipped training path
    keeps these constants fixed.
    """

    c: float = 1.5e-11
    m: float = 3.8
    f: float = 1.0
    trainable: bool = False

    def __post_init__(self) -> None:
        if not (self.c > 0.0 and self.m > 0.0 and self.f > 0.0):
            raise ValueError(f"Paris constants must be positive, got c={self.c} m={self.m} f={self.f}")

    @property
    def n_params(self) -> int:
        # The power-law layer carries (c, m); the geometry factor belongs
        # to the physics stress model.
        return 2


# ---------------------------------------------------------------------------
# closed-form operations on plain arrays


def stress_intensity_physics(p: ParisParams, delta_s, a_prev):
    """Stress intensity range f * dS * sqrt(pi * a) for a center crack."""
    delta_s = np.asarray(delta_s, dtype=np.float64)
    a_prev = np.asarray(a_prev, dtype=np.float64)
    if np.any(a_prev <= 0.0):
        raise ValueError("crack length must be strictly positive")
    if np.any(delta_s < 0.0):
        raise ValueError("stress range must be non-negative")
    return p.f * (delta_s * np.sqrt(np.pi * a_prev))


def paris_increment(p: ParisParams, delta_k):
    """Per-cycle crack increment c * dK**m."""
    delta_k = np.asarray(delta_k, dtype=np.float64)
    if np.any(delta_k < 0.0):
        raise ValueError("stress intensity range must be non-negative")
    return p.c * delta_k**p.m


def cell_step(p: ParisParams, a_prev, delta_s):
    """One physics-variant cycle: returns the new crack length."""
    dk = stress_intensity_physics(p, delta_s, a_prev)
    return a_prev + paris_increment(p, dk)


def unroll_physics(p: ParisParams, a0: float, histories: np.ndarray) -> np.ndarray:
    """Iterate the physics cell over (B, T) load histories.

    Returns the (B, T) crack trajectory; column t holds the state after
    cycle t+1.  An empty history yields a (B, 0) trajectory.
    """
    histories = np.atleast_2d(np.asarray(histories, dtype=np.float64))
    n, t_total = histories.shape
    if a0 <= 0.0:
        raise ValueError("initial crack length must be strictly positive")
    if not np.all(np.isfinite(histories)):
        raise ValueError("load history contains non-finite values")
    if np.any(histories < 0.0):
        raise ValueError("stress range must be non-negative")
    out = np.empty((n, t_total))
    a = np.full(n, float(a0))
    for t in range(t_total):
        ds = histories[:, t]
        a = a + p.c * (p.f * (ds * np.sqrt(np.pi * a))) ** p.m
        out[:, t] = a
    return out


# ---------------------------------------------------------------------------
# stress-intensity sub-models (tensor path)


class PhysicsStressModel:
    """Exact closed-form evaluator; output needs no clamping."""

    clamp_output = False

    def __init__(self, f: float = 1.0):
        if f <= 0.0:
            raise ValueError("geometry factor must be positive")
        self.f = f

    def estimate(self, delta_s: Tensor, a_prev: Tensor) -> Tensor:
        s = ad.sqrt(ad.scale(a_prev, math.pi))
        return ad.scale(ad.mul(delta_s, s), self.f)

    def parameter_counts(self) -> tuple[int, int]:
        return 1, 0

    def trainable_parameters(self) -> list[Tensor]:
        return []


class LearnedStressModel:
    """Wraps the trainable estimator; negative outputs are clamped."""

    clamp_output = True

    def __init__(self, net: MlpNetwork):
        self.net = net

    def estimate(self, delta_s: Tensor, a_prev: Tensor) -> Tensor:
        return self.net.forward(delta_s, a_prev)

    def parameter_counts(self) -> tuple[int, int]:
        return self.net.parameter_counts()

    def trainable_parameters(self) -> list[Tensor]:
        return self.net.trainable_parameters()


class DamageCell:
    """Recurrent cell composing a stress-intensity sub-model with the
    power-law increment layer."""

    def __init__(self, stress_model, paris: ParisParams):
        self.stress_model = stress_model
        self.paris = paris

    def parameter_counts(self) -> tuple[int, int]:
        """(total, trainable) including the power-law constants."""
        total, trainable = self.stress_model.parameter_counts()
        return total + self.paris.n_params, trainable

    def trainable_parameters(self) -> list[Tensor]:
        return self.stress_model.trainable_parameters()

    def step(self, state: Tensor, delta_s: Tensor) -> Tensor:
        """Advance (B, 1) crack states by one cycle."""
        dk = self.stress_model.estimate(delta_s, state)
        if self.stress_model.clamp_output:
            dk = ad.relu_clip(dk)
        inc = ad.power(dk, self.paris.m, coeff=self.paris.c)
        return ad.add(state, inc)

    def unroll_tensors(self, a0: Tensor, load_columns: list[Tensor]) -> list[Tensor]:
        """Iterate :meth:`step` over per-cycle (B, 1) load columns.

        Returns the list of state tensors after each cycle.  Record on an
        active tape to differentiate through the whole unroll.
        """
        states: list[Tensor] = []
        state = a0
        for ds in load_columns:
            state = self.step(state, ds)
            states.append(state)
        return states

    def unroll(self, a0: float, histories: np.ndarray) -> np.ndarray:
        """Unroll plain (B, T) load histories; returns the (B, T) trajectory."""
        histories = np.atleast_2d(np.asarray(histories, dtype=np.float64))
        n, t_total = histories.shape
        if a0 <= 0.0:
            raise ValueError("initial crack length must be strictly positive")
        if not np.all(np.isfinite(histories)):
            raise ValueError("load history contains non-finite values")
        if np.any(histories < 0.0):
            raise ValueError("stress range must be non-negative")
        out = np.empty((n, t_total))
        state = ad.constant(np.full((n, 1), float(a0)))
        for t in range(t_total):
            state = self.step(state, ad.constant(histories[:, t:t + 1]))
            out[:, t] = state.value[:, 0]
        return out
