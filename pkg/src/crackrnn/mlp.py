"""Trainable stress-intensity-range estimator.

A small fully-connected stack maps the per-cycle load range and the
previous crack length to an estimated stress intensity range in
MPa*sqrt(m).  The first layer is a frozen input scaler; the remaining
layers are trainable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "Normalizer",
    "DenseLayer",
    "MlpNetwork",
    "fit_normalizer",
    "build_stress_mlp",
    "HIDDEN_WIDTHS",
]

# Layer widths of the estimator, input to output.
HIDDEN_WIDTHS = (2, 40, 20, 10, 5, 1)

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Normalizer:
    """Frozen per-channel statistics for the (load MPa, crack m) inputs."""

    mean: tuple[float, float]
    std: tuple[float, float]

    def __post_init__(self) -> None:
        if any(s <= 0.0 for s in self.std):
            raise ValueError(f"normalizer std must be strictly positive, got {self.std}")


def fit_normalizer(
    histories: np.ndarray | list[np.ndarray],
    a_range: tuple[float, float],
    std_floor: float = STD_FLOOR,
) -> Normalizer:
    """Fit input statistics from training load histories and a crack range.

    Load statistics are empirical over every cycle of every history.  The
    crack channel is unobservable before training, so its statistics are
    the moments of a uniform distribution over ``a_range``.
    """
    values = np.concatenate([np.ravel(np.asarray(h, dtype=np.float64)) for h in histories]) \
        if isinstance(histories, list) else np.ravel(np.asarray(histories, dtype=np.float64))
    if values.size == 0:
        raise ValueError("fit_normalizer requires at least one load history")
    a_lo, a_hi = float(a_range[0]), float(a_range[1])
    if not a_lo < a_hi:
        raise ValueError(f"crack range must satisfy lo < hi, got {a_range}")
    ds_mean = float(values.mean())
    ds_std = max(float(values.std()), std_floor)
    a_mean = 0.5 * (a_lo + a_hi)
    a_std = max((a_hi - a_lo) / math.sqrt(12.0), std_floor)
    return Normalizer(mean=(ds_mean, a_mean), std=(ds_std, a_std))


class DenseLayer:
    """One affine layer with an optional sigmoid activation."""

    def __init__(self, w: np.ndarray, b: np.ndarray, name: str,
                 activation: str | None, trainable: bool):
        self.w = ad.parameter(w, name=f"{name}.w", trainable=trainable)
        self.b = ad.parameter(b, name=f"{name}.b", trainable=trainable)
        self.name = name
        self.activation = activation
        self.trainable = trainable

    @property
    def n_params(self) -> int:
        return self.w.value.size + self.b.value.size

    def __call__(self, x: Tensor) -> Tensor:
        out = ad.affine(x, self.w, self.b)
        if self.activation == "sigmoid":
            out = ad.sigmoid(out)
        return out


class MlpNetwork:
    """Dense stack estimating the stress intensity range.

    Layout: a non-trainable scaling layer (2 -> 2), four sigmoid layers
    (2 -> 40 -> 20 -> 10 -> 5), a linear layer (5 -> 1) and a parametric
    ReLU output.  1,218 parameters, of which 1,212 train.
    """

    def __init__(self, layers: list[DenseLayer], prelu_alpha: Tensor,
                 normalizer: Normalizer, init_seed: int, dk_ref: float):
        self.layers = layers
        self.prelu_alpha = prelu_alpha
        self.normalizer = normalizer
        self.init_seed = init_seed
        self.dk_ref = dk_ref

    # -- forward ----------------------------------------------------------

    def forward(self, delta_s: Tensor, a_prev: Tensor) -> Tensor:
        """Estimate the stress intensity range for (B, 1) input columns."""
        x = ad.stack_cols(delta_s, a_prev)
        for layer in self.layers:
            x = layer(x)
        return ad.prelu(x, self.prelu_alpha)

    def predict(self, delta_s: np.ndarray, a_prev: np.ndarray) -> np.ndarray:
        """Convenience forward on plain arrays, no gradient recording."""
        ds = np.asarray(delta_s, dtype=np.float64).reshape(-1, 1)
        av = np.asarray(a_prev, dtype=np.float64).reshape(-1, 1)
        out = self.forward(ad.constant(ds), ad.constant(av))
        return out.value.reshape(-1)

    # -- parameter access --------------------------------------------------

    def all_parameters(self) -> list[Tensor]:
        params: list[Tensor] = []
        for layer in self.layers:
            params.extend((layer.w, layer.b))
        params.append(self.prelu_alpha)
        return params

    def trainable_parameters(self) -> list[Tensor]:
        return [p for p in self.all_parameters() if p.requires_grad]

    def parameter_counts(self) -> tuple[int, int]:
        """Return (total, trainable) parameter counts."""
        total = sum(p.value.size for p in self.all_parameters())
        trainable = sum(p.value.size for p in self.trainable_parameters())
        return total, trainable

    def layer_parameter_counts(self) -> list[int]:
        counts = [layer.n_params for layer in self.layers]
        counts.append(self.prelu_alpha.value.size)
        return counts

    def zero_grad(self) -> None:
        for p in self.all_parameters():
            p.grad = None

    def get_flat_trainable(self) -> np.ndarray:
        return np.concatenate([p.value.ravel() for p in self.trainable_parameters()])

    def set_flat_trainable(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for p in self.trainable_parameters():
            n = p.value.size
            p.value = flat[offset:offset + n].reshape(p.value.shape).copy()
            offset += n
        if offset != flat.size:
            raise ValueError(f"flat vector has {flat.size} entries, expected {offset}")

    # -- serialization -----------------------------------------------------

    def to_checkpoint(self, meta: dict | None = None) -> dict:
        ckpt: dict = {}
        for layer in self.layers:
            ckpt[layer.name] = {
                "weights": layer.w.value.tolist(),
                "bias": layer.b.value.tolist(),
            }
        ckpt["alpha"] = float(self.prelu_alpha.value[0])
        ckpt["normalizer"] = {
            "mean": list(self.normalizer.mean),
            "std": list(self.normalizer.std),
        }
        ckpt["meta"] = {"init_seed": self.init_seed, "dk_ref": self.dk_ref}
        if meta:
            ckpt["meta"].update(meta)
        return ckpt

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_checkpoint(meta), sort_keys=True, indent=1))

    @classmethod
    def from_checkpoint(cls, ckpt: dict) -> "MlpNetwork":
        norm = Normalizer(
            mean=tuple(ckpt["normalizer"]["mean"]),
            std=tuple(ckpt["normalizer"]["std"]),
        )
        layers = []
        for i in range(len(HIDDEN_WIDTHS)):
            name = f"dense{i}"
            spec = ckpt[name]
            layers.append(DenseLayer(
                np.asarray(spec["weights"], dtype=np.float64),
                np.asarray(spec["bias"], dtype=np.float64),
                name=name,
                activation="sigmoid" if 1 <= i <= 4 else None,
                trainable=i >= 1,
            ))
        alpha = ad.parameter(np.asarray([ckpt["alpha"]]), name="prelu.alpha", trainable=True)
        meta = ckpt.get("meta", {})
        return cls(layers, alpha, norm,
                   init_seed=int(meta.get("init_seed", 0)),
                   dk_ref=float(meta.get("dk_ref", 0.0)))

    @classmethod
    def load(cls, path: str | Path) -> "MlpNetwork":
        return cls.from_checkpoint(json.loads(Path(path).read_text()))


def build_stress_mlp(norm: Normalizer, seed: int, dk_ref: float = 0.0) -> MlpNetwork:
    """Build the estimator with frozen input scaling and seeded init.

    The scaling layer gets weights diag(1/std) and bias -mean/std so the
    trainable stack sees roughly zero-mean unit-variance inputs.  Hidden
    layers use Glorot-uniform weights with zero biases.  ``dk_ref`` sets
    the output layer's operating point: its bias starts at dk_ref and its
    weights are scaled to dk_ref/3, so initial estimates land at the
    physical order of magnitude instead of O(1).  With dk_ref = 0 the
    output layer falls back to plain Glorot with zero bias.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mean = np.asarray(norm.mean)
    std = np.asarray(norm.std)

    layers: list[DenseLayer] = []
    w0 = np.diag(1.0 / std)
    b0 = -mean / std
    layers.append(DenseLayer(w0, b0, name="dense0", activation=None, trainable=False))

    widths = HIDDEN_WIDTHS
    for i in range(1, len(widths)):
        fan_in, fan_out = widths[i - 1], widths[i]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        is_output = i == len(widths) - 1
        if is_output and dk_ref > 0.0:
            w = w * (dk_ref / 3.0 / limit)
            b = np.full(fan_out, dk_ref)
        layers.append(DenseLayer(
            w, b, name=f"dense{i}",
            activation=None if is_output else "sigmoid",
            trainable=True,
        ))

    alpha = ad.parameter(np.asarray([0.25]), name="prelu.alpha", trainable=True)
    return MlpNetwork(layers, alpha, norm, init_seed=seed, dk_ref=dk_ref)
