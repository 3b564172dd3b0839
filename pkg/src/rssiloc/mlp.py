"""Feed-forward MLP for RSSI-to-position regression.

The network maps a vector of anchor RSSI readings (dBm) to a 2D position
(meters). Inputs and outputs are min-max normalized to [-1, 1]; the
normalization ranges live inside the model so a saved model is
self-contained. Hidden layers use the hyperbolic-tangent sigmoid, the
output layer is affine.

Parameter vectors are flattened layer by layer, each layer contributing
its weight matrix in row-major order followed by its bias vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .rng import Xoshiro256StarStar


class Activation(enum.Enum):
    TANSIG = "tansig"
    PURELIN = "purelin"


@dataclass(frozen=True)
class Position:
    """2D coordinate in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("coordinates must be finite")

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def tansig(z: float) -> float:
    """Hyperbolic-tangent sigmoid activation."""
    return math.tanh(z)


def purelin(z: float) -> float:
    """Linear (identity) activation."""
    return z


def _as_norm_array(norm, count: int, what: str) -> np.ndarray:
    arr = np.asarray(norm, dtype=np.float64)
    if arr.shape != (count, 2):
        raise DimensionMismatch(
            f"{what} must be {count} (min, max) pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} entries must be finite")
    if not np.all(arr[:, 1] > arr[:, 0]):
        raise ValueError(f"each {what} pair needs max > min")
    arr.setflags(write=False)
    return arr


class MlpModel:
    """Immutable MLP: layer sizes, weights, biases, activations, norms.

    Weight matrices are (fan_in, fan_out); biases are (fan_out,). One
    activation tag per non-input layer. Instances never mutate after
    construction, so they are safe to share across threads.
    """

    __slots__ = ("layer_sizes", "weights", "biases", "activations",
                 "input_norm", "output_norm", "seed")

    def __init__(self, layer_sizes, weights, biases, activations,
                 input_norm, output_norm, seed: int = 0):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("layer_sizes must be >=2 positive integers")
        n_layers = len(sizes) - 1
        if len(weights) != n_layers or len(biases) != n_layers:
            raise DimensionMismatch("need one weight matrix and bias vector "
                                    "per non-input layer")
        if len(activations) != n_layers:
            raise DimensionMismatch("need one activation tag per non-input layer")

        ws, bs = [], []
        for k in range(n_layers):
            w = np.ascontiguousarray(weights[k], dtype=np.float64)
            b = np.ascontiguousarray(biases[k], dtype=np.float64)
            if w.shape != (sizes[k], sizes[k + 1]):
                raise DimensionMismatch(
                    f"weights[{k}] must have shape {(sizes[k], sizes[k+1])}, "
                    f"got {w.shape}")
            if b.shape != (sizes[k + 1],):
                raise DimensionMismatch(
                    f"biases[{k}] must have length {sizes[k+1]}, got {b.shape}")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)

        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))
        object.__setattr__(self, "activations",
                           tuple(Activation(a) for a in activations))
        object.__setattr__(self, "input_norm",
                           _as_norm_array(input_norm, sizes[0], "input_norm"))
        object.__setattr__(self, "output_norm",
                           _as_norm_array(output_norm, sizes[-1], "output_norm"))
        object.__setattr__(self, "seed", int(seed) & (2**64 - 1))

    def __setattr__(self, name, value):
        raise AttributeError("MlpModel is immutable")

    def __reduce__(self):
        return (MlpModel, (self.layer_sizes, self.weights, self.biases,
                           self.activations, self.input_norm,
                           self.output_norm, self.seed))

    # -- construction ------------------------------------------------------

    @classmethod
    def initialize(cls, layer_sizes, seed: int, input_norm, output_norm,
                   activations=None) -> "MlpModel":
        """Seeded initialization: weights and biases uniform in
        +-1/sqrt(fan_in) per layer, drawn from xoshiro256** in a fixed
        order (layer by layer, weight matrix row-major, then bias)."""
        sizes = tuple(int(s) for s in layer_sizes)
        if activations is None:
            activations = [Activation.TANSIG] * (len(sizes) - 2) + [Activation.PURELIN]
        gen = Xoshiro256StarStar(seed)
        weights, biases = [], []
        for k in range(len(sizes) - 1):
            bound = 1.0 / math.sqrt(sizes[k])
            w = np.empty((sizes[k], sizes[k + 1]))
            for i in range(sizes[k]):
                for j in range(sizes[k + 1]):
                    w[i, j] = gen.uniform(-bound, bound)
            b = np.array([gen.uniform(-bound, bound) for _ in range(sizes[k + 1])])
            weights.append(w)
            biases.append(b)
        return cls(sizes, weights, biases, activations, input_norm,
                   output_norm, seed)

    # -- parameter vector --------------------------------------------------

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        """All weights and biases as one vector (layer-major, W then b)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_parameters(self, theta: np.ndarray) -> "MlpModel":
        """New model with the same structure and the given flat parameters."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.parameter_count,):
            raise DimensionMismatch(
                f"expected {self.parameter_count} parameters, got {theta.shape}")
        weights, biases = [], []
        pos = 0
        for w, b in zip(self.weights, self.biases):
            weights.append(theta[pos:pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(theta[pos:pos + b.size])
            pos += b.size
        return MlpModel(self.layer_sizes, weights, biases, self.activations,
                        self.input_norm, self.output_norm, self.seed)

    # -- normalization -----------------------------------------------------

    def normalize_inputs(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.input_norm[:, 0], self.input_norm[:, 1]
        return 2.0 * (x - lo) / (hi - lo) - 1.0

    def normalize_targets(self, t: np.ndarray) -> np.ndarray:
        lo, hi = self.output_norm[:, 0], self.output_norm[:, 1]
        return 2.0 * (t - lo) / (hi - lo) - 1.0

    def denormalize_outputs(self, y: np.ndarray) -> np.ndarray:
        lo, hi = self.output_norm[:, 0], self.output_norm[:, 1]
        return (y + 1.0) / 2.0 * (hi - lo) + lo


def _check_input_width(model: MlpModel, width: int) -> None:
    if width != model.layer_sizes[0]:
        raise DimensionMismatch(
            f"model expects {model.layer_sizes[0]} RSSI inputs, got {width}")


def _layer_outputs(model: MlpModel, x_norm: np.ndarray) -> list[np.ndarray]:
    """Activations per layer for a batch of normalized inputs.

    Returns [a_0, a_1, ..., a_L] with a_0 the normalized input batch.
    """
    acts = [x_norm]
    a = x_norm
    for w, b, act in zip(model.weights, model.biases, model.activations):
        z = a @ w + b
        a = np.tanh(z) if act is Activation.TANSIG else z
        acts.append(a)
    return acts


def forward_batch(model: MlpModel, inputs: np.ndarray) -> np.ndarray:
    """Forward pass for a batch of RSSI rows; returns positions in meters."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    _check_input_width(model, x.shape[1])
    y_norm = _layer_outputs(model, model.normalize_inputs(x))[-1]
    return model.denormalize_outputs(y_norm)


def forward(model: MlpModel, rssi) -> Position:
    """Map one RSSI vector (dBm, anchor-id order) to a Position."""
    values = np.asarray(rssi, dtype=np.float64).ravel()
    _check_input_width(model, values.size)
    out = forward_batch(model, values[None, :])[0]
    return Position(float(out[0]), float(out[1]))


def _check_data(model: MlpModel, data) -> tuple[np.ndarray, np.ndarray]:
    inputs = np.asarray(data.inputs, dtype=np.float64)
    targets = np.asarray(data.targets, dtype=np.float64)
    _check_input_width(model, inputs.shape[1])
    if targets.shape[1] != model.layer_sizes[-1]:
        raise DimensionMismatch(
            f"model produces {model.layer_sizes[-1]} outputs, targets have "
            f"{targets.shape[1]} columns")
    if inputs.shape[0] != targets.shape[0]:
        raise DimensionMismatch("inputs and targets row counts differ")
    return inputs, targets


def gradient(model: MlpModel, data) -> tuple[np.ndarray, float]:
    """Gradient of the mean squared normalized-output error.

    Returns (dMSE/dtheta, MSE) where theta is the flat parameter vector
    and MSE averages over samples and output coordinates.
    """
    inputs, targets = _check_data(model, data)
    n, k_out = targets.shape[0], targets.shape[1]
    acts = _layer_outputs(model, model.normalize_inputs(inputs))
    err = acts[-1] - model.normalize_targets(targets)
    mse = float(np.mean(err ** 2))

    grad_parts = [None] * len(model.weights)
    delta = 2.0 * err / (n * k_out)
    for layer in range(len(model.weights) - 1, -1, -1):
        if model.activations[layer] is Activation.TANSIG:
            delta = delta * (1.0 - acts[layer + 1] ** 2)
        d_w = acts[layer].T @ delta
        d_b = delta.sum(axis=0)
        grad_parts[layer] = (d_w, d_b)
        if layer > 0:
            delta = delta @ model.weights[layer].T
    flat = np.concatenate([np.concatenate([dw.ravel(), db])
                           for dw, db in grad_parts])
    return flat, mse


def residuals(model: MlpModel, data) -> np.ndarray:
    """Normalized-output residuals, sample-major then output coordinate."""
    inputs, targets = _check_data(model, data)
    y = _layer_outputs(model, model.normalize_inputs(inputs))[-1]
    return (y - model.normalize_targets(targets)).ravel()


def jacobian(model: MlpModel, data) -> np.ndarray:
    """Residual Jacobian, shape (samples * outputs, parameters).

    Row i*K + k holds the derivative of sample i's k-th normalized-output
    residual with respect to the flat parameter vector, so J^T r is half
    the gradient of the sum-of-squares objective.
    """
    inputs, targets = _check_data(model, data)
    n, k_out = targets.shape[0], targets.shape[1]
    acts = _layer_outputs(model, model.normalize_inputs(inputs))
    p = model.parameter_count
    jac = np.empty((n * k_out, p))

    for k in range(k_out):
        # reverse sweep seeded with unit vector e_k for every sample
        delta = np.zeros((n, k_out))
        delta[:, k] = 1.0
        blocks = [None] * len(model.weights)
        for layer in range(len(model.weights) - 1, -1, -1):
            if model.activations[layer] is Activation.TANSIG:
                delta = delta * (1.0 - acts[layer + 1] ** 2)
            d_w = np.einsum("ni,nj->nij", acts[layer], delta)
            blocks[layer] = (d_w.reshape(n, -1), delta)
            if layer > 0:
                delta = delta @ model.weights[layer].T
        pos = 0
        for d_w_flat, d_b in blocks:
            jac[k::k_out, pos:pos + d_w_flat.shape[1]] = d_w_flat
            pos += d_w_flat.shape[1]
            jac[k::k_out, pos:pos + d_b.shape[1]] = d_b
            pos += d_b.shape[1]
    return jac
