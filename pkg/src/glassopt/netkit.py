"""Dense ReLU multilayer perceptrons with reverse-mode gradients.

This is the numerical core underneath the curvature probes: a minimal float64
MLP with mean-squared-error or softmax-cross-entropy loss, exact reverse-mode
gradients, and per-unit introspection of near-threshold ReLU pre-activations.

Parameters live in a single flat vector. Flattening is layer-major; within a
layer the weight matrix (fan_in x fan_out, row-major) comes first, then the
bias vector. This ordering is frozen because per-layer index partitions are
built on top of it.

The ReLU derivative at a pre-activation of exactly zero is 0: a unit sitting
on its threshold counts as inactive. Every function here is pure in
(spec, params, batch) and safe to call from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSS_KINDS = ("mse", "xent")


class ConfigError(ValueError):
    """Invalid model, optimizer, or experiment configuration."""


class NumericsError(ArithmeticError):
    """A forward or backward pass produced non-finite values."""


@dataclass(frozen=True)
class ModelSpec:
    """Architecture of a fully connected ReLU network.

    layer_widths lists input, hidden..., output widths; hidden layers use
    ReLU, the output layer is linear. loss is "mse" (mean squared error over
    all output entries) or "xent" (softmax cross-entropy against integer
    class targets).
    """

    layer_widths: tuple[int, ...]
    loss: str = "mse"

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 3:
            raise ConfigError(
                f"need input, at least one hidden, and output widths, got {self.layer_widths}"
            )
        if any(w < 1 for w in self.layer_widths):
            raise ConfigError(f"layer widths must be >= 1, got {self.layer_widths}")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}, expected one of {LOSS_KINDS}")
        if self.loss == "xent" and self.layer_widths[-1] < 2:
            raise ConfigError("softmax cross-entropy needs at least 2 output classes")

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def n_hidden(self) -> int:
        return self.n_layers - 1

    @property
    def param_count(self) -> int:
        ws = self.layer_widths
        return sum((ws[i] + 1) * ws[i + 1] for i in range(self.n_layers))

    def layer_slices(self) -> list[tuple[slice, slice, tuple[int, int]]]:
        """(weight_slice, bias_slice, (fan_in, fan_out)) per layer."""
        out = []
        offset = 0
        ws = self.layer_widths
        for i in range(self.n_layers):
            fi, fo = ws[i], ws[i + 1]
            w_sl = slice(offset, offset + fi * fo)
            offset += fi * fo
            b_sl = slice(offset, offset + fo)
            offset += fo
            out.append((w_sl, b_sl, (fi, fo)))
        return out

    def layer_param_indices(self, layer: int) -> np.ndarray:
        """Flat parameter indices (weights then bias) belonging to one layer."""
        w_sl, b_sl, _ = self.layer_slices()[layer]
        return np.arange(w_sl.start, b_sl.stop)


@dataclass(frozen=True)
class Batch:
    """A batch of inputs with targets.

    Targets are an (n, w_out) float matrix for mse, or a length-n integer
    vector of class indices for xent.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        t = np.asarray(self.targets)
        if not np.issubdtype(t.dtype, np.integer):
            t = t.astype(np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ConfigError(f"inputs must be a non-empty (n, w_in) matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ConfigError("batch inputs contain non-finite entries")
        if t.dtype == np.float64 and not np.all(np.isfinite(t)):
            raise ConfigError("batch targets contain non-finite entries")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class ReluUnitRecord:
    """One near-threshold ReLU unit for a single sample.

    y is the pre-activation, dloss_dz the derivative of the batch loss with
    respect to this unit's post-activation, and grad_y the gradient of y with
    respect to the full flat parameter vector.
    """

    layer: int
    neuron: int
    sample: int
    y: float
    dloss_dz: float
    grad_y: np.ndarray

    @property
    def unit_id(self) -> tuple[int, int, int]:
        return (self.layer, self.neuron, self.sample)


def _views(spec: ModelSpec, params: np.ndarray):
    """Per-layer (weight, bias) views into a flat parameter vector."""
    weights, biases = [], []
    for w_sl, b_sl, (fi, fo) in spec.layer_slices():
        weights.append(params[w_sl].reshape(fi, fo))
        biases.append(params[b_sl])
    return weights, biases


def _check_params(spec: ModelSpec, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.param_count,):
        raise ConfigError(
            f"parameter vector has shape {params.shape}, spec needs ({spec.param_count},)"
        )
    return params


def _check_batch(spec: ModelSpec, batch: Batch) -> None:
    if batch.inputs.shape[1] != spec.layer_widths[0]:
        raise ConfigError(
            f"batch input width {batch.inputs.shape[1]} != model input width {spec.layer_widths[0]}"
        )
    w_out = spec.layer_widths[-1]
    if spec.loss == "mse":
        if batch.targets.ndim != 2 or batch.targets.shape != (batch.size, w_out):
            raise ConfigError(
                f"mse targets must have shape ({batch.size}, {w_out}), got {batch.targets.shape}"
            )
    else:
        if batch.targets.ndim != 1 or batch.targets.shape[0] != batch.size:
            raise ConfigError("xent targets must be a length-n vector of class indices")
        if batch.targets.min() < 0 or batch.targets.max() >= w_out:
            raise ConfigError(f"class indices must lie in [0, {w_out})")


def build_model(spec: ModelSpec, seed: int) -> np.ndarray:
    """Initialize a flat parameter vector.

    Weights are Gaussian, scaled so pre-activations have order-1 variance for
    unit-variance inputs (1/fan_in on the input layer, 2/fan_in after ReLUs);
    biases start at zero. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    params = np.zeros(spec.param_count)
    weights, _ = _views(spec, params)
    for i, w in enumerate(weights):
        fan_in = w.shape[0]
        scale = np.sqrt((2.0 if i > 0 else 1.0) / fan_in)
        w[...] = scale * rng.standard_normal(w.shape)
    return params


def forward(spec: ModelSpec, params: np.ndarray, inputs: np.ndarray):
    """Run the network, returning (pre-activations, post-activations) per layer."""
    params = _check_params(spec, params)
    weights, biases = _views(spec, params)
    a = np.asarray(inputs, dtype=np.float64)
    preacts, acts = [], []
    for i, (w, b) in enumerate(zip(weights, biases)):
        y = a @ w + b
        if not np.all(np.isfinite(y)):
            raise NumericsError(f"non-finite pre-activations at layer {i}")
        preacts.append(y)
        a = np.maximum(y, 0.0) if i < spec.n_layers - 1 else y
        acts.append(a)
    return preacts, acts


def _loss_and_dout(spec: ModelSpec, out: np.ndarray, targets: np.ndarray):
    """Batch-mean loss and its derivative w.r.t. the network output."""
    n = out.shape[0]
    if spec.loss == "mse":
        r = out - targets
        return float(np.mean(r * r)), (2.0 / r.size) * r
    t = np.asarray(targets)
    shifted = out - out.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1))
    value = float(np.mean(lse - shifted[np.arange(n), t]))
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(n), t] -= 1.0
    return value, p / n


def loss(spec: ModelSpec, params: np.ndarray, batch: Batch) -> float:
    """Mean loss of the batch."""
    _check_batch(spec, batch)
    _, acts = forward(spec, params, batch.inputs)
    return _loss_and_dout(spec, acts[-1], batch.targets)[0]


def gradient(spec: ModelSpec, params: np.ndarray, batch: Batch):
    """Reverse-mode gradient of the batch loss. Returns (loss, flat gradient)."""
    params = _check_params(spec, params)
    _check_batch(spec, batch)
    preacts, acts = forward(spec, params, batch.inputs)
    value, d_y = _loss_and_dout(spec, acts[-1], batch.targets)
    weights, _ = _views(spec, params)
    grad = np.zeros_like(params)
    g_weights, g_biases = _views(spec, grad)
    for i in range(spec.n_layers - 1, -1, -1):
        if not np.all(np.isfinite(d_y)):
            raise NumericsError(f"non-finite backward signal at layer {i}")
        a_prev = batch.inputs if i == 0 else acts[i - 1]
        g_weights[i][...] = a_prev.T @ d_y
        g_biases[i][...] = d_y.sum(axis=0)
        if i > 0:
            d_y = (d_y @ weights[i].T) * (preacts[i - 1] > 0.0)
    return value, grad


def _preactivation_grad(spec, weights, inputs, preacts, acts, layer, neuron, sample):
    """Gradient of one hidden pre-activation w.r.t. the flat parameter vector."""
    grad = np.zeros(spec.param_count)
    g_weights, g_biases = _views(spec, grad)
    a_in = inputs[sample] if layer == 0 else acts[layer - 1][sample]
    g_weights[layer][:, neuron] = a_in
    g_biases[layer][neuron] = 1.0
    if layer == 0:
        return grad
    d_a = weights[layer][:, neuron]
    for i in range(layer - 1, -1, -1):
        d_y = d_a * (preacts[i][sample] > 0.0)
        a_prev = inputs[sample] if i == 0 else acts[i - 1][sample]
        g_weights[i][...] = np.outer(a_prev, d_y)
        g_biases[i][...] = d_y
        if i > 0:
            d_a = weights[i] @ d_y
    return grad


def relu_introspect(spec: ModelSpec, params: np.ndarray, batch: Batch, psi: float):
    """Collect every hidden (unit, sample) pair with |pre-activation| < psi.

    Each record carries the gradient of its pre-activation w.r.t. the full
    parameter vector, computed by a dedicated backward pass, plus the
    derivative of the batch loss w.r.t. the unit's post-activation. Records
    are ordered by (layer, neuron, sample).
    """
    if not psi > 0:
        raise ConfigError("psi must be positive")
    params = _check_params(spec, params)
    _check_batch(spec, batch)
    preacts, acts = forward(spec, params, batch.inputs)
    _, d_y = _loss_and_dout(spec, acts[-1], batch.targets)
    weights, _ = _views(spec, params)

    # dloss/dz per hidden layer: the backward signal before the ReLU mask.
    d_z = [None] * spec.n_hidden
    for i in range(spec.n_layers - 1, 0, -1):
        d_a = d_y @ weights[i].T
        d_z[i - 1] = d_a
        d_y = d_a * (preacts[i - 1] > 0.0)

    records = []
    for layer in range(spec.n_hidden):
        mask = np.abs(preacts[layer]) < psi
        for neuron, sample in np.argwhere(mask.T):
            grad_y = _preactivation_grad(
                spec, weights, batch.inputs, preacts, acts, layer, int(neuron), int(sample)
            )
            records.append(
                ReluUnitRecord(
                    layer=int(layer),
                    neuron=int(neuron),
                    sample=int(sample),
                    y=float(preacts[layer][sample, neuron]),
                    dloss_dz=float(d_z[layer][sample, neuron]),
                    grad_y=grad_y,
                )
            )
    return records
