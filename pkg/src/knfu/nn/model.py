"""Model specs, parameter storage and the forward pass.

A model is a spec plus one flat float64 parameter vector; layers read their
weights through views into that vector. The flat layout is what makes
finite-difference gradient checks and the binary checkpoint format trivial.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, NumericError
from .layers import Conv2d, Dense, Flatten, MaxPool2, Relu


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: ordered layers, input shape, class count."""

    arch_id: str
    input_shape: tuple
    num_classes: int
    layers: tuple = field(repr=False)

    def param_count(self):
        return sum(int(np.prod(s)) for layer in self.layers for s in layer.param_shapes)


def _conv_unit(in_ch, out_ch, padding):
    return [Conv2d(in_ch, out_ch, kernel=3, padding=padding), Relu(), MaxPool2()]


def _stack(layers, input_shape):
    """Validate shape flow and return the layer tuple."""
    shape = input_shape
    for layer in layers:
        shape = layer.output_shape(shape)
    return tuple(layers), shape


def m1_spec(num_classes=10):
    """Two conv units (32, 64 channels) + dense 64/32 head, 28x28x1 input."""
    layers = []
    layers += _conv_unit(1, 32, "valid")
    layers += _conv_unit(32, 64, "valid")
    layers.append(Flatten())
    # 28 -> conv 26 -> pool 13 -> conv 11 -> pool 5
    layers.append(Dense(5 * 5 * 64, 64))
    layers.append(Relu())
    layers.append(Dense(64, 32))
    layers.append(Relu())
    layers.append(Dense(32, num_classes))
    stacked, out = _stack(layers, (28, 28, 1))
    assert out == (num_classes,)
    return ModelSpec("M1", (28, 28, 1), num_classes, stacked)


def m2_spec(num_classes=10):
    """Four conv units (16, 16, 32, 32) + dense 128 head, 32x32x3 input."""
    layers = []
    layers += _conv_unit(3, 16, "same")
    layers += _conv_unit(16, 16, "same")
    layers += _conv_unit(16, 32, "same")
    layers += _conv_unit(32, 32, "same")
    layers.append(Flatten())
    layers.append(Dense(2 * 2 * 32, 128))
    layers.append(Relu())
    layers.append(Dense(128, num_classes))
    stacked, out = _stack(layers, (32, 32, 3))
    assert out == (num_classes,)
    return ModelSpec("M2", (32, 32, 3), num_classes, stacked)


def mlp_spec(input_dim, hidden, num_classes):
    """Small fully-connected net for flat inputs; `hidden` is a width tuple."""
    layers = []
    width = input_dim
    for h in hidden:
        layers.append(Dense(width, h))
        layers.append(Relu())
        width = h
    layers.append(Dense(width, num_classes))
    stacked, out = _stack(layers, (input_dim,))
    assert out == (num_classes,)
    return ModelSpec("MLP-small", (input_dim,), num_classes, stacked)


@dataclass
class Model:
    spec: ModelSpec
    params: np.ndarray

    def __post_init__(self):
        if self.params.shape != (self.spec.param_count(),):
            raise InputError(
                f"parameter vector has {self.params.size} entries, "
                f"spec {self.spec.arch_id} needs {self.spec.param_count()}"
            )

    def param_views(self):
        """Per-layer lists of array views into the flat parameter vector."""
        views = []
        offset = 0
        for layer in self.spec.layers:
            layer_views = []
            for shape in layer.param_shapes:
                n = int(np.prod(shape))
                layer_views.append(self.params[offset : offset + n].reshape(shape))
                offset += n
            views.append(layer_views)
        return views

    def copy(self):
        return Model(self.spec, self.params.copy())


def build_model(spec, seed):
    """Fresh model with uniform [-s, s] init, s = 1/sqrt(fan_in), per layer."""
    rng = np.random.default_rng(seed)
    chunks = []
    for layer in spec.layers:
        if not layer.param_shapes:
            continue
        s = 1.0 / np.sqrt(layer.fan_in)
        for shape in layer.param_shapes:
            chunks.append(rng.uniform(-s, s, int(np.prod(shape))))
    params = np.concatenate(chunks) if chunks else np.zeros(0)
    return Model(spec, params)


def forward_logits(model, batch, keep_caches=False):
    """Run the stack up to the pre-softmax logits.

    Returns (logits, caches); caches is None unless requested. Raises
    NumericError naming the first layer that produced a non-finite value.
    """
    batch = np.asarray(batch, dtype=np.float64)
    expected = (batch.shape[0],) + model.spec.input_shape
    if batch.shape != expected:
        raise InputError(
            f"batch shape {batch.shape} does not match spec input {expected}"
        )
    x = batch
    caches = [] if keep_caches else None
    for index, (layer, views) in enumerate(zip(model.spec.layers, model.param_views())):
        x, cache = layer.forward(x, views)
        if not np.isfinite(x).all():
            raise NumericError(f"non-finite activation after layer {index} "
                               f"({type(layer).__name__})")
        if keep_caches:
            caches.append(cache)
    return x, caches


def backprop(model, caches, dlogits):
    """Backward pass from a logit gradient to a flat parameter gradient."""
    views = model.param_views()
    grads = [None] * len(model.spec.layers)
    d = dlogits
    for index in range(len(model.spec.layers) - 1, -1, -1):
        layer = model.spec.layers[index]
        d, layer_grads = layer.backward(d, caches[index], views[index])
        grads[index] = layer_grads
    flat = np.empty_like(model.params)
    offset = 0
    for layer_grads in grads:
        for g in layer_grads:
            n = g.size
            flat[offset : offset + n] = g.ravel()
            offset += n
    return flat


def forward(model, batch, temperature=1.0):
    """Class probabilities for a batch; each row sums to 1.

    Logits are divided by `temperature` before the softmax, so temperature 1
    is the plain softmax and larger values flatten the rows.
    """
    from .losses import softmax

    logits, _ = forward_logits(model, batch)
    return softmax(logits, temperature)
