"""Stateless layer definitions with explicit forward/backward passes.

Parameters do not live on the layers: each layer only describes the shapes
it needs and consumes views into the owning model's flat parameter vector.
That keeps the whole network differentiable by finite differences over a
single 1-D array. Image tensors are NHWC, float64.
"""

import numpy as np


class Dense:
    def __init__(self, in_width, width):
        self.in_width = in_width
        self.width = width
        self.param_shapes = [(in_width, width), (width,)]
        self.fan_in = in_width

    def output_shape(self, input_shape):
        return (self.width,)

    def forward(self, x, params):
        w, b = params
        return x @ w + b, x

    def backward(self, dout, cache, params):
        w, _ = params
        x = cache
        dw = x.T @ dout
        db = dout.sum(axis=0)
        return dout @ w.T, [dw, db]


class Relu:
    param_shapes = []

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x, params):
        return np.maximum(x, 0.0), x

    def backward(self, dout, cache, params):
        return dout * (cache > 0.0), []


class Conv2d:
    """3x3 convolution, stride 1, 'valid' or 'same' padding."""

    def __init__(self, in_channels, out_channels, kernel=3, padding="valid"):
        if padding not in ("valid", "same"):
            raise ValueError(f"unsupported padding {padding!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.padding = padding
        self.param_shapes = [(kernel * kernel * in_channels, out_channels), (out_channels,)]
        self.fan_in = kernel * kernel * in_channels

    def _pad_width(self):
        return (self.kernel - 1) // 2 if self.padding == "same" else 0

    def output_shape(self, input_shape):
        h, w, _ = input_shape
        if self.padding == "same":
            return (h, w, self.out_channels)
        return (h - self.kernel + 1, w - self.kernel + 1, self.out_channels)

    def _im2col(self, x):
        # (B, Ho, Wo, k*k*Cin) assembled from k*k shifted views; stride is 1
        # so plain slicing covers every window.
        k = self.kernel
        b, h, w, c = x.shape
        ho, wo = h - k + 1, w - k + 1
        cols = np.empty((b, ho, wo, k * k, c), dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                cols[:, :, :, i * k + j, :] = x[:, i : i + ho, j : j + wo, :]
        return cols.reshape(b, ho, wo, k * k * c)

    def forward(self, x, params):
        w, b = params
        p = self._pad_width()
        if p:
            x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
        cols = self._im2col(x)
        out = cols @ w + b
        return out, (cols, x.shape)

    def backward(self, dout, cache, params):
        w, _ = params
        cols, padded_shape = cache
        k = self.kernel
        b, ho, wo, _ = dout.shape
        flat_cols = cols.reshape(-1, cols.shape[-1])
        flat_dout = dout.reshape(-1, self.out_channels)
        dw = flat_cols.T @ flat_dout
        db = flat_dout.sum(axis=0)
        dcols = (flat_dout @ w.T).reshape(b, ho, wo, k * k, self.in_channels)
        dx = np.zeros(padded_shape, dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dx[:, i : i + ho, j : j + wo, :] += dcols[:, :, :, i * k + j, :]
        p = self._pad_width()
        if p:
            dx = dx[:, p:-p, p:-p, :]
        return dx, [dw, db]


class MaxPool2:
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped.

    Ties within a window route the gradient to the first maximal entry.
    """

    param_shapes = []

    def output_shape(self, input_shape):
        h, w, c = input_shape
        return (h // 2, w // 2, c)

    def forward(self, x, params):
        b, h, w, c = x.shape
        h2, w2 = h // 2, w // 2
        windows = x[:, : h2 * 2, : w2 * 2, :].reshape(b, h2, 2, w2, 2, c)
        windows = windows.transpose(0, 1, 3, 5, 2, 4).reshape(b, h2, w2, c, 4)
        argmax = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        return out, (x.shape, argmax)

    def backward(self, dout, cache, params):
        x_shape, argmax = cache
        b, h, w, c = x_shape
        h2, w2 = h // 2, w // 2
        dwin = np.zeros((b, h2, w2, c, 4), dtype=dout.dtype)
        np.put_along_axis(dwin, argmax[..., None], dout[..., None], axis=-1)
        dcrop = dwin.reshape(b, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        dx = np.zeros(x_shape, dtype=dout.dtype)
        dx[:, : h2 * 2, : w2 * 2, :] = dcrop.reshape(b, h2 * 2, w2 * 2, c)
        return dx, []


class Flatten:
    param_shapes = []

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache, params):
        return dout.reshape(cache), []
