"""Convolution, transposed convolution and activation layers with
hand-written reverse-mode gradients.

All spatial math is NCHW. Convolutions are cross-correlations lowered to
GEMM via im2col; the transposed convolution is implemented as the exact
adjoint of the matching strided convolution.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import ShapeMismatch


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def im2col(xp, kh, kw, stride):
    """Lower padded input (N,C,Hp,Wp) to columns (N, C*kh*kw, Ho*Wo)."""
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    win = as_strided(xp, (n, c, kh, kw, ho, wo),
                     (s0, s1, s2, s3, s2 * stride, s3 * stride))
    return win.reshape(n, c * kh * kw, ho * wo), ho, wo


def col2im(cols, n, c, hp, wp, kh, kw, stride, ho, wo, dtype):
    """Adjoint of im2col: scatter-add columns back to (N,C,Hp,Wp)."""
    out = np.zeros((n, c, hp, wp), dtype=dtype)
    cols6 = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols6[:, :, i, j]
    return out


def conv2d(x, weights, bias, stride=1, pad=0):
    """Strided cross-correlation plus bias.

    x: (N, Cin, H, W); weights: (Cout, Cin, kh, kw); bias: (Cout,).
    """
    n, cin, h, w = x.shape
    cout, cin_w, kh, kw = weights.shape
    if cin != cin_w:
        raise ShapeMismatch(f"conv2d: input has {cin} channels, weights expect {cin_w}")
    if (h + 2 * pad - kh) // stride + 1 < 1 or (w + 2 * pad - kw) // stride + 1 < 1:
        raise ShapeMismatch("conv2d: output would be empty")
    cols, ho, wo = im2col(_pad(x, pad), kh, kw, stride)
    w2 = weights.reshape(cout, cin * kh * kw)
    y = np.matmul(w2, cols).reshape(n, cout, ho, wo)
    return y + bias.reshape(1, cout, 1, 1)


def conv2d_backward(dy, x, weights, stride, pad):
    """Gradients of conv2d w.r.t. (x, weights, bias)."""
    n, cin, h, w = x.shape
    cout, _, kh, kw = weights.shape
    cols, ho, wo = im2col(_pad(x, pad), kh, kw, stride)
    dy2 = dy.reshape(n, cout, ho * wo)
    dw = np.matmul(dy2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weights.shape)
    db = dy.sum(axis=(0, 2, 3))
    w2 = weights.reshape(cout, cin * kh * kw)
    dcols = np.matmul(w2.T, dy2)
    dxp = col2im(dcols, n, cin, h + 2 * pad, w + 2 * pad, kh, kw, stride, ho, wo, x.dtype)
    dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
    return dx, dw, db


def conv_transpose2d(x, weights, bias, stride=2, pad=1):
    """Fractionally-strided convolution, the adjoint of conv2d.

    x: (N, Cin, H, W); weights: (Cin, Cout, kh, kw); bias: (Cout,).
    Output spatial size: (H-1)*stride - 2*pad + k.
    """
    n, cin, h, w = x.shape
    cin_w, cout, kh, kw = weights.shape
    if cin != cin_w:
        raise ShapeMismatch(f"conv_transpose2d: input has {cin} channels, "
                            f"weights expect {cin_w}")
    ho = (h - 1) * stride - 2 * pad + kh
    wo = (w - 1) * stride - 2 * pad + kw
    if ho < 1 or wo < 1:
        raise ShapeMismatch("conv_transpose2d: output would be empty")
    w2 = weights.reshape(cin, cout * kh * kw)
    cols = np.matmul(w2.T, x.reshape(n, cin, h * w))
    yp = col2im(cols, n, cout, ho + 2 * pad, wo + 2 * pad, kh, kw, stride, h, w, x.dtype)
    y = yp[:, :, pad:pad + ho, pad:pad + wo] if pad else yp
    return y + bias.reshape(1, cout, 1, 1)


def conv_transpose2d_backward(dy, x, weights, stride, pad):
    """Gradients of conv_transpose2d w.r.t. (x, weights, bias)."""
    n, cin, h, w = x.shape
    cin_w, cout, kh, kw = weights.shape
    dcols, ho, wo = im2col(_pad(dy, pad), kh, kw, stride)
    # (ho, wo) here recover the transposed-conv *input* spatial dims
    assert (ho, wo) == (h, w)
    x2 = x.reshape(n, cin, h * w)
    dw = np.matmul(x2, dcols.transpose(0, 2, 1)).sum(axis=0).reshape(weights.shape)
    db = dy.sum(axis=(0, 2, 3))
    w2 = weights.reshape(cin, cout * kh * kw)
    dx = np.matmul(w2, dcols).reshape(n, cin, h, w)
    return dx, dw, db


def leaky_relu(x, slope=0.2):
    return np.where(x >= 0, x, slope * x)


def leaky_relu_backward(dy, x, slope=0.2):
    return np.where(x >= 0, dy, slope * dy)


def relu(x):
    return np.maximum(x, 0)


def relu_backward(dy, x):
    return np.where(x > 0, dy, 0)


def tanh(x):
    return np.tanh(x)


def tanh_backward(dy, y):
    return dy * (1.0 - y * y)


def he_std(cin, k):
    """Variance-preserving init scale; keeps signals alive through the
    normalization-free stack."""
    return float(np.sqrt(2.0 / (cin * k * k)))


class Layer:
    """Base: parameterized layers expose params/grads dicts keyed by name."""

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def zero_grad(self):
        for g in self.grads().values():
            g[...] = 0.0


class Conv2d(Layer):
    def __init__(self, cin, cout, k, stride, pad, rng, init_std=None,
                 dtype=np.float32):
        self.stride, self.pad = stride, pad
        std = he_std(cin, k) if init_std is None else init_std
        self.w = (rng.standard_normal((cout, cin, k, k)) * std).astype(dtype)
        self.b = np.zeros(cout, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x):
        self._x = x
        return conv2d(x, self.w, self.b, self.stride, self.pad)

    def backward(self, dy):
        dx, dw, db = conv2d_backward(dy, self._x, self.w, self.stride, self.pad)
        self.dw += dw
        self.db += db
        return dx

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class ConvTranspose2d(Layer):
    def __init__(self, cin, cout, k, stride, pad, rng, init_std=None,
                 dtype=np.float32):
        self.stride, self.pad = stride, pad
        std = he_std(cin, k) if init_std is None else init_std
        self.w = (rng.standard_normal((cin, cout, k, k)) * std).astype(dtype)
        self.b = np.zeros(cout, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x):
        self._x = x
        return conv_transpose2d(x, self.w, self.b, self.stride, self.pad)

    def backward(self, dy):
        dx, dw, db = conv_transpose2d_backward(dy, self._x, self.w,
                                               self.stride, self.pad)
        self.dw += dw
        self.db += db
        return dx

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class LeakyReLU(Layer):
    def __init__(self, slope=0.2):
        self.slope = slope
        self._x = None

    def forward(self, x):
        self._x = x
        return leaky_relu(x, self.slope)

    def backward(self, dy):
        return leaky_relu_backward(dy, self._x, self.slope)


class ReLU(Layer):
    def __init__(self):
        self._x = None

    def forward(self, x):
        self._x = x
        return relu(x)

    def backward(self, dy):
        return relu_backward(dy, self._x)


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x):
        self._y = tanh(x)
        return self._y

    def backward(self, dy):
        return tanh_backward(dy, self._y)


class ResBlock(Layer):
    """Two 3x3 same-padding convolutions with an internal ReLU and an
    identity skip. Zero-initialized convolutions make it the identity map."""

    def __init__(self, channels, rng, init_std=None, dtype=np.float32):
        self.conv1 = Conv2d(channels, channels, 3, 1, 1, rng, init_std, dtype)
        self.act = ReLU()
        self.conv2 = Conv2d(channels, channels, 3, 1, 1, rng, init_std, dtype)

    def forward(self, x):
        h = self.conv2.forward(self.act.forward(self.conv1.forward(x)))
        return x + h

    def backward(self, dy):
        dh = self.conv1.backward(self.act.backward(self.conv2.backward(dy)))
        return dy + dh

    def params(self):
        out = {}
        for tag, conv in (("conv1", self.conv1), ("conv2", self.conv2)):
            for k, v in conv.params().items():
                out[f"{tag}.{k}"] = v
        return out

    def grads(self):
        out = {}
        for tag, conv in (("conv1", self.conv1), ("conv2", self.conv2)):
            for k, v in conv.grads().items():
                out[f"{tag}.{k}"] = v
        return out
