"""Neural network layers with exact backpropagation, on plain numpy.

Every layer caches what its backward pass needs during forward, so one
forward/backward pair must complete before the next forward (the training
loop owns the model exclusively).  Parameters and gradients are exposed as
name -> array dicts; composite layers prefix child names with dots.

Convolution runs as an im2col matrix product; its input gradient is
scattered back with strided slice adds, which reproduces the direct
six-nested-loop definition exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

_checked = False


def set_checked(on: bool) -> None:
    """Enable NaN/Inf rejection at layer boundaries (slow, for debugging)."""
    global _checked
    _checked = bool(on)


def _check_finite(name: str, x: np.ndarray) -> None:
    if _checked and not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values leaving layer {name!r}")


class Layer:
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> dict[str, np.ndarray]:
        return {}

    def gradients(self) -> dict[str, np.ndarray]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}


def _im2col(xp: np.ndarray, k: int, stride: int):
    """Window matrix (C*k*k, N*oh*ow); this axis order gathers whole
    image planes at a time, which is what makes the copy cheap."""
    n, c, h, w = xp.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(c, k, k, n, oh, ow),
        strides=(s1, s2, s3, s0, s2 * stride, s3 * stride),
        writeable=False,
    )
    return windows.reshape(c * k * k, n * oh * ow), oh, ow


class Conv2d(Layer):
    """2D convolution (cross-correlation), NCHW, odd square kernels."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        *,
        rng: np.random.Generator,
        dtype=np.float32,
        input_grad: bool = True,
    ):
        if kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        # a network's first conv never needs d/dinput; skipping it saves the
        # most expensive scatter of the backward pass
        self.input_grad = input_grad
        scale = np.sqrt(2.0 / (in_channels * kernel_size * kernel_size))
        self.weight = rng.normal(
            0.0, scale, (out_channels, in_channels, kernel_size, kernel_size)
        ).astype(dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)
        self._cols: np.ndarray | None = None
        self._x_shape: tuple | None = None
        self._out_hw: tuple | None = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv expects (N, {self.in_channels}, H, W), got {x.shape}"
            )
        k, s, p = self.kernel_size, self.stride, self.padding
        if x.shape[2] + 2 * p < k or x.shape[3] + 2 * p < k:
            raise ShapeError(f"spatial dims {x.shape[2:]} too small for kernel {k}")
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols, oh, ow = _im2col(xp, k, s)
        w_mat = self.weight.reshape(self.out_channels, -1)
        out = w_mat @ cols + self.bias[:, None]
        self._cols = cols
        self._x_shape = x.shape
        self._out_hw = (oh, ow)
        out = out.reshape(self.out_channels, x.shape[0], oh, ow)
        out = np.ascontiguousarray(out.transpose(1, 0, 2, 3))
        _check_finite("conv2d", out)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n, _, h, w = self._x_shape
        oh, ow = self._out_hw
        k, s, p = self.kernel_size, self.stride, self.padding
        c = self.in_channels
        dout_mat = np.ascontiguousarray(dout.transpose(1, 0, 2, 3)).reshape(
            self.out_channels, -1
        )
        self.d_weight = (dout_mat @ self._cols.T).reshape(self.weight.shape)
        self.d_bias = dout_mat.sum(axis=1)
        if not self.input_grad:
            return None
        dcols = self.weight.reshape(self.out_channels, -1).T @ dout_mat
        dcols = dcols.reshape(c, k, k, n, oh, ow)
        # accumulate channel-major so every scatter adds contiguous planes
        dxp = np.zeros((c, n, h + 2 * p, w + 2 * p), dtype=dout.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + s * oh : s, j : j + s * ow : s] += dcols[:, i, j]
        dxp = dxp[:, :, p : p + h, p : p + w] if p else dxp
        return np.ascontiguousarray(dxp.transpose(1, 0, 2, 3))

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.d_weight, "bias": self.d_bias}


class BatchNorm2d(Layer):
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes with biased batch statistics and folds them into
    the running estimates as ``running = momentum * running + (1 -
    momentum) * batch``; inference normalizes with the running estimates.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, *, dtype=np.float32):
        if not 0.0 <= momentum <= 1.0:
            raise ValueError("momentum must be in [0, 1]")
        if eps <= 0.0:
            raise ValueError("eps must be > 0")
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.d_gamma = np.zeros_like(self.gamma)
        self.d_beta = np.zeros_like(self.beta)
        self._xhat: np.ndarray | None = None
        self._inv_std: np.ndarray | None = None
        self._train_mode = False

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeError(f"batchnorm expects (N, {self.channels}, H, W), got {x.shape}")
        if train:
            if x.shape[0] < 2:
                raise ShapeError("batchnorm in train mode needs batch size >= 2")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1.0 - m) * mean).astype(
                self.running_mean.dtype
            )
            self.running_var = (m * self.running_var + (1.0 - m) * var).astype(
                self.running_var.dtype
            )
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        xhat = xhat.astype(x.dtype, copy=False)
        self._xhat = xhat
        self._inv_std = inv_std.astype(x.dtype, copy=False)
        self._train_mode = train
        out = self.gamma[None, :, None, None] * xhat + self.beta[None, :, None, None]
        _check_finite("batchnorm2d", out)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat = self._xhat
        self.d_gamma = (dout * xhat).sum(axis=(0, 2, 3))
        self.d_beta = dout.sum(axis=(0, 2, 3))
        dxhat = dout * self.gamma[None, :, None, None]
        inv = self._inv_std[None, :, None, None]
        if not self._train_mode:
            return dxhat * inv
        n, _, h, w = dout.shape
        m = n * h * w
        mean_dxhat = dxhat.mean(axis=(0, 2, 3))[None, :, None, None]
        mean_dxhat_xhat = (dxhat * xhat).mean(axis=(0, 2, 3))[None, :, None, None]
        return inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def gradients(self):
        return {"gamma": self.d_gamma, "beta": self.d_beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class ReLU(Layer):
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._mask


class MaxPool2d(Layer):
    """Max pooling; backward routes each gradient to its argmax position."""

    def __init__(self, kernel_size: int, stride: int | None = None, padding: int = 0):
        self.kernel_size = kernel_size
        self.stride = stride if stride is not None else kernel_size
        self.padding = padding

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        k, s, p = self.kernel_size, self.stride, self.padding
        if x.ndim != 4:
            raise ShapeError(f"maxpool expects NCHW, got {x.shape}")
        if p:
            fill = np.finfo(x.dtype).min if np.issubdtype(x.dtype, np.floating) else np.iinfo(x.dtype).min
            xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=fill)
        else:
            xp = x
        n, c, hp, wp = xp.shape
        if hp < k or wp < k:
            raise ShapeError(f"spatial dims {x.shape[2:]} too small for pool {k}")
        oh = (hp - k) // s + 1
        ow = (wp - k) // s + 1
        s0, s1, s2, s3 = xp.strides
        windows = np.lib.stride_tricks.as_strided(
            xp,
            shape=(n, c, oh, ow, k, k),
            strides=(s0, s1, s2 * s, s3 * s, s2, s3),
            writeable=False,
        ).reshape(n, c, oh, ow, k * k)
        self._argmax = windows.argmax(axis=4)
        self._x_shape = x.shape
        self._padded_hw = (hp, wp)
        self._out_hw = (oh, ow)
        return windows.max(axis=4)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        k, s, p = self.kernel_size, self.stride, self.padding
        n, c, h, w = self._x_shape
        hp, wp = self._padded_hw
        oh, ow = self._out_hw
        ni, ci, oy, ox = np.indices((n, c, oh, ow), sparse=True)
        hy = oy * s + self._argmax // k
        wx = ox * s + self._argmax % k
        dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
        np.add.at(dxp, (ni, ci, hy, wx), dout)
        return dxp[:, :, p : p + h, p : p + w] if p else dxp


class GlobalAvgPool(Layer):
    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._x_shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n, c, h, w = self._x_shape
        return np.broadcast_to(dout[:, :, None, None], self._x_shape) / (h * w)


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, *, rng: np.random.Generator, dtype=np.float32):
        scale = np.sqrt(2.0 / in_features)
        self.weight = rng.normal(0.0, scale, (in_features, out_features)).astype(dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self.d_weight = np.zeros_like(self.weight)
        self.d_bias = np.zeros_like(self.bias)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ShapeError(
                f"dense expects (N, {self.weight.shape[0]}), got {x.shape}"
            )
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.d_weight = self._x.T @ dout
        self.d_bias = dout.sum(axis=0)
        return dout @ self.weight.T

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def gradients(self):
        return {"weight": self.d_weight, "bias": self.d_bias}


def add_forward(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Residual addition; shapes must agree exactly."""
    if a.shape != b.shape:
        raise ShapeError(f"add requires identical shapes, got {a.shape} and {b.shape}")
    return a + b


def add_backward(dout: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return dout, dout


def concat_channels_forward(parts: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Stack NCHW tensors along channels; returns (output, channel widths)."""
    base = parts[0].shape
    for p in parts[1:]:
        if p.shape[0] != base[0] or p.shape[2:] != base[2:]:
            raise ShapeError(
                f"concat requires matching batch/spatial dims, got "
                f"{[p.shape for p in parts]}"
            )
    return np.concatenate(parts, axis=1), [p.shape[1] for p in parts]


def concat_channels_backward(dout: np.ndarray, widths: list[int]) -> list[np.ndarray]:
    edges = np.cumsum(widths)[:-1]
    return np.split(dout, edges, axis=1)


class Sequential(Layer):
    """Named chain of layers; child tensors are exposed as 'name.tensor'."""

    def __init__(self, children: list[tuple[str, Layer]]):
        names = [name for name, _ in children]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate child names in {names}")
        self.children = children

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for _, layer in self.children:
            x = layer.forward(x, train)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for _, layer in reversed(self.children):
            dout = layer.backward(dout)
        return dout

    def _collect(self, getter: str) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, layer in self.children:
            for key, arr in getattr(layer, getter)().items():
                out[f"{name}.{key}"] = arr
        return out

    def parameters(self):
        return self._collect("parameters")

    def gradients(self):
        return self._collect("gradients")

    def buffers(self):
        return self._collect("buffers")
