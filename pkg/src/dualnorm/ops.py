"""Forward/backward primitives for the network: convolutions, ReLU6,
global average pooling and the bias-free linear map.

All functions are pure: outputs depend only on the explicit arguments, and
repeated calls give bit-identical results. Arrays are NCHW, C-contiguous.
The engine runs in float32 by default; switch to float64 for gradient
checking with ``set_default_dtype`` / ``precision``.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericError

CONV_KINDS = ("standard3x3", "pointwise1x1", "depthwise3x3")

_default_dtype = np.float32


def set_default_dtype(dtype) -> None:
    global _default_dtype
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ConfigurationError(f"unsupported engine dtype {dtype!r}")
    _default_dtype = dt.type


def get_default_dtype():
    return _default_dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the engine default dtype (used by grad checks)."""
    prev = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


@dataclass
class Param:
    """A learnable array with its gradient buffer.

    ``frozen`` parameters are never touched by the optimizer; ``decay``
    controls whether weight decay applies (off for normalization scales
    and shifts).
    """

    name: str
    data: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]
    frozen: bool = False
    decay: bool = True

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        if self.grad.shape != self.data.shape:
            raise ConfigurationError(
                f"param {self.name}: grad shape {self.grad.shape} != data shape {self.data.shape}")

    def zero_grad(self) -> None:
        self.grad[...] = 0


def ensure_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


def _check_4d(x: np.ndarray, what: str) -> None:
    if x.ndim != 4:
        raise ConfigurationError(f"{what}: expected a 4-D NCHW array, got shape {x.shape}")


def conv_weight_shape(kind: str, in_channels: int, out_channels: int) -> tuple:
    if kind == "standard3x3":
        return (out_channels, in_channels, 3, 3)
    if kind == "pointwise1x1":
        return (out_channels, in_channels, 1, 1)
    if kind == "depthwise3x3":
        return (in_channels, 3, 3)
    raise ConfigurationError(f"unknown convolution kind {kind!r}")


def conv_padding(kind: str) -> int:
    return 0 if kind == "pointwise1x1" else 1


def conv_out_hw(kind: str, h: int, w: int, stride: int) -> tuple[int, int]:
    k = 1 if kind == "pointwise1x1" else 3
    p = conv_padding(kind)
    return ((h + 2 * p - k) // stride + 1, (w + 2 * p - k) // stride + 1)


def _validate_conv(x, weight, stride, kind):
    _check_4d(x, "conv2d input")
    if kind not in CONV_KINDS:
        raise ConfigurationError(f"unknown convolution kind {kind!r}")
    if stride not in (1, 2):
        raise ConfigurationError(f"stride must be 1 or 2, got {stride}")
    c_in = x.shape[1]
    if kind == "depthwise3x3":
        expect = (c_in, 3, 3)
    elif kind == "standard3x3":
        expect = (weight.shape[0], c_in, 3, 3)
    else:
        expect = (weight.shape[0], c_in, 1, 1)
    if weight.shape != expect:
        raise ConfigurationError(
            f"conv2d {kind}: weight shape {weight.shape} inconsistent with input "
            f"channels {c_in} (expected {expect})")


def _pad_input(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return np.ascontiguousarray(x)
    b, c, h, w = x.shape
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xp[:, :, pad:pad + h, pad:pad + w] = x
    return xp


def conv2d_forward(x: np.ndarray, weight: Param, stride: int, kind: str) -> np.ndarray:
    """Direct convolution. Padding is 1 for the 3x3 kinds, 0 for 1x1."""
    w = weight.data if isinstance(weight, Param) else weight
    _validate_conv(x, w, stride, kind)
    b, c, h, wd = x.shape
    oh, ow = conv_out_hw(kind, h, wd, stride)
    if kind == "pointwise1x1":
        xs = x[:, :, ::stride, ::stride] if stride > 1 else x
        xs = np.ascontiguousarray(xs)
        out = np.empty((b, w.shape[0], oh, ow), dtype=x.dtype)
        kernels.pw_fwd(xs.reshape(b, c, oh * ow),
                       np.ascontiguousarray(w.reshape(w.shape[0], c)),
                       out.reshape(b, w.shape[0], oh * ow))
        return out
    xp = _pad_input(x, 1)
    if kind == "depthwise3x3":
        out = np.empty((b, c, oh, ow), dtype=x.dtype)
        kernels.dw_fwd(xp, w, stride, out)
        return out
    out = np.empty((b, w.shape[0], oh, ow), dtype=x.dtype)
    kernels.conv_std_fwd(xp, w, stride, out)
    return out


def conv2d_backward(grad_out: np.ndarray, saved_input: np.ndarray, weight: Param,
                    stride: int, kind: str) -> np.ndarray:
    """Returns grad wrt the input; accumulates the weight gradient in place."""
    w = weight.data
    _validate_conv(saved_input, w, stride, kind)
    b, c, h, wd = saved_input.shape
    oh, ow = conv_out_hw(kind, h, wd, stride)
    if grad_out.shape[0] != b or grad_out.shape[2:] != (oh, ow):
        raise ConfigurationError(
            f"conv2d {kind}: grad_out shape {grad_out.shape} does not match "
            f"forward output ({b}, ·, {oh}, {ow})")
    grad_out = np.ascontiguousarray(grad_out)
    if kind == "pointwise1x1":
        xs = saved_input[:, :, ::stride, ::stride] if stride > 1 else saved_input
        xs = np.ascontiguousarray(xs)
        co = w.shape[0]
        g2 = grad_out.reshape(b, co, oh * ow)
        kernels.pw_bwd_weight(g2, xs.reshape(b, c, oh * ow),
                              weight.grad.reshape(co, c))
        gxs = np.empty((b, c, oh, ow), dtype=grad_out.dtype)
        wt = np.ascontiguousarray(w.reshape(co, c).T)
        kernels.pw_fwd(g2, wt, gxs.reshape(b, c, oh * ow))
        if stride == 1:
            return gxs
        gx = np.zeros_like(saved_input)
        gx[:, :, ::stride, ::stride] = gxs
        return gx
    pad = 1
    xp = _pad_input(saved_input, pad)
    gxp = np.zeros_like(xp)
    if kind == "depthwise3x3":
        kernels.dw_bwd_input(grad_out, w, stride, gxp)
        kernels.dw_bwd_weight(grad_out, xp, stride, weight.grad)
    else:
        kernels.conv_std_bwd_input(grad_out, w, stride, gxp)
        kernels.conv_std_bwd_weight(grad_out, xp, stride, weight.grad)
    return np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + wd])


def relu6_forward(x: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, 0), x.dtype.type(6))


def relu6_backward(grad_out: np.ndarray, saved_input: np.ndarray) -> np.ndarray:
    mask = (saved_input > 0) & (saved_input < 6)
    return grad_out * mask.astype(grad_out.dtype)


def global_avg_pool_forward(x: np.ndarray) -> np.ndarray:
    """Mean over the spatial plane, keeping a (B,C,1,1) shape."""
    _check_4d(x, "global_avg_pool input")
    return x.mean(axis=(2, 3), keepdims=True)


def global_avg_pool_backward(grad_out: np.ndarray, in_shape: tuple) -> np.ndarray:
    b, c, h, w = in_shape
    scale = grad_out.dtype.type(1.0 / (h * w))
    return np.broadcast_to(grad_out * scale, in_shape).copy()


def linear_nobias_forward(x: np.ndarray, weight: Param) -> np.ndarray:
    """x (B,C) @ weight (N,C) transposed -> (B,N). No bias by construction."""
    w = weight.data if isinstance(weight, Param) else weight
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ConfigurationError(
            f"linear_nobias: input {x.shape} incompatible with weight {w.shape}")
    out = np.empty((x.shape[0], w.shape[0]), dtype=x.dtype)
    kernels.matmul_nt(np.ascontiguousarray(x), np.ascontiguousarray(w), out)
    return out


def linear_nobias_backward(grad_out: np.ndarray, saved_input: np.ndarray,
                           weight: Param) -> np.ndarray:
    w = weight.data
    if grad_out.shape != (saved_input.shape[0], w.shape[0]):
        raise ConfigurationError(
            f"linear_nobias: grad_out shape {grad_out.shape} does not match "
            f"({saved_input.shape[0]}, {w.shape[0]})")
    grad_out = np.ascontiguousarray(grad_out)
    gw = np.empty_like(w)
    kernels.matmul_nt(np.ascontiguousarray(grad_out.T),
                      np.ascontiguousarray(saved_input.T), gw)
    weight.grad += gw
    gx = np.empty_like(saved_input)
    kernels.matmul_nt(grad_out, np.ascontiguousarray(w.T), gx)
    return gx


def kaiming_normal(rng: np.random.Generator, shape: tuple, fan_in: int,
                   dtype=None) -> np.ndarray:
    """Fan-in scaled normal init for ReLU-family convolutions."""
    dtype = dtype or get_default_dtype()
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(dtype)


def scaled_normal(rng: np.random.Generator, shape: tuple, scale: float,
                  dtype=None) -> np.ndarray:
    dtype = dtype or get_default_dtype()
    return (rng.standard_normal(shape) * scale).astype(dtype)
