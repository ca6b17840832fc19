"""Batch, instance and bias-free feature normalization layers.

Conventions (recorded in every checkpoint manifest): epsilon 1e-5,
running-stat momentum 0.1, population (1/n) variance everywhere. The batch
norm backward propagates the full dependence of the batch statistics on
every sample, so finite-difference checks pass at tight tolerances.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ProtocolError
from .ops import Param, get_default_dtype

EPSILON = 1e-5
MOMENTUM = 0.1


class BatchNorm:
    """Per-channel standardization over the batch (and spatial axes for 4-D
    input), with learnable scale gamma and shift beta and running statistics
    for eval mode.

    With ``beta_frozen=True`` the shift is pinned to zero and excluded from
    optimizer updates: that variant, applied to pooled 2-D features, is the
    feature-normalization head.
    """

    def __init__(self, channels: int, name: str = "bn", eps: float = EPSILON,
                 momentum: float = MOMENTUM, beta_frozen: bool = False,
                 dtype=None):
        dtype = dtype or get_default_dtype()
        self.channels = channels
        self.name = name
        self.eps = eps
        self.momentum = momentum
        self.beta_frozen = beta_frozen
        self.gamma = Param(f"{name}.gamma", np.ones(channels, dtype=dtype), decay=False)
        self.beta = Param(f"{name}.beta", np.zeros(channels, dtype=dtype),
                          frozen=beta_frozen, decay=False)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.updates = 0
        self._cache = None

    # ---- parameter / state plumbing -------------------------------------
    def params(self):
        return [self.gamma, self.beta]

    def state_arrays(self):
        return [(f"{self.name}.running_mean", self.running_mean),
                (f"{self.name}.running_var", self.running_var)]

    # ---- math ------------------------------------------------------------
    def _axes_and_views(self, x):
        if x.ndim == 4:
            if x.shape[1] != self.channels:
                raise ConfigurationError(
                    f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
            return (0, 2, 3), (1, self.channels, 1, 1)
        if x.ndim == 2:
            if x.shape[1] != self.channels:
                raise ConfigurationError(
                    f"{self.name}: expected {self.channels} features, got {x.shape[1]}")
            return (0,), (1, self.channels)
        raise ConfigurationError(f"{self.name}: input must be 2-D or 4-D, got {x.ndim}-D")

    def forward(self, x: np.ndarray, train: bool, update_stats: bool = True) -> np.ndarray:
        axes, view = self._axes_and_views(x)
        if train:
            if x.shape[0] < 2:
                raise ProtocolError(
                    f"{self.name}: batch normalization in train mode needs a batch "
                    f"of at least 2, got {x.shape[0]}")
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)
            if update_stats:
                m = x.dtype.type(self.momentum)
                self.running_mean[...] = (1 - m) * self.running_mean + m * mu
                self.running_var[...] = (1 - m) * self.running_var + m * var
                self.updates += 1
        else:
            mu = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + x.dtype.type(self.eps))
        x_hat = (x - mu.reshape(view)) * inv_std.reshape(view)
        y = self.gamma.data.reshape(view) * x_hat + self.beta.data.reshape(view)
        self._cache = (x_hat, inv_std, axes, view, train, x.shape)
        return y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ConfigurationError(f"{self.name}: backward called before forward")
        x_hat, inv_std, axes, view, train, shape = self._cache
        if grad_out.shape != shape:
            raise ConfigurationError(
                f"{self.name}: grad shape {grad_out.shape} != forward shape {shape}")
        self.gamma.grad += (grad_out * x_hat).sum(axis=axes)
        self.beta.grad += grad_out.sum(axis=axes)
        g_hat = grad_out * self.gamma.data.reshape(view)
        if not train:
            return g_hat * inv_std.reshape(view)
        # Full batch-coupled Jacobian: the batch mean and variance depend on
        # every sample, so their gradients flow back to all of them.
        mean_g = g_hat.mean(axis=axes).reshape(view)
        mean_gx = (g_hat * x_hat).mean(axis=axes).reshape(view)
        return inv_std.reshape(view) * (g_hat - mean_g - x_hat * mean_gx)


class FeatureNorm(BatchNorm):
    """Bias-free batch normalization of pooled 2-D features: beta is fixed
    at zero and never updated, and the layer refuses to exist otherwise."""

    def __init__(self, channels: int, name: str = "fn", eps: float = EPSILON,
                 momentum: float = MOMENTUM, beta_frozen: bool = True, dtype=None):
        if not beta_frozen:
            raise ConfigurationError(
                "feature normalization only exists in the frozen-beta variant")
        super().__init__(channels, name=name, eps=eps, momentum=momentum,
                         beta_frozen=True, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool, update_stats: bool = True) -> np.ndarray:
        if x.ndim != 2:
            raise ConfigurationError(
                f"{self.name}: feature norm expects pooled (B,C) features, got {x.shape}")
        return super().forward(x, train, update_stats)


class InstanceNorm:
    """Per-(sample, channel) standardization over the spatial plane, with an
    optional learnable per-channel affine. No running statistics: behavior is
    identical in train and eval mode."""

    def __init__(self, channels: int, name: str = "in", eps: float = EPSILON,
                 affine: bool = True, dtype=None):
        dtype = dtype or get_default_dtype()
        self.channels = channels
        self.name = name
        self.eps = eps
        self.affine = affine
        if affine:
            self.gamma = Param(f"{name}.gamma", np.ones(channels, dtype=dtype), decay=False)
            self.beta = Param(f"{name}.beta", np.zeros(channels, dtype=dtype), decay=False)
        else:
            self.gamma = None
            self.beta = None
        self._cache = None

    def params(self):
        return [self.gamma, self.beta] if self.affine else []

    def state_arrays(self):
        return []

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.ndim != 4:
            raise ConfigurationError(f"{self.name}: expected NCHW input, got {x.shape}")
        if x.shape[1] != self.channels:
            raise ConfigurationError(
                f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
        if x.shape[2] * x.shape[3] < 2:
            raise ConfigurationError(
                f"{self.name}: instance norm is undefined on a {x.shape[2]}x{x.shape[3]} "
                "plane (needs at least 2 spatial positions)")
        mu = x.mean(axis=(2, 3), keepdims=True)
        var = x.var(axis=(2, 3), keepdims=True)
        inv_std = 1.0 / np.sqrt(var + x.dtype.type(self.eps))
        x_hat = (x - mu) * inv_std
        if self.affine:
            y = self.gamma.data.reshape(1, -1, 1, 1) * x_hat + self.beta.data.reshape(1, -1, 1, 1)
        else:
            y = x_hat
        self._cache = (x_hat, inv_std, x.shape)
        return y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise ConfigurationError(f"{self.name}: backward called before forward")
        x_hat, inv_std, shape = self._cache
        if grad_out.shape != shape:
            raise ConfigurationError(
                f"{self.name}: grad shape {grad_out.shape} != forward shape {shape}")
        if self.affine:
            self.gamma.grad += (grad_out * x_hat).sum(axis=(0, 2, 3))
            self.beta.grad += grad_out.sum(axis=(0, 2, 3))
            g_hat = grad_out * self.gamma.data.reshape(1, -1, 1, 1)
        else:
            g_hat = grad_out
        mean_g = g_hat.mean(axis=(2, 3), keepdims=True)
        mean_gx = (g_hat * x_hat).mean(axis=(2, 3), keepdims=True)
        return inv_std * (g_hat - mean_g - x_hat * mean_gx)
