"""Dense-tensor numeric kernel: same-padding 2-D convolution with exact
analytic backpropagation, channel concatenation, MSE loss, Adam, and a
finite-difference gradient checker.

Tensors are plain numpy arrays of shape (height, width, channels). All
arithmetic runs in float64 so analytic gradients survive finite-difference
checks at 1e-4 steps; only checkpoints downcast to float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ConvLayer",
    "AdamState",
    "conv_forward",
    "conv_forward_cached",
    "conv_backward",
    "concat_channels",
    "mse_loss",
    "adam_step",
    "init_weights",
    "numeric_gradient",
    "relative_gradient_error",
]

_ACTIVATIONS = ("relu", "linear")


@dataclass
class ConvLayer:
    """One stride-1, zero-padded ("same") convolution layer.

    Weights have shape (out_channels, in_channels, k, k); kernel_size k is
    odd so the padding of (k-1)/2 is symmetric and spatial size is
    preserved.
    """

    kernel_size: int
    in_channels: int
    out_channels: int
    weights: np.ndarray
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self) -> None:
        k = self.kernel_size
        if k < 1 or k % 2 == 0:
            raise ValueError(f"kernel_size must be odd and positive, got {k}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        expect_w = (self.out_channels, self.in_channels, k, k)
        if self.weights.shape != expect_w:
            raise ValueError(
                f"weights shape {self.weights.shape} != declared {expect_w}"
            )
        if self.biases.shape != (self.out_channels,):
            raise ValueError(
                f"biases shape {self.biases.shape} != ({self.out_channels},)"
            )

    @property
    def weight_matrix(self) -> np.ndarray:
        """(in*k*k, out) view used by the im2col matmul."""
        return self.weights.reshape(self.out_channels, -1).T


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Unfold zero-padded k x k patches into rows of (H*W, C*k*k).

    Column order is (channel, row offset, col offset), matching the C-order
    flattening of ConvLayer.weights.
    """
    h, w, c = x.shape
    p = k // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    cols = np.empty((h, w, c, k, k), dtype=np.float64)
    for di in range(k):
        for dj in range(k):
            cols[:, :, :, di, dj] = xp[di : di + h, dj : dj + w, :]
    return cols.reshape(h * w, c * k * k)


def _col2im(g_cols: np.ndarray, shape: tuple[int, int, int], k: int) -> np.ndarray:
    """Scatter-add patch gradients back to the input; adjoint of _im2col."""
    h, w, c = shape
    p = k // 2
    g_pad = np.zeros((h + 2 * p, w + 2 * p, c), dtype=np.float64)
    g5 = g_cols.reshape(h, w, c, k, k)
    for di in range(k):
        for dj in range(k):
            g_pad[di : di + h, dj : dj + w, :] += g5[:, :, :, di, dj]
    return g_pad[p : p + h, p : p + w, :]


def _check_input(layer: ConvLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("input must be (height, width, channels)")
    if x.shape[2] != layer.in_channels:
        raise ValueError(
            f"input has {x.shape[2]} channels, layer expects {layer.in_channels}"
        )
    return x


def conv_forward(layer: ConvLayer, x: np.ndarray) -> np.ndarray:
    """Activation(x * weights + bias) with zero padding; output is (H, W, out)."""
    y, _ = conv_forward_cached(layer, x)
    return y


def conv_forward_cached(
    layer: ConvLayer, x: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Forward pass that also returns (cols, pre_activation) for backward."""
    x = _check_input(layer, x)
    h, w, _ = x.shape
    cols = _im2col(x, layer.kernel_size)
    pre = cols @ layer.weight_matrix + layer.biases
    pre = pre.reshape(h, w, layer.out_channels)
    out = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    return out, (cols, pre)


def conv_backward(
    layer: ConvLayer,
    x: np.ndarray,
    grad_out: np.ndarray,
    cache: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of the activated convolution.

    `grad_out` is the loss gradient w.r.t. the layer output. Returns
    (grad_input, grad_weights, grad_biases). `cache` from
    :func:`conv_forward_cached` skips the forward recomputation.
    """
    x = _check_input(layer, x)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    h, w, _ = x.shape
    if grad_out.shape != (h, w, layer.out_channels):
        raise ValueError(
            f"grad_out shape {grad_out.shape} != {(h, w, layer.out_channels)}"
        )
    if cache is None:
        _, cache = conv_forward_cached(layer, x)
    cols, pre = cache

    g_pre = grad_out
    if layer.activation == "relu":
        g_pre = grad_out * (pre > 0.0)
    g_pre_mat = g_pre.reshape(h * w, layer.out_channels)

    grad_biases = g_pre_mat.sum(axis=0)
    grad_weights = (cols.T @ g_pre_mat).T.reshape(layer.weights.shape)
    g_cols = g_pre_mat @ layer.weight_matrix.T
    grad_input = _col2im(g_cols, x.shape, layer.kernel_size)
    return grad_input, grad_weights, grad_biases


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack two tensors along the channel axis; a's channels come first."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(f"spatial mismatch: {a.shape[:2]} vs {b.shape[:2]}")
    return np.concatenate([a, b], axis=2)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. the prediction."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad


@dataclass
class AdamState:
    """Adam moment accumulators for a fixed list of parameter arrays."""

    shapes: list[tuple[int, ...]]
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.m:
            self.m = [np.zeros(s, dtype=np.float64) for s in self.shapes]
        if not self.v:
            self.v = [np.zeros(s, dtype=np.float64) for s in self.shapes]


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> list[np.ndarray]:
    """One bias-corrected Adam update, applied in place to `params`."""
    if len(params) != len(state.shapes) or len(grads) != len(params):
        raise ValueError("params/grads do not match the optimizer state")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != state.shapes[i] or g.shape != state.shapes[i]:
            raise ValueError(
                f"parameter {i} shape mismatch: {p.shape} vs {state.shapes[i]}"
            )
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / (1.0 - b1**t)
        v_hat = state.v[i] / (1.0 - b2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


def init_weights(
    kernel_size: int,
    in_channels: int,
    out_channels: int,
    seed: int,
    activation: str = "relu",
) -> ConvLayer:
    """He-style uniform init scaled by fan-in; biases start at zero."""
    rng = np.random.default_rng(seed)
    fan_in = in_channels * kernel_size * kernel_size
    limit = np.sqrt(6.0 / fan_in)
    weights = rng.uniform(
        -limit, limit, size=(out_channels, in_channels, kernel_size, kernel_size)
    )
    return ConvLayer(
        kernel_size=kernel_size,
        in_channels=in_channels,
        out_channels=out_channels,
        weights=weights,
        biases=np.zeros(out_channels),
        activation=activation,
    )


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def numeric_gradient(
    f: Callable[[], float], param: np.ndarray, eps: float = 1e-4
) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. every entry of `param`.

    `param` is perturbed in place and restored, so f must read it afresh on
    each call.
    """
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * eps)
    return grad


def relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm difference scaled by the larger gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)
