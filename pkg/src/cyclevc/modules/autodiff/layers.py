"""
Layers used by the spectral model and the vocoder.

Every layer is a thin object that registers its parameters in a
``ParameterStore`` under a name prefix and then runs on a dictionary of bound
tensors, so the same layer serves taped training and tape-free inference.
All sequences are time-major: ``[frames, channels]``.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np

from ...error_handling import ShapeError
from .optim import ParameterStore
from .tensor import Conv1dFunction, Tensor, as_tensor, concat, sigmoid, tanh

Params = Dict[str, Tensor]


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return x @ weight + bias


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, dilation: int = 1, causal: bool = False) -> Tensor:
    """Dilated 1-D convolution that preserves the frame count.

    Padding is symmetric for non-causal kernels and left-only for causal ones.
    """
    if dilation < 1:
        raise ShapeError("dilation must be >= 1")
    return Conv1dFunction.apply(x, weight, bias, dilation=dilation, causal=causal)


def _gru_cell(gates_x: Tensor, h_prev: Tensor, w_hh: Tensor, b_hh: Tensor, hidden: int) -> Tensor:
    gates_h = h_prev @ w_hh + b_hh
    reset = sigmoid(gates_x[:, :hidden] + gates_h[:, :hidden])
    update = sigmoid(gates_x[:, hidden:2 * hidden] + gates_h[:, hidden:2 * hidden])
    candidate = tanh(gates_x[:, 2 * hidden:] + reset * gates_h[:, 2 * hidden:])
    # (1 - z) * n + z * h
    return candidate + update * (h_prev - candidate)


def gru_step(x_t: Tensor, h_prev: Tensor, w_ih: Tensor, w_hh: Tensor, b_ih: Tensor, b_hh: Tensor) -> Tensor:
    """One gated recurrent update (gate order: reset, update, candidate)"""
    x_t, h_prev = as_tensor(x_t), as_tensor(h_prev)
    if x_t.ndim == 1:
        x_t = x_t.reshape(1, -1)
    if h_prev.ndim == 1:
        h_prev = h_prev.reshape(1, -1)
    hidden = h_prev.shape[1]
    if w_hh.shape != (hidden, 3 * hidden) or w_ih.shape != (x_t.shape[1], 3 * hidden):
        raise ShapeError(
            f"GRU shape mismatch: x {x_t.shape}, h {h_prev.shape}, w_ih {w_ih.shape}, w_hh {w_hh.shape}"
        )
    return _gru_cell(x_t @ w_ih + b_ih, h_prev, w_hh, b_hh, hidden)


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    def __init__(self, store: ParameterStore, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator):
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        store.add(f"{name}.weight", _uniform(rng, (in_dim, out_dim), in_dim))
        store.add(f"{name}.bias", np.zeros(out_dim))

    def __call__(self, params: Params, x: Tensor) -> Tensor:
        return dense(x, params[f"{self.name}.weight"], params[f"{self.name}.bias"])


class Conv1d:
    def __init__(self, store: ParameterStore, name: str, in_ch: int, out_ch: int, kernel_size: int,
                 rng: np.random.Generator, dilation: int = 1, causal: bool = False):
        self.name = name
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.causal = causal
        store.add(f"{name}.weight", _uniform(rng, (kernel_size, in_ch, out_ch), kernel_size * in_ch))
        store.add(f"{name}.bias", np.zeros(out_ch))

    @property
    def receptive_field(self) -> int:
        return (self.kernel_size - 1) * self.dilation + 1

    def __call__(self, params: Params, x: Tensor) -> Tensor:
        return conv1d(x, params[f"{self.name}.weight"], params[f"{self.name}.bias"],
                      dilation=self.dilation, causal=self.causal)


class GRU:
    """Single-layer GRU with an optional dense output fed back into the next step"""

    def __init__(self, store: ParameterStore, name: str, in_dim: int, hidden: int,
                 rng: np.random.Generator, out_dim: Optional[int] = None, feedback: bool = False):
        if feedback and out_dim is None:
            raise ShapeError("output feedback needs an output layer")
        self.name = name
        self.in_dim = in_dim
        self.hidden = hidden
        self.feedback = feedback
        self.out_dim = out_dim
        rec_in = in_dim + (out_dim if feedback else 0)
        store.add(f"{name}.w_ih", _uniform(rng, (rec_in, 3 * hidden), hidden))
        store.add(f"{name}.w_hh", _uniform(rng, (hidden, 3 * hidden), hidden))
        store.add(f"{name}.b_ih", _uniform(rng, (3 * hidden,), hidden))
        store.add(f"{name}.b_hh", _uniform(rng, (3 * hidden,), hidden))
        self.output = Dense(store, f"{name}.out", hidden, out_dim, rng) if out_dim is not None else None

    def __call__(self, params: Params, x: Tensor, h0: Optional[Tensor] = None) -> Tensor:
        """Run over ``x`` [frames, in_dim]; returns output-layer frames (or hidden states)"""
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"{self.name}: expected [frames, {self.in_dim}], got {x.shape}")
        w_ih = params[f"{self.name}.w_ih"]
        w_hh = params[f"{self.name}.w_hh"]
        b_ih = params[f"{self.name}.b_ih"]
        b_hh = params[f"{self.name}.b_hh"]
        hidden = self.hidden

        if self.feedback:
            gates_x = x @ w_ih[:self.in_dim] + b_ih
            w_fb = w_ih[self.in_dim:]
        else:
            gates_x = x @ w_ih + b_ih
            w_fb = None

        h = as_tensor(h0) if h0 is not None else Tensor(np.zeros((1, hidden)))
        y_prev = Tensor(np.zeros((1, self.out_dim))) if self.output is not None else None
        outputs: List[Tensor] = []
        for t in range(x.shape[0]):
            g = gates_x[t:t + 1]
            if w_fb is not None:
                g = g + y_prev @ w_fb
            h = _gru_cell(g, h, w_hh, b_hh, hidden)
            if self.output is not None:
                y_prev = self.output(params, h)
                outputs.append(y_prev)
            else:
                outputs.append(h)
        return concat(outputs, axis=0)


def numerical_gradient(func, value: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``func(value)``; ``value`` is perturbed in place and restored"""
    grad = np.zeros_like(value, dtype=np.float64)
    flat = value.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        upper = float(func(value))
        flat[i] = original - step
        lower = float(func(value))
        flat[i] = original
        out[i] = (upper - lower) / (2.0 * step)
    return grad
