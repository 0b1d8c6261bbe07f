"""
Reverse-mode automatic differentiation on numpy arrays.

A ``Tensor`` wraps a float64 array. Operations on tensors that belong to a
``Tape`` are recorded in execution order together with the ``Function``
object that saved what its backward pass needs; tensors without a tape are
plain constants and cost nothing beyond the numpy computation, which is how
inference runs.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ...error_handling import ShapeError, SignalError


class Tensor:
    """A float64 array, optionally attached to a tape"""

    __slots__ = ("data", "tape", "name", "__weakref__")

    # numpy must defer to Tensor's reflected operators
    __array_priority__ = 100.0

    def __init__(self, data: Any, tape: Optional["Tape"] = None, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"<Tensor{tag} shape={self.shape} taped={self.tape is not None}>"

    def __neg__(self): return Neg.apply(self)
    def __add__(self, other): return Add.apply(self, other)
    def __radd__(self, other): return Add.apply(other, self)
    def __sub__(self, other): return Sub.apply(self, other)
    def __rsub__(self, other): return Sub.apply(other, self)
    def __mul__(self, other): return Mul.apply(self, other)
    def __rmul__(self, other): return Mul.apply(other, self)
    def __truediv__(self, other): return Div.apply(self, other)
    def __rtruediv__(self, other): return Div.apply(other, self)
    def __matmul__(self, other): return MatMul.apply(self, other)
    def __getitem__(self, key): return GetItem.apply(self, key=key)

    def sum(self, axis=None, keepdims: bool = False): return Sum.apply(self, axis=axis, keepdims=keepdims)
    def mean(self, axis=None, keepdims: bool = False): return mean(self, axis=axis, keepdims=keepdims)
    def reshape(self, *shape): return Reshape.apply(self, shape=_shape_arg(shape))
    @property
    def T(self): return Transpose.apply(self)


def _shape_arg(shape: Sequence) -> Tuple[int, ...]:
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        return tuple(shape[0])
    return tuple(shape)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class _SliceGrad:
    """Gradient that only touches ``key`` of its parent"""

    __slots__ = ("key", "value")

    def __init__(self, key: Any, value: np.ndarray):
        self.key = key
        self.value = value


class _Node:
    __slots__ = ("function", "output")

    def __init__(self, function: "Function", output: Tensor):
        self.function = function
        self.output = output


class Tape:
    """Ordered record of the primitive operations of one forward pass"""

    def __init__(self):
        self.nodes: List[_Node] = []
        self._leaves: List[Tuple[Tensor, Any, str]] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, function: "Function", output: Tensor) -> None:
        self.nodes.append(_Node(function, output))

    def watch(self, tensor: Tensor, store: Any, name: str) -> Tensor:
        """Attach a parameter leaf whose gradient flows back into ``store``"""
        tensor.tape = self
        self._leaves.append((tensor, store, name))
        return tensor

    def variable(self, data: Any, name: Optional[str] = None) -> Tensor:
        """A leaf on this tape that is not backed by a parameter store"""
        return Tensor(data, tape=self, name=name)

    def gradients(self, loss: Tensor) -> Dict[int, np.ndarray]:
        """Run the reverse pass and return gradients keyed by tensor id"""
        if not isinstance(loss, Tensor) or loss.tape is not self:
            raise ShapeError("loss was not produced on this tape")
        if loss.data.size != 1:
            raise ShapeError(f"loss must be a scalar, got shape {loss.shape}")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        owned = {id(loss)}
        for node in reversed(self.nodes):
            grad = grads.pop(id(node.output), None)
            if grad is None:
                continue
            function = node.function
            parent_grads = function.backward(grad)
            for parent, parent_grad in zip(function.parents, parent_grads):
                if parent_grad is None or parent.tape is not self:
                    continue
                _accumulate(grads, owned, parent, parent_grad)
        return grads

    def backward(self, loss: Tensor) -> Dict[int, np.ndarray]:
        """Reverse pass; parameter gradients are added to their stores"""
        grads = self.gradients(loss)
        for tensor, store, name in self._leaves:
            grad = grads.get(id(tensor))
            if grad is not None:
                store.accumulate_grad(name, grad)
        return grads


def backward(tape: Tape, loss: Tensor) -> Dict[int, np.ndarray]:
    """Accumulate d(loss)/d(param) into every parameter store bound on ``tape``"""
    return tape.backward(loss)


def _accumulate(grads: Dict[int, np.ndarray], owned: set, parent: Tensor, grad: Any) -> None:
    key = id(parent)
    if isinstance(grad, _SliceGrad):
        buffer = grads.get(key)
        if buffer is None:
            buffer = np.zeros(parent.shape)
            grads[key] = buffer
            owned.add(key)
        elif key not in owned:
            buffer = np.array(buffer, dtype=np.float64)
            grads[key] = buffer
            owned.add(key)
        if _is_basic_index(grad.key):
            buffer[grad.key] += grad.value
        else:
            np.add.at(buffer, grad.key, grad.value)
        return

    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != parent.shape:
        raise ShapeError(f"gradient shape {grad.shape} does not match {parent.shape}")
    existing = grads.get(key)
    if existing is None:
        grads[key] = grad
    elif key in owned:
        existing += grad
    else:
        grads[key] = np.array(existing + grad, dtype=np.float64)
        owned.add(key)


def _is_basic_index(key: Any) -> bool:
    items = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None for k in items)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Function:
    """A primitive operation: forward on arrays, backward to parent gradients"""

    parents: Tuple[Tensor, ...] = ()

    def __init__(self, **kwargs):
        for key, value in kwargs.items():
            setattr(self, key, value)

    @classmethod
    def apply(cls, *inputs: Any, **kwargs) -> Tensor:
        tensors = tuple(as_tensor(x) for x in inputs)
        tape = None
        for t in tensors:
            if t.tape is not None:
                if tape is not None and t.tape is not tape:
                    raise ShapeError("operands belong to different tapes")
                tape = t.tape
        function = cls(**kwargs)
        out = np.asarray(function.forward(*(t.data for t in tensors)), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise SignalError(f"non-finite value produced by {cls.__name__}")
        result = Tensor(out)
        if tape is not None:
            function.parents = tensors
            result.tape = tape
            tape.record(function, result)
        return result

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Any, ...]:
        raise NotImplementedError


class Add(Function):
    def forward(self, x, y):
        self.shapes = (x.shape, y.shape)
        return x + y

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, x, y):
        self.shapes = (x.shape, y.shape)
        return x - y

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return _unbroadcast(grad * self.y, self.x.shape), _unbroadcast(grad * self.x, self.y.shape)


class Div(Function):
    def forward(self, x, y):
        self.x, self.y = x, y
        return x / y

    def backward(self, grad):
        gx = _unbroadcast(grad / self.y, self.x.shape)
        gy = _unbroadcast(-grad * self.x / (self.y * self.y), self.y.shape)
        return gx, gy


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class MatMul(Function):
    def forward(self, x, y):
        if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[0]:
            raise ShapeError(f"matmul shape mismatch {x.shape} @ {y.shape}")
        self.x, self.y = x, y
        return x @ y

    def backward(self, grad):
        return grad @ self.y.T, self.x.T @ grad


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Sqrt(Function):
    def forward(self, x):
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad):
        return (grad * 0.5 / self.out,)


class Square(Function):
    def forward(self, x):
        self.x = x
        return x * x

    def backward(self, grad):
        return (2.0 * grad * self.x,)


class Abs(Function):
    def forward(self, x):
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return (grad * self.sign,)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Sigmoid(Function):
    def forward(self, x):
        self.out = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class LeakyReLU(Function):
    slope = 0.2

    def forward(self, x):
        self.factor = np.where(x > 0, 1.0, self.slope)
        return x * self.factor

    def backward(self, grad):
        return (grad * self.factor,)


class ClampMin(Function):
    floor = 0.0

    def forward(self, x):
        self.mask = x > self.floor
        return np.where(self.mask, x, self.floor)

    def backward(self, grad):
        return (grad * self.mask,)


class Sum(Function):
    axis = None
    keepdims = False

    def forward(self, x):
        self.shape = x.shape
        return np.sum(x, axis=self.axis, keepdims=self.keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape),)


class Reshape(Function):
    shape = ()

    def forward(self, x):
        self.in_shape = x.shape
        return x.reshape(self.shape)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class Transpose(Function):
    def forward(self, x):
        return x.T

    def backward(self, grad):
        return (grad.T,)


class GetItem(Function):
    key = None

    def forward(self, x):
        return x[self.key]

    def backward(self, grad):
        return (_SliceGrad(self.key, grad),)


class Concat(Function):
    axis = 0

    def forward(self, *xs):
        self.sizes = [x.shape[self.axis] for x in xs]
        return np.concatenate(xs, axis=self.axis)

    def backward(self, grad):
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, bounds, axis=self.axis))


class Take(Function):
    """Gather from the flattened input with an integer index array"""
    indices = None

    def forward(self, x):
        self.in_shape = x.shape
        return x.reshape(-1)[self.indices]

    def backward(self, grad):
        flat = np.zeros(int(np.prod(self.in_shape)))
        np.add.at(flat, self.indices, grad)
        return (flat.reshape(self.in_shape),)


class Conv1dFunction(Function):
    """Dilated cross-correlation of a [frames, in_ch] input, frame count preserved"""
    dilation = 1
    causal = False

    def forward(self, x, weight, bias):
        if x.ndim != 2 or weight.ndim != 3:
            raise ShapeError("conv1d expects input [frames, in_ch] and kernel [width, in_ch, out_ch]")
        width, in_ch, out_ch = weight.shape
        if width < 1:
            raise ShapeError("kernel width must be >= 1")
        if x.shape[1] != in_ch:
            raise ShapeError(f"conv1d channel mismatch: input has {x.shape[1]}, kernel expects {in_ch}")
        if bias.shape != (out_ch,):
            raise ShapeError(f"conv1d bias must have shape ({out_ch},)")
        frames = x.shape[0]
        total = (width - 1) * self.dilation
        self.left = total if self.causal else total // 2
        padded = np.pad(x, ((self.left, total - self.left), (0, 0)))
        self.cols = np.concatenate(
            [padded[k * self.dilation:k * self.dilation + frames] for k in range(width)], axis=1
        )
        self.weight_matrix = weight.reshape(width * in_ch, out_ch)
        self.shapes = (x.shape, weight.shape, padded.shape)
        return self.cols @ self.weight_matrix + bias

    def backward(self, grad):
        x_shape, w_shape, padded_shape = self.shapes
        width, in_ch, _ = w_shape
        frames = x_shape[0]
        grad_weight = (self.cols.T @ grad).reshape(w_shape)
        grad_bias = grad.sum(axis=0)
        grad_cols = grad @ self.weight_matrix.T
        grad_padded = np.zeros(padded_shape)
        for k in range(width):
            start = k * self.dilation
            grad_padded[start:start + frames] += grad_cols[:, k * in_ch:(k + 1) * in_ch]
        return grad_padded[self.left:self.left + frames], grad_weight, grad_bias


class PowerSpectrum(Function):
    """|rfft(frames)|^2 along the last axis"""

    def forward(self, frames):
        self.n = frames.shape[-1]
        self.spectrum = np.fft.rfft(frames, axis=-1)
        return self.spectrum.real ** 2 + self.spectrum.imag ** 2

    def backward(self, grad):
        half = np.zeros(self.spectrum.shape[:-1] + (self.n,), dtype=np.complex128)
        half[..., :self.spectrum.shape[-1]] = 2.0 * grad * self.spectrum
        return (self.n * np.fft.ifft(half, axis=-1).real,)


class FrobeniusNorm(Function):
    """sqrt(sum(x ** 2)) with a zero subgradient at the origin"""

    def forward(self, x):
        self.x = x
        self.norm = np.sqrt(np.sum(x * x))
        return self.norm

    def backward(self, grad):
        if self.norm == 0.0:
            return (np.zeros_like(self.x),)
        return (grad * self.x / self.norm,)


class CrossEntropy(Function):
    """Per-row softmax cross-entropy against integer targets"""
    targets = None

    def forward(self, logits):
        if logits.ndim != 2 or len(self.targets) != logits.shape[0]:
            raise ShapeError("cross-entropy expects [rows, classes] logits and one target per row")
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_norm
        self.probs = np.exp(log_probs)
        rows = np.arange(logits.shape[0])
        return -log_probs[rows, self.targets]

    def backward(self, grad):
        delta = self.probs.copy()
        delta[np.arange(delta.shape[0]), self.targets] -= 1.0
        return (grad[:, None] * delta,)


def exp(x): return Exp.apply(x)
def log(x): return Log.apply(x)
def sqrt(x): return Sqrt.apply(x)
def square(x): return Square.apply(x)
def absolute(x): return Abs.apply(x)
def tanh(x): return Tanh.apply(x)
def sigmoid(x): return Sigmoid.apply(x)
def leaky_relu(x, slope: float = 0.2): return LeakyReLU.apply(x, slope=slope)
def relu(x): return LeakyReLU.apply(x, slope=0.0)
def clamp_min(x, floor: float): return ClampMin.apply(x, floor=floor)
def take(x, indices: np.ndarray): return Take.apply(x, indices=np.asarray(indices, dtype=np.int64))
def power_spectrum(frames): return PowerSpectrum.apply(frames)
def norm(x): return FrobeniusNorm.apply(x)


def concat(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return Sum.apply(x, axis=axis, keepdims=keepdims) / float(count)


def cross_entropy(logits, targets: Sequence[int]) -> Tensor:
    return CrossEntropy.apply(logits, targets=np.asarray(targets, dtype=np.int64))
