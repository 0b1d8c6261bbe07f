"""
Parameter storage and the Adam optimizer
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ...error_handling import ShapeError
from .tensor import Tape, Tensor


@dataclass
class ParameterEntry:
    """One trainable array with its gradient slot and Adam moments"""
    value: np.ndarray
    grad: np.ndarray
    first_moment: np.ndarray
    second_moment: np.ndarray


class ParameterStore:
    """Named, shaped float64 arrays with gradient slots"""

    def __init__(self):
        self._entries: Dict[str, ParameterEntry] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self._entries:
            raise ShapeError(f"parameter '{name}' already exists")
        value = np.array(value, dtype=np.float64)
        self._entries[name] = ParameterEntry(
            value=value,
            grad=np.zeros_like(value),
            first_moment=np.zeros_like(value),
            second_moment=np.zeros_like(value),
        )
        return value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def names(self) -> List[str]:
        return list(self._entries)

    def entry(self, name: str) -> ParameterEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise ShapeError(f"unknown parameter '{name}'") from None

    def value(self, name: str) -> np.ndarray:
        return self.entry(name).value

    def grad(self, name: str) -> np.ndarray:
        return self.entry(name).grad

    def set_value(self, name: str, value: np.ndarray) -> None:
        entry = self.entry(name)
        value = np.asarray(value, dtype=np.float64)
        if value.shape != entry.value.shape:
            raise ShapeError(f"shape mismatch for '{name}': {value.shape} vs {entry.value.shape}")
        entry.value[...] = value

    def accumulate_grad(self, name: str, grad: np.ndarray) -> None:
        entry = self.entry(name)
        if grad.shape != entry.grad.shape:
            raise ShapeError(f"gradient shape mismatch for '{name}'")
        entry.grad += grad

    def bind(self, tape: Optional[Tape] = None) -> Dict[str, Tensor]:
        """Tensors for every parameter; leaves on ``tape`` when given, constants otherwise"""
        bound = {}
        for name, entry in self._entries.items():
            tensor = Tensor(entry.value, name=name)
            if tape is not None:
                tape.watch(tensor, self, name)
            bound[name] = tensor
        return bound

    def zero_grad(self) -> None:
        for entry in self._entries.values():
            entry.grad[...] = 0.0

    def zero_(self) -> None:
        """Set every parameter value to zero"""
        for entry in self._entries.values():
            entry.value[...] = 0.0

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(e.grad * e.grad)) for e in self._entries.values())))

    def parameter_count(self) -> int:
        return int(sum(e.value.size for e in self._entries.values()))

    def state_dict(self, prefix: str = "") -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        """(parameters, optimizer buffers) as name -> array copies"""
        params = {}
        buffers = {}
        for name, entry in self._entries.items():
            params[prefix + name] = entry.value.copy()
            buffers[f"{prefix}{name}/adam_m"] = entry.first_moment.copy()
            buffers[f"{prefix}{name}/adam_v"] = entry.second_moment.copy()
        return params, buffers

    def load_state_dict(self, params: Dict[str, np.ndarray], buffers: Optional[Dict[str, np.ndarray]] = None,
                        prefix: str = "") -> None:
        for name, entry in self._entries.items():
            key = prefix + name
            if key not in params:
                raise ShapeError(f"missing parameter '{key}'")
            self.set_value(name, params[key])
            if buffers is not None:
                entry.first_moment[...] = buffers[f"{key}/adam_m"]
                entry.second_moment[...] = buffers[f"{key}/adam_v"]
            entry.grad[...] = 0.0


def clip_grad_norm(store: ParameterStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``"""
    norm = store.grad_norm()
    if norm > max_norm > 0:
        scale = max_norm / (norm + 1e-12)
        for name in store:
            store.entry(name).grad *= scale
    return norm


def adam_step(store: ParameterStore, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, step_index: int = 1) -> ParameterStore:
    """Bias-corrected Adam update; gradients are zeroed afterwards.

    Entries whose gradient is identically zero keep their value and moments.
    """
    if step_index < 1:
        raise ShapeError("Adam step index starts at 1")
    correction1 = 1.0 - beta1 ** step_index
    correction2 = 1.0 - beta2 ** step_index
    for name in store:
        entry = store.entry(name)
        grad = entry.grad
        if not np.any(grad):
            continue
        entry.first_moment *= beta1
        entry.first_moment += (1.0 - beta1) * grad
        entry.second_moment *= beta2
        entry.second_moment += (1.0 - beta2) * grad * grad
        m_hat = entry.first_moment / correction1
        v_hat = entry.second_moment / correction2
        entry.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        grad[...] = 0.0
    return store


class Adam:
    """Adam over one ParameterStore with global-norm clipping and a step counter"""

    def __init__(self, store: ParameterStore, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, grad_clip: Optional[float] = 10.0):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.grad_clip = grad_clip
        self.step_count = 0

    def step(self) -> float:
        """Clip, update and zero gradients; returns the pre-clipping gradient norm"""
        norm = clip_grad_norm(self.store, self.grad_clip) if self.grad_clip else self.store.grad_norm()
        self.step_count += 1
        adam_step(self.store, self.lr, self.beta1, self.beta2, self.eps, self.step_count)
        return norm

    def zero_grad(self) -> None:
        self.store.zero_grad()
