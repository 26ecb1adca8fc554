"""Dense numeric primitives shared by every learning module.

Everything here is deterministic: reductions run in a fixed order for a
given input, and weight initialisation is driven by a counter-based
splitmix64 stream so the same (seed, stream) pair always yields the same
tensor, independent of platform.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

# Guards every division by a data-dependent quantity.
EPS = 1e-12

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ShapeError(ValueError):
    """Raised when operand dimensions do not line up."""


def as_matrix(a: np.ndarray) -> np.ndarray:
    """Validate a 2-D float64 array with finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense product a @ b with explicit shape checking."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1.

    Stable for arbitrarily large logits: each row has its maximum
    subtracted before exponentiation.
    """
    m = np.asarray(m, dtype=np.float64)
    shifted = m - m.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    shifted = m - m.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def finite_diff_grad(
    f: Callable[[np.ndarray], float], at: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix.

    This is the independent oracle used to check every hand-derived
    gradient in the package; it must stay free of any analytic shortcut.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    at = np.array(at, dtype=np.float64)
    grad = np.zeros_like(at)
    it = np.nditer(at, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = at[idx]
        at[idx] = orig + h
        f_plus = float(f(at))
        at[idx] = orig - h
        f_minus = float(f(at))
        at[idx] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(f"non-finite objective at perturbed entry {idx}")
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
        it.iternext()
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max symmetric relative error between two gradient tensors."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.abs(a) + np.abs(n) + 1e-10
    return float(np.max(np.abs(a - n) / denom))


def _splitmix(seed: int, stream: int, n: int) -> np.ndarray:
    """n uniforms in [0, 1) from the splitmix64 counter stream.

    Stream k of a seed is the splitmix sequence whose counter starts at
    k * 2^32, so distinct tensors never share raw states.
    """
    start = (stream & 0xFFFFFFFF) << 32
    i = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + i * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)) * 2.0**-53


def init_uniform(rows: int, cols: int, fan_in: int, seed: int, stream: int) -> np.ndarray:
    """Weight tensor uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    Each parameter tensor gets its own stream index so adding or removing
    a tensor never shifts the values of the others.
    """
    if fan_in <= 0:
        raise ValueError("fan_in must be positive")
    scale = 1.0 / np.sqrt(float(fan_in))
    u = _splitmix(seed, stream, rows * cols)
    return ((2.0 * u - 1.0) * scale).reshape(rows, cols)
