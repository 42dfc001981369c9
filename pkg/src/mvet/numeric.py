"""Dense float64 arithmetic, activations, seeded RNG and a finite-difference checker.

Vectors and matrices are plain ``numpy`` float64 arrays; ``as_vec``/``as_mat``
validate shape and finiteness at the boundaries where data enters the model.

Random streams use numpy's PCG64 bit generator (``make_rng``).  Derived seeds
for sub-runs come from ``derive_seed``: the first 8 bytes (little endian) of
BLAKE2b over ``"<master>/<label>/<label>..."``.  Both are stable across
processes and platforms.
"""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import AllMasked, DimensionMismatch, NonFiniteFunctionValue

Vec = np.ndarray
Mat = np.ndarray
Rng = np.random.Generator

DEFAULT_SLOPE = 0.01


def as_vec(data) -> Vec:
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatch(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains NaN or Inf")
    return v


def as_mat(data) -> Mat:
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf")
    return m


def matvec(m: Mat, v: Vec) -> Vec:
    if m.shape[1] != v.shape[-1]:
        raise DimensionMismatch(f"matrix has {m.shape[1]} columns, vector has length {v.shape[-1]}")
    return m @ v


def tanh_v(v):
    return np.tanh(v)


def sigmoid_v(v):
    # exp of a non-positive argument only, so large |v| cannot overflow
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def leaky_v(v, slope: float = DEFAULT_SLOPE):
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky slope must lie in (0, 1), got {slope}")
    return np.where(v >= 0, v, slope * v)


def tanh_grad(v):
    t = np.tanh(v)
    return 1.0 - t * t


def sigmoid_grad(v):
    s = sigmoid_v(v)
    return s * (1.0 - s)


def leaky_grad(v, slope: float = DEFAULT_SLOPE):
    return np.where(v >= 0, 1.0, slope)


# name -> (activation, derivative with respect to the pre-activation)
ACTIVATIONS = {
    "tanh": (tanh_v, tanh_grad),
    "sigmoid": (sigmoid_v, sigmoid_grad),
    "leaky": (leaky_v, leaky_grad),
}


def log_sigmoid(v):
    """ln σ(v), stable for large |v|."""
    v = np.asarray(v, dtype=np.float64)
    return np.minimum(v, 0.0) - np.log1p(np.exp(-np.abs(v)))


def softmax(logits, mask=None):
    """Softmax over the last axis restricted to ``mask``.

    Masked-out positions get exactly zero weight.  Works on a single vector
    or on a batch of rows.
    """
    z = np.asarray(logits, dtype=np.float64)
    if mask is None:
        mask = np.ones(z.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != z.shape:
        raise DimensionMismatch(f"mask shape {mask.shape} != logits shape {z.shape}")
    if not np.all(mask.any(axis=-1)):
        raise AllMasked("softmax needs at least one masked-in position per row")
    z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def grad_check(f, point, analytic_grad, h: float = 1e-5) -> float:
    """Max relative error between ``analytic_grad`` and a central difference of ``f``.

    error_i = |fd_i - an_i| / max(1e-8, |fd_i| + |an_i|)
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(point, dtype=np.float64).ravel()
    an = np.asarray(analytic_grad, dtype=np.float64).ravel()
    if an.shape != x.shape:
        raise DimensionMismatch(f"gradient has {an.size} entries, point has {x.size}")
    fd = np.empty_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + h
        up = f(x.copy())
        x[i] = orig - h
        down = f(x.copy())
        x[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NonFiniteFunctionValue(f"f is not finite near coordinate {i}")
        fd[i] = (up - down) / (2.0 * h)
    err = np.abs(fd - an) / np.maximum(1e-8, np.abs(fd) + np.abs(an))
    return float(err.max()) if err.size else 0.0


def make_rng(seed: int) -> Rng:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(master: int, *labels) -> int:
    key = "/".join([str(int(master))] + [str(x) for x in labels]).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def glorot(rng: Rng, rows: int, cols: int) -> Mat:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))
