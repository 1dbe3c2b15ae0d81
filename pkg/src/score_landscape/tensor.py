"""Dense symmetric-tensor helpers for orders 1 through 4.

Tensors are plain ``numpy`` arrays of shape ``(d,) * m``; entries are laid out
in row-major multi-index order, so ``t.ravel()`` is the flat entry list.
"""

from __future__ import annotations

import itertools
from functools import reduce
from typing import Sequence

import numpy as np

__all__ = [
    "as_tensor",
    "outer",
    "sym",
    "contract",
    "frobenius_norm",
    "spectral_norm_matrix",
    "is_symmetric",
]


def as_tensor(entries, order: int, dim: int) -> np.ndarray:
    """Build an order-``order`` tensor from a flat, row-major entry list."""
    entries = np.asarray(entries, dtype=float)
    if entries.size != dim**order:
        raise ValueError(f"expected {dim**order} entries for order {order}, dim {dim}; got {entries.size}")
    return entries.reshape((dim,) * order)


def outer(vectors: Sequence) -> np.ndarray:
    """Outer product ``v1 ⊗ v2 ⊗ ... ⊗ vm`` of equal-length vectors."""
    if len(vectors) == 0:
        raise ValueError("outer() needs at least one vector")
    vs = [np.asarray(v, dtype=float) for v in vectors]
    d = vs[0].shape
    for v in vs:
        if v.ndim != 1 or v.shape != d:
            raise ValueError("all vectors must be 1-d with the same length")
    return reduce(np.multiply.outer, vs)


def sym(t) -> np.ndarray:
    """Average of ``t`` over all permutations of its indices.

    Explicit enumeration; at most 24 permutations for the orders used here.
    """
    t = np.asarray(t, dtype=float)
    m = t.ndim
    if m <= 1:
        return t.copy()
    perms = list(itertools.permutations(range(m)))
    out = np.zeros_like(t)
    for p in perms:
        out += np.transpose(t, p)
    return out / len(perms)


def is_symmetric(t, atol: float = 1e-12) -> bool:
    t = np.asarray(t)
    return all(np.allclose(np.transpose(t, p), t, atol=atol, rtol=0)
               for p in itertools.permutations(range(t.ndim)))


def contract(t, vectors: Sequence) -> float:
    """Multilinear form ``t(v1, ..., vm) = sum t[i1..im] v1[i1] ... vm[im]``."""
    t = np.asarray(t, dtype=float)
    if len(vectors) != t.ndim:
        raise ValueError(f"order-{t.ndim} tensor needs {t.ndim} vectors, got {len(vectors)}")
    out = t
    for v in vectors:
        v = np.asarray(v, dtype=float)
        if v.shape != (out.shape[0],):
            raise ValueError("vector length does not match tensor dimension")
        out = np.tensordot(v, out, axes=(0, 0))
    return float(out)


def frobenius_norm(t) -> float:
    return float(np.sqrt(np.sum(np.square(t))))


def spectral_norm_matrix(t) -> float:
    """Largest singular value of a matrix.

    Computed as the square root of the top eigenvalue of ``t.T @ t`` (symmetric
    eigensolver). Higher orders are rejected: use :func:`frobenius_norm`.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2:
        raise ValueError("spectral norm is only provided for order-2 tensors")
    gram = t.T @ t
    top = np.linalg.eigvalsh(0.5 * (gram + gram.T))[-1]
    return float(np.sqrt(max(top, 0.0)))
