"""Adaptive future-graph learning and its supervision loss."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .nn import Params, weight


def init_agl(rng: np.random.Generator, width: int, out_width: int | None = None) -> Params:
    return {"proj": weight(rng, width, out_width or width, "proj")}


def adaptive_adjacency(params: Params, e_out: Tensor) -> Tensor:
    """A_future = row_softmax(relu(P P^T)) with P = e_out @ proj. Rows sum to 1."""
    p = e_out @ params["proj"]
    return ad.row_softmax(ad.relu(p @ ad.transpose(p)))


def truth_adjacency_normalized(a_truth_raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows with positive mass rescaled to sum 1; ``row_mask`` flags them.

    Works on (..., M, M). Zero rows stay zero and are masked out.
    """
    a = np.asarray(a_truth_raw, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("truth adjacency has negative entries")
    s = a.sum(axis=-1, keepdims=True)
    mask = s[..., 0] > 0
    norm = np.divide(a, s, out=np.zeros_like(a), where=s > 0)
    return norm, mask


def graph_loss(a_future: Tensor, a_truth_norm: np.ndarray, row_mask: np.ndarray) -> Tensor:
    """Mean squared error over the entries of unmasked rows.

    Batched inputs (B, M, M) give the mean of the per-sample losses; a sample
    with every row masked contributes 0.
    """
    t = np.asarray(a_truth_norm, dtype=np.float64)
    if a_future.shape != t.shape:
        raise ShapeError(f"graph_loss: shapes {a_future.shape} and {t.shape} differ")
    mask = np.asarray(row_mask, dtype=np.float64)
    if mask.shape != t.shape[:-1]:
        raise ShapeError(f"graph_loss: row mask {mask.shape} vs matrix {t.shape}")
    m = t.shape[-1]
    rows = mask.sum(axis=-1, keepdims=True)
    w = np.divide(mask, rows * m, out=np.zeros_like(mask), where=rows > 0)
    n_samples = int(np.prod(t.shape[:-2])) if t.ndim > 2 else 1
    sq = ad.square(a_future - Tensor(t))
    return ad.scale(ad.sum_(sq * Tensor(w[..., None])), 1.0 / n_samples)


def graph_loss_numpy(a_future: np.ndarray, a_truth_norm: np.ndarray, row_mask: np.ndarray) -> float:
    return graph_loss(Tensor(a_future), a_truth_norm, row_mask).item()
