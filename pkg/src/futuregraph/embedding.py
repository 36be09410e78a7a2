"""Two-layer GNN graph embedding and per-feature token embedding of F."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .graphs import FlowGraph
from .nn import Params, weight, zeros

EDGE_WEIGHT_FLOOR = 0.05


def minmax_positive(values: np.ndarray, lo: float, hi: float, floor: float = EDGE_WEIGHT_FLOOR) -> np.ndarray:
    """Map [lo, hi] onto [floor, 1]; degenerate ranges map to 1. Never below ``floor``."""
    values = np.asarray(values, dtype=np.float64)
    if not hi > lo:
        return np.ones_like(values)
    return np.maximum(floor, floor + (1.0 - floor) * (values - lo) / (hi - lo))


def normalized_adjacency(graph: FlowGraph, size: int | None = None) -> np.ndarray:
    """Row-normalised (A_w + I) in the graph's node order.

    A_w holds min-max scaled order_count * avg_delivery_time. ``size`` pads
    with isolated self-loop nodes.
    """
    n = len(graph.nodes)
    size = n if size is None else size
    a = np.zeros((size, size))
    if graph.edges:
        idx = graph.index()
        w = np.array([e.order_count * e.avg_delivery_time for e in graph.edges])
        w = minmax_positive(w, w.min(), w.max())
        for e, x in zip(graph.edges, w):
            i, j = idx.get(e.src), idx.get(e.dst)
            if i is not None and j is not None and i < size and j < size:
                a[i, j] += x
    a += np.eye(size)
    return a / a.sum(axis=1, keepdims=True)


def init_graph_embedder(rng: np.random.Generator, f_aoi: int, c_h: int, c: int) -> Params:
    return {
        "w1": weight(rng, f_aoi, c_h, "w1"), "b1": zeros(c_h, "b1"),
        "w2": weight(rng, c_h, c_h, "w2"), "b2": zeros(c_h, "b2"),
        "wp": weight(rng, c_h, c, "wp"), "bp": zeros(c, "bp"),
    }


def embed_graph(params: Params, x: Tensor, a_hat: Tensor) -> Tensor:
    """x: (..., n, F_AOI), a_hat: (..., n, n) -> (..., n, C)."""
    if x.shape[-1] != params["w1"].shape[0]:
        raise ShapeError(f"node features have width {x.shape[-1]}, embedder expects {params['w1'].shape[0]}")
    if a_hat.shape[-1] != x.shape[-2]:
        raise ShapeError(f"adjacency {a_hat.shape} does not match {x.shape[-2]} nodes")
    h1 = ad.relu(a_hat @ (x @ params["w1"]) + params["b1"])
    h2 = ad.relu(a_hat @ (h1 @ params["w2"]) + params["b2"])
    return h2 @ params["wp"] + params["bp"]


def init_feature_embedder(rng: np.random.Generator, n_f: int, c_f: int) -> Params:
    return {
        "value": Tensor(rng.normal(0.0, 1.0, (n_f, c_f)), requires_grad=True, name="value"),
        "identity": Tensor(rng.normal(0.0, 1.0, (n_f, c_f)), requires_grad=True, name="identity"),
    }


def embed_features(params: Params, f: Tensor) -> Tensor:
    """One token per supply/environment feature: f_i * value_i + identity_i.

    f: (..., N_f) -> (..., N_f, C_f).
    """
    n_f = params["value"].shape[0]
    if f.shape[-1] != n_f:
        raise ShapeError(f"feature vector has length {f.shape[-1]}, expected {n_f}")
    col = ad.reshape(f, f.shape + (1,))
    return col * params["value"] + params["identity"]
