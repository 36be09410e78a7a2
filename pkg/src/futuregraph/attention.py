"""Multi-head cross attention and the cross-attention transformer (CAT) block."""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .nn import Params, ones, weight, zeros

DIRECTIONS = ("global_query", "ongoing_query")


def init_cat_block(rng: np.random.Generator, width: int, heads: int, mlp_ratio: int = 4) -> Params:
    if width % heads:
        raise ShapeError(f"width {width} not divisible by {heads} heads")
    hidden = mlp_ratio * width
    return {
        "wq": weight(rng, width, width, "wq"),
        "wk": weight(rng, width, width, "wk"),
        "wv": weight(rng, width, width, "wv"),
        "wo": weight(rng, width, width, "wo"), "bo": zeros(width, "bo"),
        "ln1_g": ones(width, "ln1_g"), "ln1_b": zeros(width, "ln1_b"),
        "ln2_g": ones(width, "ln2_g"), "ln2_b": zeros(width, "ln2_b"),
        "mlp_w1": weight(rng, width, hidden, "mlp_w1"), "mlp_b1": zeros(hidden, "mlp_b1"),
        "mlp_w2": weight(rng, hidden, width, "mlp_w2"), "mlp_b2": zeros(width, "mlp_b2"),
    }


def zero_block(params: Params) -> None:
    """Zero the attention output projection and the MLP, leaving LayerNorms intact."""
    for k in ("wo", "bo", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
        params[k].data = np.zeros_like(params[k].data)


def cross_attention(params: Params, q_in: Tensor, kv_in: Tensor, kv_mask: np.ndarray | None = None,
                    heads: int = 8, return_weights: bool = False):
    """Queries from ``q_in`` (..., a, C) attend over ``kv_in`` (..., b, C).

    Per head: softmax(Q K^T / sqrt(d)) V with masked keys excluded; heads are
    concatenated and projected. With ``return_weights`` the (..., H, a, b)
    attention weights are returned as well.
    """
    width = params["wq"].shape[0]
    if q_in.shape[-1] != width or kv_in.shape[-1] != width:
        raise ShapeError(f"attention width {width} vs inputs {q_in.shape} / {kv_in.shape}")
    b = kv_in.shape[-2]
    mask4 = None
    if kv_mask is not None:
        kv_mask = np.asarray(kv_mask, dtype=bool)
        if kv_mask.shape[-1] != b:
            raise ShapeError(f"mask length {kv_mask.shape[-1]} does not match {b} keys")
        mask4 = kv_mask.reshape(kv_mask.shape[:-1] + (1, 1, b))
    d = width // heads
    q = ad.split_heads(q_in @ params["wq"], heads)
    k = ad.split_heads(kv_in @ params["wk"], heads)
    v = ad.split_heads(kv_in @ params["wv"], heads)
    w = ad.row_softmax(ad.scale(q @ ad.transpose(k), 1.0 / math.sqrt(d)), mask4)
    out = ad.merge_heads(w @ v) @ params["wo"] + params["bo"]
    return (out, w) if return_weights else out


def _mlp(params: Params, x: Tensor) -> Tensor:
    return ad.relu(x @ params["mlp_w1"] + params["mlp_b1"]) @ params["mlp_w2"] + params["mlp_b2"]


def cat_block(params: Params, e1: Tensor, e2: Tensor, mask: np.ndarray | None = None,
              heads: int = 8, return_weights: bool = False):
    """half = e1 + Attn(LN(e1), LN(e2)); out = half + MLP(LN(half)). Output has e1's rows."""
    g1, b1 = params["ln1_g"], params["ln1_b"]
    att = cross_attention(params, ad.layer_norm(e1, g1, b1), ad.layer_norm(e2, g1, b1), mask, heads,
                          return_weights)
    att, w = att if return_weights else (att, None)
    half = e1 + att
    out = half + _mlp(params, ad.layer_norm(half, params["ln2_g"], params["ln2_b"]))
    return (out, w) if return_weights else out


def inter_graph_cat(params: Params, e_global: Tensor, e_ongoing: Tensor, ongoing_mask: np.ndarray | None,
                    direction: str = "global_query", heads: int = 8, return_weights: bool = False):
    """Fuse ongoing and global node embeddings.

    ``global_query`` keeps one row per global node (M x C), which the future
    adjacency needs; ``ongoing_query`` keeps one row per ongoing node (m x C).
    """
    if direction == "global_query":
        return cat_block(params, e_global, e_ongoing, ongoing_mask, heads, return_weights)
    if direction == "ongoing_query":
        return cat_block(params, e_ongoing, e_global, None, heads, return_weights)
    raise ValueError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")


def influence_cat(params: Params, e_graph: Tensor, f_tokens: Tensor, heads: int = 8,
                  return_weights: bool = False):
    """Every graph node attends over the supply/environment feature tokens."""
    return cat_block(params, e_graph, f_tokens, None, heads, return_weights)
