"""Learned pressure simulator: (future adjacency, global node features, F) -> seconds.

Pretrained on truth future graphs, then frozen inside the forecaster. It stays
differentiable in the adjacency so the forecasting loss reaches the graph
learner through it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .nn import Params, restore, snapshot, trainable, weight, zeros
from .optim import Adam

log = logging.getLogger(__name__)


def init_sim(rng: np.random.Generator, f_aoi: int, n_f: int, hidden: int = 32,
             mlp_hidden: int = 64, label_mean: float = 1000.0) -> Params:
    return {
        "w1": weight(rng, f_aoi, hidden, "w1"), "s1": weight(rng, f_aoi, hidden, "s1"),
        "r1": weight(rng, 1, hidden, "r1"), "b1": zeros(hidden, "b1"),
        "w2": weight(rng, hidden, hidden, "w2"), "s2": weight(rng, hidden, hidden, "s2"),
        "b2": zeros(hidden, "b2"),
        "m1": weight(rng, hidden + n_f, mlp_hidden, "m1"), "mb1": zeros(mlp_hidden, "mb1"),
        # zero output layer: pretraining starts from the training mean
        "m2": zeros((mlp_hidden, 1), "m2"),
        "mb2": zeros(1, "mb2"),
        # softplus(0) * out_scale == label_mean
        "out_scale": Tensor(np.array([label_mean / math.log(2.0)]), name="out_scale"),
    }


def simulate_pressure(params: Params, node_features: Tensor, a: Tensor, f: Tensor) -> Tensor:
    """node_features (M, F_AOI), a (..., M, M), f (..., N_f) -> pressure (...,)."""
    m = node_features.shape[-2]
    if a.shape[-1] != m or a.shape[-2] != m:
        raise ShapeError(f"adjacency {a.shape} does not match {m} nodes")
    if f.shape[:-1] != a.shape[:-2]:
        raise ShapeError(f"feature batch {f.shape} vs adjacency batch {a.shape}")
    if a.ndim == 2:
        single = simulate_pressure(params, node_features, ad.reshape(a, (1, m, m)), ad.reshape(f, (1,) + f.shape))
        return ad.reshape(single, ())
    x = node_features
    rowsum = ad.sum_(a, axis=-1, keepdims=True)
    h1 = ad.relu(a @ (x @ params["w1"]) + x @ params["s1"] + rowsum @ params["r1"] + params["b1"])
    h2 = ad.relu(a @ (h1 @ params["w2"]) + h1 @ params["s2"] + params["b2"])
    pooled = ad.mean(h2, axis=-2)
    z = ad.relu(ad.concat([pooled, f], axis=-1) @ params["m1"] + params["mb1"]) @ params["m2"] + params["mb2"]
    p = ad.softplus(z) * params["out_scale"]
    return ad.reshape(p, p.shape[:-1])


def freeze(params: Params) -> None:
    for p in params.values():
        p.requires_grad = False


def unfreeze(params: Params) -> None:
    for k, p in params.items():
        p.requires_grad = k != "out_scale"


@dataclass
class PretrainResult:
    params: Params
    train_mae: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    best_val_mae: list[float] = field(default_factory=list)
    best_epoch: int = 0


def pretrain(train, val, node_features: np.ndarray, *, epochs: int = 80, batch_size: int = 32,
             lr: float = 1e-3, patience: int = 12, seed: int = 0, hidden: int = 32,
             mlp_hidden: int = 64) -> PretrainResult:
    """Fit the simulator by MAE regression on (normalised truth adjacency, F) -> label.

    ``train``/``val`` are prepared arrays (see ``training.Prepared``). Keeps the
    best-validation parameters; stops after ``patience`` epochs without gain.
    Returned parameters are frozen.
    """
    if len(train) == 0:
        raise ValueError("cannot pretrain the simulator on an empty dataset")
    rng = np.random.default_rng([seed, 202])
    params = init_sim(rng, node_features.shape[1], train.f.shape[1], hidden, mlp_hidden,
                      float(np.mean(train.label)))
    opt = Adam(trainable(params), lr=lr)
    x = Tensor(node_features)
    res = PretrainResult(params)
    best = math.inf
    best_state = snapshot(params)
    stale = 0
    for epoch in range(epochs):
        order = rng.permutation(len(train))
        losses = []
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            opt.zero_grad()
            pred = simulate_pressure(params, x, Tensor(train.a_truth_norm[idx]), Tensor(train.f[idx]))
            loss = ad.mae(pred, Tensor(train.label[idx]))
            ad.backward(loss)
            opt.step()
            losses.append(loss.item() * len(idx))
        res.train_mae.append(float(np.sum(losses) / len(train)))
        v = float(np.mean(np.abs(predict(params, node_features, val.a_truth_norm, val.f) - val.label))) \
            if len(val) else res.train_mae[-1]
        res.val_mae.append(v)
        if v < best:
            best, best_state, stale, res.best_epoch = v, snapshot(params), 0, epoch
        else:
            stale += 1
        res.best_val_mae.append(best)
        log.info("sim epoch %d train_mae=%.2f val_mae=%.2f", epoch, res.train_mae[-1], v)
        if stale >= patience:
            break
    restore(params, best_state)
    freeze(params)
    return res


def predict(params: Params, node_features: np.ndarray, a: np.ndarray, f: np.ndarray,
            batch_size: int = 256) -> np.ndarray:
    x = Tensor(node_features)
    out = [simulate_pressure(params, x, Tensor(a[i:i + batch_size]), Tensor(f[i:i + batch_size])).data
           for i in range(0, len(f), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)
