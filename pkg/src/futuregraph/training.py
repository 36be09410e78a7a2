"""Normalisation, the forecasting model, its training loop, metrics and ablations."""

from __future__ import annotations

import contextlib
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .agl import adaptive_adjacency, graph_loss, init_agl, truth_adjacency_normalized
from .attention import cat_block, init_cat_block, influence_cat, inter_graph_cat
from .autodiff import Tensor
from .config import ABLATION_ROWS, AblationMask, ModelDims, TrainConfig
from .embedding import (embed_features, embed_graph, init_feature_embedder, init_graph_embedder,
                        minmax_positive, normalized_adjacency)
from .graphs import AoiNode, Dataset, FlowEdge, FlowGraph, Sample, input_bytes
from .nn import Params, prefixed, restore, snapshot, trainable, weight, with_prefix, zeros
from .optim import Adam
from .simulator import simulate_pressure

log = logging.getLogger(__name__)

MAPE_FLOOR_S = 60.0


class NumericalError(RuntimeError):
    pass


# ---------------------------------------------------------------- normalisation

@dataclass
class NormalizationStats:
    node_mean: np.ndarray
    node_std: np.ndarray
    ongoing_node_mean: np.ndarray
    ongoing_node_std: np.ndarray
    f_mean: np.ndarray
    f_std: np.ndarray
    global_edge_min: np.ndarray     # (order_count, avg_delivery_time)
    global_edge_max: np.ndarray
    ongoing_edge_min: np.ndarray
    ongoing_edge_max: np.ndarray

    def as_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v, dtype=np.float64) for k, v in self.__dict__.items()}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "NormalizationStats":
        return cls(**{k: np.asarray(arrays[k], dtype=np.float64) for k in cls.__dataclass_fields__})


def _zscore_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    flat = ~(std > 1e-12)
    # zero-variance features pass through unchanged
    return np.where(flat, 0.0, mean), np.where(flat, 1.0, std)


def _edge_range(edges: Sequence[FlowEdge]) -> tuple[np.ndarray, np.ndarray]:
    if not edges:
        return np.zeros(2), np.ones(2)
    v = np.array([[e.order_count, e.avg_delivery_time] for e in edges])
    return v.min(axis=0), v.max(axis=0)


def fit_normalization(train: Dataset) -> NormalizationStats:
    """Statistics from the training split only."""
    if train.global_graph is None or not train.samples:
        raise ValueError("normalisation needs a training split with samples and a global graph")
    node_mean, node_std = _zscore_stats(train.global_graph.feature_matrix())
    live = [s.ongoing.feature_matrix() for s in train.samples if s.ongoing.nodes]
    on_mean, on_std = _zscore_stats(np.concatenate(live)) if live else (node_mean, node_std)
    f_mean, f_std = _zscore_stats(np.stack([s.f for s in train.samples]))
    g_lo, g_hi = _edge_range(train.global_graph.edges)
    o_lo, o_hi = _edge_range([e for s in train.samples for e in s.ongoing.edges])
    return NormalizationStats(node_mean, node_std, on_mean, on_std, f_mean, f_std, g_lo, g_hi, o_lo, o_hi)


def normalize_graph(stats: NormalizationStats, g: FlowGraph) -> FlowGraph:
    if g.kind == "global":
        lo, hi, mu, sd = stats.global_edge_min, stats.global_edge_max, stats.node_mean, stats.node_std
    else:
        lo, hi = stats.ongoing_edge_min, stats.ongoing_edge_max
        mu, sd = stats.ongoing_node_mean, stats.ongoing_node_std
    nodes = [AoiNode(n.id, (np.asarray(n.features) - mu) / sd) for n in g.nodes]
    edges = [FlowEdge(e.src, e.dst, float(minmax_positive(e.order_count, lo[0], hi[0])),
                      float(minmax_positive(e.avg_delivery_time, lo[1], hi[1]))) for e in g.edges]
    return FlowGraph(g.kind, nodes, edges)


def apply_normalization(stats: NormalizationStats, sample: Sample) -> Sample:
    """z-scored node and F features, (0, 1]-scaled edge attributes; label untouched."""
    return replace(sample, ongoing=normalize_graph(stats, sample.ongoing),
                   f=(np.asarray(sample.f) - stats.f_mean) / stats.f_std)


# ---------------------------------------------------------------- prepared arrays

@dataclass
class GlobalInputs:
    x: np.ndarray           # (M, F_AOI) normalised node features
    a_hat: np.ndarray       # (M, M) propagation matrix
    prior: np.ndarray       # (M, M) row-normalised historical flow, fallback future graph
    graph: FlowGraph        # raw global graph


def prepare_global(stats: NormalizationStats, g: FlowGraph) -> GlobalInputs:
    ng = normalize_graph(stats, g)
    idx = g.index()
    raw = np.zeros((len(g.nodes), len(g.nodes)))
    for e in g.edges:
        raw[idx[e.src], idx[e.dst]] = e.order_count * e.avg_delivery_time
    prior, _ = truth_adjacency_normalized(raw)
    return GlobalInputs(ng.feature_matrix(), normalized_adjacency(ng), prior, g)


@dataclass
class Prepared:
    x_on: np.ndarray
    a_on: np.ndarray
    mask_on: np.ndarray
    on_idx: np.ndarray      # global row of each padded ongoing slot, -1 for padding
    f: np.ndarray
    label: np.ndarray
    a_truth_norm: np.ndarray
    row_mask: np.ndarray
    minutes: np.ndarray
    samples: list[Sample]

    def __len__(self) -> int:
        return len(self.label)

    def take(self, idx) -> "Prepared":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.int64)
        return Prepared(self.x_on[idx], self.a_on[idx], self.mask_on[idx], self.on_idx[idx], self.f[idx],
                        self.label[idx], self.a_truth_norm[idx], self.row_mask[idx], self.minutes[idx],
                        [self.samples[i] for i in idx])


def _truncate(g: FlowGraph, m: int) -> FlowGraph:
    if len(g.nodes) <= m:
        return g
    vol: dict[int, float] = {}
    for e in g.edges:
        vol[e.src] = vol.get(e.src, 0.0) + e.order_count
        vol[e.dst] = vol.get(e.dst, 0.0) + e.order_count
    keep = set(sorted(g.node_ids, key=lambda i: (-vol.get(i, 0.0), i))[:m])
    return FlowGraph(g.kind, [n for n in g.nodes if n.id in keep],
                     [e for e in g.edges if e.src in keep and e.dst in keep])


def prepare(ds: Dataset, stats: NormalizationStats, m_nodes: int) -> Prepared:
    """Normalise and pad every sample into dense batched arrays."""
    if ds.global_graph is None:
        raise ValueError("dataset has no global graph")
    n, f_aoi = len(ds.samples), ds.f_aoi
    big_m = len(ds.global_graph.nodes)
    gidx = ds.global_graph.index()
    x_on = np.zeros((n, m_nodes, f_aoi))
    a_on = np.zeros((n, m_nodes, m_nodes))
    mask = np.zeros((n, m_nodes), dtype=bool)
    on_idx = np.full((n, m_nodes), -1, dtype=np.int64)
    for i, s in enumerate(ds.samples):
        g = normalize_graph(stats, _truncate(s.ongoing, m_nodes))
        k = len(g.nodes)
        if k:
            x_on[i, :k] = g.feature_matrix()
        a_on[i] = normalized_adjacency(g, m_nodes)
        mask[i, :k] = True
        on_idx[i, :k] = [gidx[nid] for nid in g.node_ids]
    f = np.stack([(s.f - stats.f_mean) / stats.f_std for s in ds.samples]) if n else np.zeros((0, ds.n_f))
    raw = np.stack([s.a_truth for s in ds.samples]) if n else np.zeros((0, big_m, big_m))
    norm, row_mask = truth_adjacency_normalized(raw)
    return Prepared(x_on, a_on, mask, on_idx, f, np.array([s.label_pressure for s in ds.samples]),
                    norm, row_mask, np.array([s.minute_index for s in ds.samples]), list(ds.samples))


# ---------------------------------------------------------------- model

def init_model(rng: np.random.Generator, dims: ModelDims, label_mean: float, label_std: float) -> Params:
    c = dims.c
    params: Params = {}
    params.update(with_prefix(init_graph_embedder(rng, dims.f_aoi, dims.c_h, c), "emb_on"))
    params.update(with_prefix(init_graph_embedder(rng, dims.f_aoi, dims.c_h, c), "emb_glo"))
    params.update(with_prefix(init_feature_embedder(rng, dims.n_f, c), "feat"))
    params.update(with_prefix(init_cat_block(rng, c, dims.heads, dims.mlp_ratio), "inter"))
    params.update(with_prefix(init_cat_block(rng, c, dims.heads, dims.mlp_ratio), "infl"))
    params.update(with_prefix(init_agl(rng, c), "agl"))
    params.update({
        "fuse.w": weight(rng, 3 * c, c, "fuse.w"), "fuse.b": zeros(c, "fuse.b"),
        "head.w1": weight(rng, c + dims.n_f, dims.head_hidden, "head.w1"),
        "head.b1": zeros(dims.head_hidden, "head.b1"),
        "head.w2": Tensor(np.zeros((dims.head_hidden, 1)), requires_grad=True, name="head.w2"),
        "head.b2": zeros(1, "head.b2"),
        "head.scale": Tensor(np.array([label_std]), name="head.scale"),
    })
    return params


def active_parameters(mask: AblationMask, direction: str = "global_query") -> list[str]:
    """Names of parameters that reach the loss under ``mask``."""
    names = ["feat.value", "feat.identity"]
    emb = ["w1", "b1", "w2", "b2", "wp", "bp"]
    if mask.use_ongoing:
        names += [f"emb_on.{k}" for k in emb]
    if mask.use_global:
        names += [f"emb_glo.{k}" for k in emb]
    if mask.use_cross_attention:
        block = ["wq", "wk", "wv", "wo", "bo", "ln1_g", "ln1_b", "ln2_g", "ln2_b",
                 "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"]
        names += [f"inter.{k}" for k in block] + [f"infl.{k}" for k in block]
    else:
        names += ["fuse.w", "fuse.b"]
    if mask.use_adaptive_learning:
        names += ["agl.proj"]
    else:
        names += ["head.w1", "head.b1", "head.w2", "head.b2"]
    return names


@dataclass
class Batch:
    x_on: Tensor
    a_on: Tensor
    mask_on: np.ndarray
    on_idx: np.ndarray
    f: Tensor
    f_raw: np.ndarray


def make_batch(p: Prepared, idx=None) -> Batch:
    if idx is not None:
        p = p.take(idx)
    return Batch(Tensor(p.x_on), Tensor(p.a_on), p.mask_on, p.on_idx, Tensor(p.f), p.f)


def _scatter_matrix(on_idx: np.ndarray, big_m: int) -> np.ndarray:
    b, m = on_idx.shape
    s = np.zeros((b, big_m, m))
    bi, si = np.nonzero(on_idx >= 0)
    s[bi, on_idx[bi, si], si] = 1.0
    return s


@dataclass
class ForwardOut:
    p_hat: Tensor
    a_future: Tensor | None
    a_mask: np.ndarray | None   # rows of a_future that the model actually produced
    e_out: Tensor


def forward(params: Params, sim_params: Params, batch: Batch, glob: GlobalInputs, cfg: TrainConfig) -> ForwardOut:
    """Embed both graphs, fuse, attend over F, build A_future, run the simulator."""
    mask, dims = cfg.ablation_mask, cfg.dims
    b = batch.f.shape[0]
    big_m, c = glob.x.shape[0], dims.c
    x_glo = Tensor(glob.x)
    if mask.use_global:
        e_glo = embed_graph(prefixed(params, "emb_glo"), x_glo, Tensor(glob.a_hat))
    else:
        e_glo = Tensor(np.zeros((big_m, c)))
    m = batch.x_on.shape[-2]
    if mask.use_ongoing:
        e_on = embed_graph(prefixed(params, "emb_on"), batch.x_on, batch.a_on)
    else:
        e_on = Tensor(np.zeros((b, m, c)))
    f_tok = embed_features(prefixed(params, "feat"), batch.f)

    a_rows = None
    if mask.use_cross_attention:
        fused = inter_graph_cat(prefixed(params, "inter"), e_glo, e_on, batch.mask_on, cfg.direction, dims.heads)
        e_out = influence_cat(prefixed(params, "infl"), fused, f_tok, dims.heads)
    else:
        # rows come from the query-side graph; the other graph and F enter as pooled summaries
        pool_f = ad.mean(f_tok, axis=-2)
        if cfg.direction == "global_query":
            n_rows, rows = big_m, e_glo
            other = ad.masked_mean_rows(e_on, batch.mask_on) if mask.use_ongoing else Tensor(np.zeros((b, c)))
        else:
            n_rows, rows = m, e_on
            other = ad.broadcast_to(ad.reshape(ad.mean(e_glo, axis=-2), (1, c)), (b, c))
        parts = [ad.broadcast_to(rows, (b, n_rows, c)),
                 ad.broadcast_to(ad.reshape(other, (b, 1, c)), (b, n_rows, c)),
                 ad.broadcast_to(ad.reshape(pool_f, (b, 1, c)), (b, n_rows, c))]
        e_out = ad.concat(parts, axis=-1) @ params["fuse.w"] + params["fuse.b"]
    if e_out.ndim == 2:
        e_out = ad.broadcast_to(e_out, (b,) + e_out.shape)

    if mask.use_adaptive_learning:
        a_future = adaptive_adjacency(prefixed(params, "agl"), e_out)
        if cfg.direction == "ongoing_query":
            s = Tensor(_scatter_matrix(batch.on_idx, big_m))
            a_future = s @ a_future @ ad.transpose(s)
            a_rows = np.zeros((b, big_m), dtype=bool)
            for i, row in enumerate(batch.on_idx):
                a_rows[i, row[row >= 0]] = True
        return ForwardOut(simulate_pressure(sim_params, x_glo, a_future, batch.f), a_future, a_rows, e_out)

    # no learned graph: the simulator reads the historical prior and a head adds a learned correction
    prior = Tensor(np.broadcast_to(glob.prior, (b, big_m, big_m)))
    p_sim = simulate_pressure(sim_params, x_glo, prior, batch.f)
    pooled = ad.mean(e_out, axis=-2)
    h = ad.relu(ad.concat([pooled, batch.f], axis=-1) @ params["head.w1"] + params["head.b1"])
    z = h @ params["head.w2"] + params["head.b2"]
    corr = ad.reshape(z * params["head.scale"], (b,))
    return ForwardOut(p_sim + corr, None, None, e_out)


@contextlib.contextmanager
def inference(*param_sets: Params) -> Iterator[None]:
    """Run forward passes without recording gradients."""
    saved = [(p, p.requires_grad) for ps in param_sets for p in ps.values()]
    for p, _ in saved:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, flag in saved:
            p.requires_grad = flag


def predict(params: Params, sim_params: Params, data: Prepared, glob: GlobalInputs, cfg: TrainConfig,
            batch_size: int = 256) -> tuple[np.ndarray, np.ndarray | None]:
    preds, mats = [], []
    with inference(params, sim_params):
        for start in range(0, len(data), batch_size):
            out = forward(params, sim_params, make_batch(data, np.arange(start, min(len(data), start + batch_size))),
                          glob, cfg)
            preds.append(out.p_hat.data)
            if out.a_future is not None:
                mats.append(out.a_future.data)
    p = np.concatenate(preds) if preds else np.zeros(0)
    return p, (np.concatenate(mats) if mats else None)


def loss_terms(out: ForwardOut, data: Prepared, cfg: TrainConfig,
               label_scale: float = 1.0) -> tuple[Tensor, Tensor, Tensor]:
    """(total, L_P, L_graph) with total = L_P + lambda * L_graph.

    L_P is the MAE measured in units of ``label_scale`` seconds (z-scored labels).
    """
    lp = ad.scale(ad.mae(out.p_hat, Tensor(data.label)), 1.0 / label_scale)
    if out.a_future is None:
        lg = Tensor(0.0)
    else:
        rows = data.row_mask if out.a_mask is None else data.row_mask & out.a_mask
        lg = graph_loss(out.a_future, data.a_truth_norm, rows)
    return lp + ad.scale(lg, cfg.effective_lambda), lp, lg


# ---------------------------------------------------------------- metrics

@dataclass
class MetricsReport:
    mae: float
    rmse: float
    mape: float
    runtime_per_batch: float = 0.0
    input_bytes: int = 0

    def row(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "mape": self.mape,
                "runtime_per_batch": self.runtime_per_batch, "input_bytes": self.input_bytes}


def regression_metrics(y: np.ndarray, y_hat: np.ndarray) -> tuple[float, float, float]:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.size == 0:
        raise ValueError("no samples to score")
    err = y - y_hat
    keep = y >= MAPE_FLOOR_S
    mape = float(np.mean(np.abs(err[keep]) / y[keep])) if keep.any() else math.nan
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err * err))), mape


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    params: Params
    curves: list[dict] = field(default_factory=list)
    steps: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_mae: float = math.inf
    label_scale: float = 1.0


def train(cfg: TrainConfig, train_data: Prepared, val_data: Prepared, glob: GlobalInputs,
          sim_params: Params) -> TrainResult:
    """Minibatch Adam on L = MAE(p_hat, p) + lambda * graph_loss; returns the best-val parameters."""
    cfg.check()
    if len(train_data) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng([cfg.seed, 101])
    label_scale = float(np.std(train_data.label)) or 1.0
    params = init_model(rng, cfg.dims, float(np.mean(train_data.label)), label_scale)
    active = set(active_parameters(cfg.ablation_mask, cfg.direction))
    for k, p in params.items():
        p.requires_grad = k in active
    opt_params = [params[k] for k in sorted(active)]
    sim_was = {k: p.requires_grad for k, p in sim_params.items()}
    if cfg.finetune_sim:
        opt_params += [p for k, p in sorted(sim_params.items()) if k != "out_scale"]
        for k, p in sim_params.items():
            p.requires_grad = k != "out_scale"
    else:
        for p in sim_params.values():
            p.requires_grad = False
    opt = Adam(opt_params, lr=cfg.learning_rate)
    res = TrainResult(params, label_scale=label_scale)
    best_state = snapshot(params)
    best_sim = snapshot(sim_params)
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train_data))
            tot = {"loss": 0.0, "l_p": 0.0, "l_graph": 0.0}
            for step, start in enumerate(range(0, len(order), cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                chunk = train_data.take(idx)
                opt.zero_grad()
                out = forward(params, sim_params, make_batch(chunk), glob, cfg)
                loss, lp, lg = loss_terms(out, chunk, cfg, label_scale)
                if not np.isfinite(loss.item()):
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch} step {step}: L_P={lp.item()} "
                        f"L_graph={lg.item()} minutes={chunk.minutes[:5].tolist()}")
                ad.backward(loss)
                opt.step()
                res.steps.append({"epoch": epoch, "step": step, "loss": loss.item(), "l_p": lp.item(),
                                  "l_graph": lg.item(), "lam": cfg.effective_lambda})
                w = len(idx)
                tot["loss"] += loss.item() * w
                tot["l_p"] += lp.item() * w * label_scale
                tot["l_graph"] += lg.item() * w
            n = len(train_data)
            # without a validation split, select on the training data after the update
            held = val_data if len(val_data) else train_data
            pv, _ = predict(params, sim_params, held, glob, cfg)
            score = float(np.mean(np.abs(pv - held.label)))
            val_mae = score if len(val_data) else math.nan
            row = {"epoch": epoch, "train_loss": tot["loss"] / n, "train_mae": tot["l_p"] / n,
                   "train_graph_loss": tot["l_graph"] / n, "val_mae": val_mae}
            res.curves.append(row)
            log.info("epoch %d loss=%.3f mae=%.2f graph=%.5f val_mae=%.2f", epoch, row["train_loss"],
                     row["train_mae"], row["train_graph_loss"], val_mae)
            if score < res.best_val_mae:
                res.best_val_mae, res.best_epoch = score, epoch
                best_state = snapshot(params)
                best_sim = snapshot(sim_params)
    finally:
        for k, p in sim_params.items():
            p.requires_grad = sim_was[k]
    restore(params, best_state)
    if cfg.finetune_sim:
        restore(sim_params, best_sim)
    for k, p in params.items():
        p.requires_grad = k in active
    return res


def per_sample_graph_loss(a_future: np.ndarray, data: Prepared) -> np.ndarray:
    return np.array([graph_loss(Tensor(a_future[i]), data.a_truth_norm[i], data.row_mask[i]).item()
                     for i in range(len(data))])


def evaluate(params: Params, sim_params: Params, test: Prepared, glob: GlobalInputs, cfg: TrainConfig,
             batch_size: int | None = None, timing_batches: int = 20) -> MetricsReport:
    """Accuracy plus lightweightness: median per-batch wall time and mean input bytes."""
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty split")
    batch_size = batch_size or cfg.batch_size
    pred, _ = predict(params, sim_params, test, glob, cfg)
    mae, rmse, mape = regression_metrics(test.label, pred)
    starts = list(range(0, len(test), batch_size))
    times = []
    with inference(params, sim_params):
        for i in range(max(timing_batches, len(starts))):
            s = starts[i % len(starts)]
            batch = make_batch(test, np.arange(s, min(len(test), s + batch_size)))
            t0 = time.perf_counter()
            forward(params, sim_params, batch, glob, cfg)
            times.append(time.perf_counter() - t0)
    mask = cfg.ablation_mask
    nbytes = [input_bytes(s, glob.graph, "aca_two_graph", f_aoi=cfg.dims.f_aoi,
                          use_global=mask.use_global, use_ongoing=mask.use_ongoing) for s in test.samples]
    return MetricsReport(mae, rmse, mape, float(np.median(times)), int(round(float(np.mean(nbytes)))))


# ---------------------------------------------------------------- ablation

@dataclass
class AblationRow:
    mask: AblationMask
    reports: list[MetricsReport]

    @property
    def median_mae(self) -> float:
        return float(np.median([r.mae for r in self.reports]))

    def median(self, key: str) -> float:
        return float(np.median([getattr(r, key) for r in self.reports]))


def ablate(base: TrainConfig, train_data: Prepared, val_data: Prepared, test_data: Prepared,
           glob: GlobalInputs, sim_params: Params, seeds: Sequence[int] = (0, 1, 2),
           rows: Sequence[AblationMask] = ABLATION_ROWS) -> list[AblationRow]:
    """Train and test every mask row with shared seeds."""
    table = []
    for mask in rows:
        reports = []
        for seed in seeds:
            cfg = replace(base, seed=seed, ablation_mask=mask)
            res = train(cfg, train_data, val_data, glob, sim_params)
            reports.append(evaluate(res.params, sim_params, test_data, glob, cfg))
            log.info("ablation %s seed %d mae=%.2f", mask.label(), seed, reports[-1].mae)
        table.append(AblationRow(mask, reports))
    return table


def format_ablation(table: Sequence[AblationRow]) -> str:
    head = f"{'Ongoing':>8} {'Global':>7} {'CrossAtt':>9} {'Adaptive':>9} {'MAE':>9} {'RMSE':>9} {'MAPE':>7}"
    lines = [head, "-" * len(head)]
    tick = lambda b: "yes" if b else ""
    for r in table:
        m = r.mask
        lines.append(f"{tick(m.use_ongoing):>8} {tick(m.use_global):>7} {tick(m.use_cross_attention):>9} "
                     f"{tick(m.use_adaptive_learning):>9} {r.median_mae:9.2f} {r.median('rmse'):9.2f} "
                     f"{r.median('mape'):7.4f}")
    return "\n".join(lines)
