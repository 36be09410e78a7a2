"""Synthetic on-demand food delivery world with exact pressure labels.

A district is a set of AOIs in a disc. Each minute a Poisson number of orders
is created; the origin follows merchant weights, the destination follows the
active spatial pattern damped by distance. Delivery time is

    prep(src) + road_distance(src, dst) / speed * congestion(t) + queue(load) + noise

floored at 60 s, where load is open orders per on-duty rider. Open orders
depend on earlier delivery times, so generation runs minute by minute.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Sequence

import numpy as np

from .graphs import (DEFAULT_F_AOI, DEFAULT_N_F, AoiNode, Dataset, FlowEdge, FlowGraph, Sample,
                     aggregate_edges, validate)

PATTERNS = ("annular", "astroid", "uniform", "mixed")
REGIMES = ("annular", "astroid", "uniform")
MIN_DELIVERY_S = 60.0
# destination distance decay per regime: annular flows cross the ring, astroid flows stay local
DECAY_KM = {"annular": 8.0, "astroid": 1.0, "uniform": 2.5}
MINUTES_PER_DAY = 1440

FEATURE_NAMES = (
    "on_duty_riders", "idle_riders", "rider_utilization", "congestion", "rain",
    "tod_sin", "tod_cos", "planned_riders_next", "congestion_next", "rain_next",
    "effective_speed", "tod_sin2",
)


def _bump(t: np.ndarray, center: float, width: float) -> np.ndarray:
    d = (t - center + MINUTES_PER_DAY / 2) % MINUTES_PER_DAY - MINUTES_PER_DAY / 2
    return np.exp(-0.5 * (d / width) ** 2)


def default_arrival_profile() -> tuple[float, ...]:
    t = np.arange(MINUTES_PER_DAY, dtype=float)
    lam = 21.0 + 18.0 * _bump(t, 720, 150) + 42.0 * _bump(t, 690, 60) + 48.0 * _bump(t, 1080, 75)
    return tuple(np.round(lam, 6).tolist())


def default_rider_profile() -> tuple[float, ...]:
    t = np.arange(MINUTES_PER_DAY, dtype=float)
    # supply lags demand peaks slightly, so peaks run overloaded
    lam = np.array(default_arrival_profile())
    lagged = np.roll(lam, 25)
    return tuple(np.round(30.0 + 4.5 * lagged + 24.0 * _bump(t, 900, 200)).tolist())


def default_congestion_profile() -> tuple[float, ...]:
    t = np.arange(MINUTES_PER_DAY, dtype=float)
    c = 1.0 + 0.25 * _bump(t, 510, 70) + 0.35 * _bump(t, 1110, 80) + 0.1 * _bump(t, 750, 90)
    return tuple(np.round(c, 6).tolist())


@dataclass
class WorldConfig:
    n_aoi: int = 16
    pattern: str = "mixed"
    arrival_rate_profile: tuple[float, ...] = field(default_factory=default_arrival_profile)
    rider_count_profile: tuple[float, ...] = field(default_factory=default_rider_profile)
    rider_speed: float = 5.0
    congestion_profile: tuple[float, ...] = field(default_factory=default_congestion_profile)
    noise_sigma: float = 120.0
    seed: int = 7
    horizon_minutes: int = 5
    ongoing_window: int = 30
    warmup_minutes: int = 60
    radius_km: float = 4.0
    regime_dwell_minutes: float = 60.0
    queue_scale: float = 150.0
    rider_capacity: float = 6.0
    rain_events_per_day: float = 2.0
    start_minute_of_day: int = 600
    district_id: int = 0
    sample_stride_minutes: int = 3

    def __post_init__(self):
        for name in ("arrival_rate_profile", "rider_count_profile", "congestion_profile"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))

    def violations(self) -> list[str]:
        out = []
        if self.n_aoi < 2:
            out.append("n_aoi must be >= 2")
        if self.pattern not in PATTERNS:
            out.append(f"pattern must be one of {PATTERNS}")
        for name in ("arrival_rate_profile", "rider_count_profile"):
            prof = getattr(self, name)
            if not prof or min(prof) <= 0:
                out.append(f"{name} must be nonempty and strictly positive")
        if not self.congestion_profile or min(self.congestion_profile) < 1.0:
            out.append("congestion_profile must be >= 1 everywhere")
        if self.horizon_minutes < 1:
            out.append("horizon_minutes must be >= 1")
        if self.rider_speed <= 0:
            out.append("rider_speed must be positive")
        if self.noise_sigma < 0 or self.queue_scale < 0:
            out.append("noise_sigma and queue_scale must be nonnegative")
        if self.ongoing_window < 1:
            out.append("ongoing_window must be >= 1")
        if self.sample_stride_minutes < 1:
            out.append("sample_stride_minutes must be >= 1")
        return out

    def check(self) -> None:
        bad = self.violations()
        if bad:
            raise ValueError("invalid world config: " + "; ".join(bad))

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}


def preset(name: str, **overrides) -> WorldConfig:
    """Single-pattern scenario worlds sharing arrivals, supply and seed."""
    if name not in PATTERNS:
        raise ValueError(f"unknown preset {name!r}")
    return replace(WorldConfig(pattern=name), **overrides)


@dataclass
class OrderEvent:
    create_minute: int
    src_aoi: int
    dst_aoi: int
    delivery_time: float


@dataclass
class AoiLayout:
    positions: np.ndarray       # (n, 2) km
    prep_time: np.ndarray       # seconds
    difficulty: np.ndarray      # in [0, 1]; lengthens the last leg
    merchant_weight: np.ndarray

    @property
    def n(self) -> int:
        return len(self.prep_time)

    def road_distance(self, src, dst) -> np.ndarray:
        """Metres; intra-AOI trips count 400 m."""
        d = np.linalg.norm(self.positions[src] - self.positions[dst], axis=-1)
        d = np.maximum(d, 0.4)
        return 1000.0 * 1.3 * d * (1.0 + 0.5 * self.difficulty[dst])

    def static_features(self) -> np.ndarray:
        p = self.positions
        return np.column_stack([self.prep_time, self.difficulty, self.merchant_weight,
                                p[:, 0], p[:, 1], np.linalg.norm(p, axis=1)])


def make_layout(cfg: WorldConfig) -> AoiLayout:
    rng = np.random.default_rng([cfg.seed, 11])
    n = cfg.n_aoi
    r = cfg.radius_km * np.sqrt(rng.uniform(0.02, 1.0, n))
    th = rng.uniform(0, 2 * math.pi, n)
    return AoiLayout(
        positions=np.column_stack([r * np.cos(th), r * np.sin(th)]),
        prep_time=rng.uniform(300.0, 900.0, n),
        difficulty=rng.uniform(0.0, 1.0, n),
        merchant_weight=rng.lognormal(0.0, 0.5, n),
    )


def pattern_weights(layout: AoiLayout, pattern: str, radius_km: float) -> np.ndarray:
    """Customer density per AOI under a spatial pattern."""
    x, y = layout.positions[:, 0], layout.positions[:, 1]
    if pattern == "uniform":
        w = np.ones(layout.n)
    elif pattern == "annular":
        ring = 0.8 * radius_km
        w = np.exp(-0.5 * ((np.hypot(x, y) - ring) / (0.12 * radius_km)) ** 2)
    elif pattern == "astroid":
        size = 0.75 * radius_km
        s = (np.abs(x) ** (2 / 3) + np.abs(y) ** (2 / 3)) ** 1.5
        w = np.exp(-0.5 * ((s - size) / (0.12 * radius_km)) ** 2)
    else:
        raise ValueError(f"no weights for pattern {pattern!r}")
    return w + 0.02


def _destination_matrix(layout: AoiLayout, pattern: str, radius_km: float) -> np.ndarray:
    w = pattern_weights(layout, pattern, radius_km)
    idx = np.arange(layout.n)
    dist = layout.road_distance(idx[:, None], idx[None, :]) / 1000.0
    p = w[None, :] * np.exp(-dist / DECAY_KM[pattern])
    return p / p.sum(axis=1, keepdims=True)


def _source_weights(layout: AoiLayout, pattern: str, radius_km: float) -> np.ndarray:
    w = layout.merchant_weight * (0.6 + 0.4 * pattern_weights(layout, pattern, radius_km))
    return w / w.sum()


def queue_delay(load_ratio: float, capacity: float, scale: float) -> float:
    """Waiting time caused by rider overload; nondecreasing in load, capped at 30 min."""
    over = max(0.0, load_ratio - capacity)
    return min(1800.0, scale * over ** 1.5)


@dataclass
class WorldRun:
    config: WorldConfig
    layout: AoiLayout
    events: list[OrderEvent]
    riders: np.ndarray
    planned_riders: np.ndarray
    open_orders: np.ndarray
    congestion: np.ndarray
    rain: np.ndarray
    regime: np.ndarray          # index into REGIMES, per minute
    total_minutes: int

    def features(self, minute: int) -> np.ndarray:
        return self._features[minute]

    def __post_init__(self):
        self._table = EventTable.from_events(self.events)
        self._features = self._feature_table()

    @property
    def table(self) -> "EventTable":
        return self._table

    def _feature_table(self) -> np.ndarray:
        cfg = self.config
        n = self.total_minutes
        h = cfg.horizon_minutes
        tod = (cfg.start_minute_of_day + np.arange(n)) % MINUTES_PER_DAY
        ang = 2 * math.pi * tod / MINUTES_PER_DAY
        busy = self.open_orders / cfg.rider_capacity
        idle = np.maximum(0.0, self.riders - busy)

        def ahead(a):
            pad = np.concatenate([a, np.full(h, a[-1])])
            cs = np.concatenate([[0.0], np.cumsum(pad)])
            return (cs[h:h + n] - cs[:n]) / h

        return np.column_stack([
            self.riders, idle, 1.0 - idle / self.riders, self.congestion, self.rain,
            np.sin(ang), np.cos(ang), ahead(self.planned_riders), ahead(self.congestion),
            ahead(self.rain), cfg.rider_speed / self.congestion, np.sin(2 * ang),
        ])


def generate_world(cfg: WorldConfig, total_minutes: int) -> WorldRun:
    """Simulate ``total_minutes`` minutes of the district. Deterministic in ``cfg.seed``."""
    cfg.check()
    if total_minutes <= cfg.horizon_minutes:
        raise ValueError("total_minutes must exceed the label horizon")
    layout = make_layout(cfg)
    ss = np.random.SeedSequence(cfg.seed)
    r_arr, r_od, r_noise, r_env, r_regime = (np.random.default_rng(s) for s in ss.spawn(5))

    def cyc(profile, t):
        return profile[(cfg.start_minute_of_day + t) % len(profile)]

    # environment: rain episodes, per-day supply level, regime chain
    rain = np.zeros(total_minutes)
    t = 0
    p_start = cfg.rain_events_per_day / MINUTES_PER_DAY
    while t < total_minutes:
        if r_env.random() < p_start:
            dur = int(r_env.integers(40, 160))
            rain[t:t + dur] = r_env.uniform(0.3, 1.0)
            t += dur
        else:
            t += 1
    n_days = total_minutes // MINUTES_PER_DAY + 2
    day_level = r_env.uniform(0.8, 1.15, n_days)
    planned = np.array([cyc(cfg.rider_count_profile, m) for m in range(total_minutes)])
    planned = np.maximum(1.0, np.round(planned * day_level[
        (cfg.start_minute_of_day + np.arange(total_minutes)) // MINUTES_PER_DAY]))
    # rain keeps some riders home
    riders = np.maximum(1.0, np.round(planned * (1.0 - 0.15 * rain)))
    congestion = np.array([cyc(cfg.congestion_profile, m) for m in range(total_minutes)]) * (1.0 + 0.3 * rain)

    if cfg.pattern == "mixed":
        regime = np.zeros(total_minutes, dtype=int)
        cur = int(r_regime.integers(len(REGIMES)))
        for m in range(total_minutes):
            if r_regime.random() < 1.0 / cfg.regime_dwell_minutes:
                cur = int((cur + r_regime.integers(1, len(REGIMES))) % len(REGIMES))
            regime[m] = cur
    else:
        fixed = REGIMES.index(cfg.pattern)
        regime = np.full(total_minutes, fixed, dtype=int)

    dest = {p: _destination_matrix(layout, p, cfg.radius_km) for p in REGIMES}
    srcw = {p: _source_weights(layout, p, cfg.radius_km) for p in REGIMES}
    dest_cdf = {p: np.cumsum(d, axis=1) for p, d in dest.items()}

    events: list[OrderEvent] = []
    finishing: list[float] = []
    open_orders = np.zeros(total_minutes)
    for m in range(total_minutes):
        now = 60.0 * m
        while finishing and finishing[0] <= now:
            heapq.heappop(finishing)
        n_open = len(finishing)
        open_orders[m] = n_open
        queue = queue_delay(n_open / riders[m], cfg.rider_capacity, cfg.queue_scale)
        lam = cyc(cfg.arrival_rate_profile, m)
        k = int(r_arr.poisson(lam))
        if k == 0:
            continue
        pat = REGIMES[regime[m]]
        src = r_od.choice(layout.n, size=k, p=srcw[pat])
        u = r_od.random(k)
        dst = np.minimum((dest_cdf[pat][src] < u[:, None]).sum(axis=1), layout.n - 1)
        travel = layout.road_distance(src, dst) / cfg.rider_speed * congestion[m]
        noise = r_noise.normal(0.0, cfg.noise_sigma, k) if cfg.noise_sigma > 0 else np.zeros(k)
        dt = np.maximum(MIN_DELIVERY_S, layout.prep_time[src] + travel + queue + noise)
        for s, d, x in zip(src.tolist(), dst.tolist(), dt.tolist()):
            events.append(OrderEvent(m, s, d, x))
            heapq.heappush(finishing, now + x)
    return WorldRun(cfg, layout, events, riders, planned, open_orders, congestion, rain, regime,
                    total_minutes)


def generate_history(cfg: WorldConfig, total_minutes: int) -> list[OrderEvent]:
    return generate_world(cfg, total_minutes).events


# ---------------------------------------------------------------- event indexing

@dataclass
class EventTable:
    create: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    time: np.ndarray

    @classmethod
    def from_events(cls, events: Sequence[OrderEvent]) -> "EventTable":
        order = sorted(range(len(events)), key=lambda i: events[i].create_minute)
        ev = [events[i] for i in order]
        return cls(np.array([e.create_minute for e in ev], dtype=np.int64),
                   np.array([e.src_aoi for e in ev], dtype=np.int64),
                   np.array([e.dst_aoi for e in ev], dtype=np.int64),
                   np.array([e.delivery_time for e in ev], dtype=np.float64))

    def window(self, lo: int, hi: int) -> slice:
        """Events created in minutes [lo, hi)."""
        a = int(np.searchsorted(self.create, lo, side="left"))
        b = int(np.searchsorted(self.create, hi, side="left"))
        return slice(a, b)


def _as_table(history) -> EventTable:
    if isinstance(history, EventTable):
        return history
    if isinstance(history, WorldRun):
        return history.table
    return EventTable.from_events(history)


# ---------------------------------------------------------------- graphs

def node_features(layout: AoiLayout | None, n_aoi: int, out_volume: np.ndarray,
                  in_volume: np.ndarray, f_aoi: int = DEFAULT_F_AOI) -> np.ndarray:
    static = layout.static_features() if layout is not None else np.zeros((n_aoi, 6))
    feats = np.column_stack([static, out_volume, in_volume])
    if feats.shape[1] < f_aoi:
        feats = np.column_stack([feats, np.zeros((n_aoi, f_aoi - feats.shape[1]))])
    return feats[:, :f_aoi]


def build_global_graph(history, layout: AoiLayout | None = None, days: float | None = None,
                       f_aoi: int = DEFAULT_F_AOI) -> FlowGraph:
    """Aggregate the whole history into the global flow graph.

    Edge ``order_count`` is the mean daily volume over the history span (at
    least one day); ``avg_delivery_time`` is the mean over all orders on it.
    """
    tab = _as_table(history)
    if tab.create.size == 0:
        raise ValueError("cannot build a global graph from an empty history")
    if days is None:
        span = int(tab.create.max() - tab.create.min() + 1)
        days = max(1.0, span / MINUTES_PER_DAY)
    ids = np.union1d(tab.src, tab.dst)
    n_aoi = layout.n if layout is not None else int(ids.max()) + 1
    counts: dict[tuple[int, int], int] = {}
    sums: dict[tuple[int, int], float] = {}
    for s, d, x in zip(tab.src.tolist(), tab.dst.tolist(), tab.time.tolist()):
        key = (s, d)
        counts[key] = counts.get(key, 0) + 1
        sums[key] = sums.get(key, 0.0) + x
    out_vol = np.bincount(tab.src, minlength=n_aoi) / days
    in_vol = np.bincount(tab.dst, minlength=n_aoi) / days
    feats = node_features(layout, n_aoi, out_vol, in_vol, f_aoi)
    nodes = [AoiNode(int(i), feats[i].copy()) for i in ids]
    edges = [FlowEdge(s, d, counts[(s, d)] / days, sums[(s, d)] / counts[(s, d)])
             for (s, d) in sorted(counts)]
    return FlowGraph("global", nodes, edges)


def build_ongoing_graph(history, minute: int, global_graph: FlowGraph | None = None,
                        window: int = 30, f_aoi: int = DEFAULT_F_AOI,
                        max_nodes: int | None = None) -> FlowGraph:
    """Open orders at ``minute``: created in [minute - window, minute), not yet delivered.

    Edges carry the open-order count and the mean elapsed time (s) since
    creation. Nodes take their static features from ``global_graph`` with the
    two volume columns holding live open-order out/in counts; AOIs the global
    graph does not know are dropped. ``max_nodes`` keeps the busiest nodes.
    """
    tab = _as_table(history)
    sl = tab.window(minute - window, minute)
    create, src, dst, tm = tab.create[sl], tab.src[sl], tab.dst[sl], tab.time[sl]
    still_open = 60.0 * create + tm > 60.0 * minute
    create, src, dst = create[still_open], src[still_open], dst[still_open]
    feat_of = {n.id: n.features for n in global_graph.nodes} if global_graph is not None else None
    if feat_of is not None:
        known = np.array([s in feat_of and d in feat_of for s, d in zip(src.tolist(), dst.tolist())],
                         dtype=bool)
        if known.size:
            create, src, dst = create[known], src[known], dst[known]
    if max_nodes is not None and src.size:
        volume: dict[int, int] = {}
        for a in np.concatenate([src, dst]).tolist():
            volume[a] = volume.get(a, 0) + 1
        keep = set(sorted(volume, key=lambda a: (-volume[a], a))[:max_nodes])
        sel = np.array([s in keep and d in keep for s, d in zip(src.tolist(), dst.tolist())], dtype=bool)
        create, src, dst = create[sel], src[sel], dst[sel]
    counts: dict[tuple[int, int], int] = {}
    elapsed: dict[tuple[int, int], float] = {}
    for c, s, d in zip(create.tolist(), src.tolist(), dst.tolist()):
        key = (s, d)
        counts[key] = counts.get(key, 0) + 1
        elapsed[key] = elapsed.get(key, 0.0) + 60.0 * (minute - c)
    ids = sorted({a for key in counts for a in key})
    out_open: dict[int, float] = {}
    in_open: dict[int, float] = {}
    for (s, d), n in counts.items():
        out_open[s] = out_open.get(s, 0.0) + n
        in_open[d] = in_open.get(d, 0.0) + n
    nodes = []
    for i in ids:
        x = np.array(feat_of[i] if feat_of is not None else np.zeros(f_aoi), dtype=np.float64)
        # live open-order volume replaces the historical volume columns
        if x.size >= 8:
            x[6], x[7] = out_open.get(i, 0.0), in_open.get(i, 0.0)
        nodes.append(AoiNode(i, x))
    edges = [FlowEdge(s, d, float(counts[(s, d)]), elapsed[(s, d)] / counts[(s, d)])
             for (s, d) in sorted(counts)]
    return FlowGraph("ongoing", nodes, edges)


def label_and_truth(history, minute: int, global_graph: FlowGraph,
                    horizon: int = 5) -> tuple[float, np.ndarray] | None:
    """Mean delivery time of orders created in [minute, minute + horizon) and the
    count x mean-time adjacency over global nodes. None when the window is empty."""
    tab = _as_table(history)
    sl = tab.window(minute, minute + horizon)
    src, dst, tm = tab.src[sl].tolist(), tab.dst[sl].tolist(), tab.time[sl].tolist()
    if not tm:
        return None
    total = 0.0
    for x in tm:
        total += x
    p = total / len(tm)
    idx = global_graph.index()
    counts: dict[tuple[int, int], int] = {}
    sums: dict[tuple[int, int], float] = {}
    for s, d, x in zip(src, dst, tm):
        if s in idx and d in idx:
            key = (idx[s], idx[d])
            counts[key] = counts.get(key, 0) + 1
            sums[key] = sums.get(key, 0.0) + x
    m = len(global_graph.nodes)
    a = np.zeros((m, m))
    for key, c in counts.items():
        a[key] = c * (sums[key] / c)
    return p, a


def slice_graphs(run: WorldRun, minute: int, k: int, global_graph: FlowGraph) -> list[FlowGraph]:
    """Per-minute flow graphs for the k minutes before ``minute``, each over the
    full global node set, as a sequence model would receive them."""
    tab = run.table
    out = []
    for j in range(minute - k, minute):
        sl = tab.window(j, j + 1)
        edges = [FlowEdge(s, d, 1.0, x) for s, d, x in
                 zip(tab.src[sl].tolist(), tab.dst[sl].tolist(), tab.time[sl].tolist())]
        out.append(FlowGraph("ongoing", list(global_graph.nodes), aggregate_edges(edges)))
    return out


# ---------------------------------------------------------------- datasets

@dataclass
class SplitDatasets:
    train: Dataset
    val: Dataset
    test: Dataset
    run: WorldRun
    global_graph: FlowGraph

    def __iter__(self) -> Iterator[Dataset]:
        return iter((self.train, self.val, self.test))


def parse_split(split) -> tuple[float, float, float]:
    if isinstance(split, str):
        split = [float(x) for x in split.split(",")]
    split = tuple(float(x) for x in split)
    if len(split) != 3 or min(split) < 0 or abs(sum(split) - 1.0) > 1e-9:
        raise ValueError(f"split must be three nonnegative fractions summing to 1, got {split}")
    return split  # type: ignore[return-value]


def split_counts(n: int, split: Sequence[float]) -> tuple[int, int, int]:
    a = int(round(split[0] * n))
    b = int(round(split[1] * n))
    b = min(b, n - a)
    return a, b, n - a - b


def make_dataset(cfg: WorldConfig, total_minutes: int, split=(0.8, 0.1, 0.1),
                 f_aoi: int = DEFAULT_F_AOI, max_ongoing_nodes: int | None = None) -> SplitDatasets:
    """Generate a world and cut it into chronological train/val/test datasets.

    Query minutes run every ``sample_stride_minutes`` over ``total_minutes``
    after a warm-up period; minutes whose label window is empty are dropped. The global graph aggregates only orders
    created before the first validation minute.
    """
    split = parse_split(split)
    run = generate_world(cfg, cfg.warmup_minutes + total_minutes + cfg.horizon_minutes)
    tab = run.table
    minutes = [m for m in range(cfg.warmup_minutes, cfg.warmup_minutes + total_minutes,
                                cfg.sample_stride_minutes)
               if tab.window(m, m + cfg.horizon_minutes).stop > tab.window(m, m + cfg.horizon_minutes).start]
    n_tr, n_va, n_te = split_counts(len(minutes), split)
    cut = minutes[n_tr] if n_tr < len(minutes) else cfg.warmup_minutes + total_minutes
    sl = tab.window(0, cut)
    train_hist = EventTable(tab.create[sl], tab.src[sl], tab.dst[sl], tab.time[sl])
    if train_hist.create.size == 0:
        train_hist = tab
    global_graph = build_global_graph(train_hist, run.layout, f_aoi=f_aoi)
    gid = f"district-{cfg.district_id}-seed-{cfg.seed}"
    n_f = DEFAULT_N_F

    def build(ms: Sequence[int]) -> Dataset:
        samples = []
        for m in ms:
            p, a = label_and_truth(tab, m, global_graph, cfg.horizon_minutes)
            ongoing = build_ongoing_graph(tab, m, global_graph, cfg.ongoing_window, f_aoi,
                                          max_ongoing_nodes)
            s = Sample(cfg.district_id, m, ongoing, gid, run.features(m).copy(), p, a)
            bad = validate(s, global_graph, f_aoi, n_f)
            if bad:
                raise AssertionError(f"generated invalid sample at minute {m}: {bad}")
            samples.append(s)
        return Dataset(f_aoi, n_f, global_graph, samples, gid)

    return SplitDatasets(build(minutes[:n_tr]), build(minutes[n_tr:n_tr + n_va]),
                         build(minutes[n_tr + n_va:]), run, global_graph)
