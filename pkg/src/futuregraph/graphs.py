"""Order-flow graphs, samples, the dataset file format and input-size accounting."""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = "ACADATA"
VERSION = 1
GRAPH_KINDS = ("global", "ongoing", "truth_future")
DEFAULT_F_AOI = 8
DEFAULT_N_F = 12


class DatasetFormatError(ValueError):
    """Base class for unreadable dataset files."""


class BadMagicError(DatasetFormatError):
    pass


class VersionMismatchError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


class SchemaError(DatasetFormatError):
    pass


@dataclass
class AoiNode:
    id: int
    features: np.ndarray


@dataclass
class FlowEdge:
    src: int
    dst: int
    order_count: float
    avg_delivery_time: float


@dataclass
class FlowGraph:
    kind: str
    nodes: list[AoiNode] = field(default_factory=list)
    edges: list[FlowEdge] = field(default_factory=list)

    @property
    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    def feature_matrix(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, 0))
        return np.stack([n.features for n in self.nodes])

    def index(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}


@dataclass
class Sample:
    district_id: int
    minute_index: int
    ongoing: FlowGraph
    global_ref: str
    f: np.ndarray
    label_pressure: float
    a_truth: np.ndarray


@dataclass
class Dataset:
    f_aoi: int
    n_f: int
    global_graph: FlowGraph | None
    samples: list[Sample] = field(default_factory=list)
    global_id: str = "global-0"

    def __len__(self) -> int:
        return len(self.samples)


def aggregate_edges(edges: Iterable[FlowEdge]) -> list[FlowEdge]:
    """Merge duplicate (src, dst) flows: counts add, times take the count-weighted mean."""
    acc: dict[tuple[int, int], list[float]] = {}
    for e in edges:
        c, t = acc.setdefault((e.src, e.dst), [0.0, 0.0])
        acc[(e.src, e.dst)] = [c + e.order_count, t + e.order_count * e.avg_delivery_time]
    out = []
    for (s, d), (c, t) in sorted(acc.items()):
        out.append(FlowEdge(s, d, c, t / c if c > 0 else 0.0))
    return out


# ---------------------------------------------------------------- validation

def _graph_violations(g: FlowGraph, f_aoi: int, label: str) -> list[str]:
    out = []
    if g.kind not in GRAPH_KINDS:
        out.append(f"{label}: unknown graph kind {g.kind!r}")
    ids = g.node_ids
    if len(set(ids)) != len(ids):
        out.append(f"{label}: duplicate node ids")
    for n in g.nodes:
        feats = np.asarray(n.features)
        if feats.shape != (f_aoi,):
            out.append(f"{label}: node {n.id} has {feats.size} features, expected {f_aoi}")
        elif not np.all(np.isfinite(feats)):
            out.append(f"{label}: node {n.id} has non-finite features")
    idset = set(ids)
    seen = set()
    for e in g.edges:
        for end in (e.src, e.dst):
            if end not in idset:
                out.append(f"{label}: edge {e.src}->{e.dst} references missing node {end}")
        if (e.src, e.dst) in seen:
            out.append(f"{label}: duplicate edge {e.src}->{e.dst}")
        seen.add((e.src, e.dst))
        if not (e.order_count >= 0 and e.avg_delivery_time >= 0):
            out.append(f"{label}: edge {e.src}->{e.dst} has negative attributes")
    return out


def validate(sample: Sample, global_graph: FlowGraph, f_aoi: int = DEFAULT_F_AOI,
             n_f: int = DEFAULT_N_F) -> list[str]:
    """Return every invariant violation of ``sample``; empty means valid."""
    out = _graph_violations(sample.ongoing, f_aoi, "ongoing")
    if sample.ongoing.kind != "ongoing":
        out.append(f"ongoing graph has kind {sample.ongoing.kind!r}")
    global_ids = set(global_graph.node_ids)
    for nid in sample.ongoing.node_ids:
        if nid not in global_ids:
            out.append(f"ongoing node {nid} not in global graph")
    f = np.asarray(sample.f)
    if f.shape != (n_f,):
        out.append(f"supply/env vector has length {f.size}, expected {n_f}")
    elif not np.all(np.isfinite(f)):
        out.append("supply/env vector has non-finite values")
    if not (np.isfinite(sample.label_pressure) and sample.label_pressure > 0):
        out.append(f"label pressure {sample.label_pressure} not positive")
    m = len(global_graph.nodes)
    a = np.asarray(sample.a_truth)
    if a.shape != (m, m):
        out.append(f"a_truth shape {a.shape}, expected {(m, m)}")
    else:
        if not np.all(np.isfinite(a)):
            out.append("a_truth has non-finite entries")
        elif np.any(a < 0):
            out.append(f"a_truth has {int(np.sum(a < 0))} negative entries")
    return out


# ---------------------------------------------------------------- JSON-lines format

def _graph_to_obj(g: FlowGraph) -> dict:
    return {
        "kind": g.kind,
        "nodes": [[n.id, np.asarray(n.features, dtype=np.float64).tolist()] for n in g.nodes],
        "edges": [[e.src, e.dst, float(e.order_count), float(e.avg_delivery_time)] for e in g.edges],
    }


def _graph_from_obj(o: dict) -> FlowGraph:
    try:
        nodes = [AoiNode(int(i), np.array(f, dtype=np.float64)) for i, f in o["nodes"]]
        edges = [FlowEdge(int(s), int(d), float(c), float(t)) for s, d, c, t in o["edges"]]
        return FlowGraph(o["kind"], nodes, edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed graph record: {exc}") from None


def _sample_to_obj(s: Sample) -> dict:
    return {
        "district_id": s.district_id,
        "minute_index": s.minute_index,
        "global_ref": s.global_ref,
        "ongoing": _graph_to_obj(s.ongoing),
        "f": np.asarray(s.f, dtype=np.float64).tolist(),
        "label_pressure": float(s.label_pressure),
        "a_truth": np.asarray(s.a_truth, dtype=np.float64).tolist(),
    }


def _sample_from_obj(o: dict) -> Sample:
    try:
        return Sample(
            district_id=int(o["district_id"]),
            minute_index=int(o["minute_index"]),
            ongoing=_graph_from_obj(o["ongoing"]),
            global_ref=str(o["global_ref"]),
            f=np.array(o["f"], dtype=np.float64),
            label_pressure=float(o["label_pressure"]),
            a_truth=np.array(o["a_truth"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed sample record: {exc}") from None


def dumps_dataset(ds: Dataset) -> str:
    header = {"magic": MAGIC, "version": VERSION, "f_aoi": ds.f_aoi, "n_f": ds.n_f,
              "n_samples": len(ds.samples), "global_id": ds.global_id,
              "has_global": ds.global_graph is not None}
    lines = [json.dumps(header)]
    if ds.global_graph is not None:
        lines.append(json.dumps(_graph_to_obj(ds.global_graph)))
    lines.extend(json.dumps(_sample_to_obj(s)) for s in ds.samples)
    return "\n".join(lines) + "\n"


def loads_dataset(text: str) -> Dataset:
    if not text:
        raise TruncatedFileError("empty file")
    lines = text.split("\n")
    complete = text.endswith("\n")
    if complete:
        lines = lines[:-1]
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        if not complete:
            raise TruncatedFileError("header line incomplete") from None
        raise SchemaError("header is not JSON") from None
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise BadMagicError(f"bad magic: {header.get('magic') if isinstance(header, dict) else header!r}")
    if header.get("version") != VERSION:
        raise VersionMismatchError(f"file version {header.get('version')}, reader supports {VERSION}")
    try:
        f_aoi, n_f, n = int(header["f_aoi"]), int(header["n_f"]), int(header["n_samples"])
        has_global = bool(header["has_global"])
        gid = str(header.get("global_id", "global-0"))
    except (KeyError, TypeError, ValueError):
        raise SchemaError("header missing required fields") from None
    expected = 1 + int(has_global) + n
    if len(lines) < expected or (not complete and len(lines) == expected):
        raise TruncatedFileError(f"expected {expected} lines, file ends early")
    if len(lines) > expected:
        raise SchemaError(f"expected {expected} lines, found {len(lines)}")
    try:
        body = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise SchemaError(f"record is not JSON: {exc}") from None
    global_graph = _graph_from_obj(body[0]) if has_global else None
    samples = [_sample_from_obj(o) for o in body[int(has_global):]]
    return Dataset(f_aoi, n_f, global_graph, samples, gid)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(ds), encoding="utf-8")


def load_dataset(path: str | Path) -> Dataset:
    return loads_dataset(Path(path).read_text(encoding="utf-8"))


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    """Bit-exact structural equality (floats compared by their binary form)."""
    return dumps_dataset(a) == dumps_dataset(b) and _binary_equal(a, b)


def _binary_equal(a: Dataset, b: Dataset) -> bool:
    def blob(ds: Dataset) -> bytes:
        parts = []
        if ds.global_graph is not None:
            parts.append(encode_graph(ds.global_graph))
        for s in ds.samples:
            parts += [encode_graph(s.ongoing), np.asarray(s.f, "<f8").tobytes(),
                      struct.pack("<d", s.label_pressure), np.asarray(s.a_truth, "<f8").tobytes()]
        return b"".join(parts)
    return blob(a) == blob(b)


# ---------------------------------------------------------------- canonical binary encoding

_KIND_CODE = {k: i for i, k in enumerate(GRAPH_KINDS)}
_REPR_CODE = {"aca_two_graph": 0, "sequence": 1}
_SEQ_RE = re.compile(r"^sequence_(\d+)_slices$")


def encode_graph(g: FlowGraph) -> bytes:
    """u32 kind, u32 node count, per node (u32 id, fp64 features), u32 edge count,
    per edge (u32 src, u32 dst, fp64 count, fp64 time); little-endian, unpadded."""
    parts = [struct.pack("<II", _KIND_CODE[g.kind], len(g.nodes))]
    for n in g.nodes:
        parts.append(struct.pack("<I", n.id))
        parts.append(np.asarray(n.features, dtype="<f8").tobytes())
    parts.append(struct.pack("<I", len(g.edges)))
    for e in g.edges:
        parts.append(struct.pack("<IIdd", e.src, e.dst, e.order_count, e.avg_delivery_time))
    return b"".join(parts)


def encode_features(f: np.ndarray) -> bytes:
    f = np.asarray(f, dtype="<f8")
    return struct.pack("<I", f.size) + f.tobytes()


def encode_header(representation: str, f_aoi: int, n_f: int, n_graphs: int) -> bytes:
    code = _REPR_CODE["sequence" if representation.startswith("sequence") else representation]
    return struct.pack("<IIII", code, f_aoi, n_f, n_graphs)


def fixed_overhead(n_f: int) -> int:
    """Bytes of a two-graph payload that do not depend on either graph's content,
    plus the encoding of an empty ongoing graph."""
    return len(encode_header("aca_two_graph", 0, n_f, 2)) + len(encode_graph(FlowGraph("ongoing"))) \
        + 4 + 8 * n_f


def parse_representation(representation: str) -> tuple[str, int]:
    if representation == "aca_two_graph":
        return representation, 0
    m = _SEQ_RE.match(representation)
    if m and int(m.group(1)) >= 1:
        return "sequence", int(m.group(1))
    raise ValueError(f"unknown representation tag {representation!r}")


def encode_input(sample: Sample, global_graph: FlowGraph, representation: str = "aca_two_graph",
                 slices: Sequence[FlowGraph] | None = None, f_aoi: int = DEFAULT_F_AOI,
                 use_global: bool = True, use_ongoing: bool = True) -> bytes:
    """Model-input payload of one sample under the given representation.

    ``aca_two_graph`` carries the global graph, the ongoing graph and F.
    ``sequence_<k>_slices`` carries k per-minute flow graphs over the full global
    node set plus one F vector per slice, as sequence models consume them.
    Disabled graphs are encoded as empty graphs.
    """
    kind, k = parse_representation(representation)
    n_f = int(np.asarray(sample.f).size)
    if kind == "aca_two_graph":
        g = global_graph if use_global else FlowGraph("global")
        o = sample.ongoing if use_ongoing else FlowGraph("ongoing")
        return b"".join([encode_header(kind, f_aoi, n_f, 2), encode_graph(g), encode_graph(o),
                         encode_features(sample.f)])
    if slices is None or len(slices) != k:
        raise ValueError(f"{representation} needs exactly {k} slice graphs")
    parts = [encode_header(kind, f_aoi, n_f, k)]
    for s in slices:
        parts.append(encode_graph(s))
        parts.append(encode_features(sample.f))
    return b"".join(parts)


def input_bytes(sample: Sample, global_graph: FlowGraph, representation: str = "aca_two_graph",
                slices: Sequence[FlowGraph] | None = None, f_aoi: int = DEFAULT_F_AOI,
                use_global: bool = True, use_ongoing: bool = True) -> int:
    return len(encode_input(sample, global_graph, representation, slices, f_aoi,
                            use_global=use_global, use_ongoing=use_ongoing))
