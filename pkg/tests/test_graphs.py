import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from futuregraph.graphs import (AoiNode, BadMagicError, Dataset, FlowEdge, FlowGraph, Sample, SchemaError,
                                TruncatedFileError, VersionMismatchError, aggregate_edges, dumps_dataset,
                                encode_graph, fixed_overhead, input_bytes, load_dataset, loads_dataset,
                                save_dataset, datasets_equal, validate)
from futuregraph.world import slice_graphs


def _global(n=4, f_aoi=8):
    nodes = [AoiNode(i, np.arange(f_aoi, dtype=float) + i) for i in range(n)]
    edges = [FlowEdge(0, 1, 3.0, 600.0), FlowEdge(2, 3, 1.5, 900.0)]
    return FlowGraph("global", nodes, edges)


def _sample(g, minute=0, ongoing=None):
    m = len(g.nodes)
    if ongoing is None:
        ongoing = FlowGraph("ongoing", [AoiNode(0, g.nodes[0].features.copy()),
                                        AoiNode(1, g.nodes[1].features.copy())],
                            [FlowEdge(0, 1, 2.0, 300.0)])
    a = np.zeros((m, m))
    a[0, 1] = 700.0
    return Sample(0, minute, ongoing, "g", np.linspace(0, 1, 12), 350.0, a)


def test_well_formed_sample_has_no_violations():
    g = _global()
    assert validate(_sample(g), g) == []


def test_foreign_ongoing_node_is_reported_by_id():
    g = _global()
    s = _sample(g, ongoing=FlowGraph("ongoing", [AoiNode(0, np.zeros(8)), AoiNode(42, np.zeros(8))],
                                     [FlowEdge(0, 42, 1.0, 10.0)]))
    bad = validate(s, g)
    assert len(bad) == 1 and "42" in bad[0]


def test_negative_truth_entry_is_reported():
    g = _global()
    s = _sample(g)
    s.a_truth[2, 3] = -1.0
    assert len(validate(s, g)) == 1


def test_wrong_feature_length_is_reported():
    g = _global()
    s = _sample(g)
    s.f = np.zeros(5)
    assert any("length" in v for v in validate(s, g))


def test_aggregate_edges_sums_counts_and_weights_times():
    out = aggregate_edges([FlowEdge(0, 1, 1.0, 100.0), FlowEdge(0, 1, 3.0, 200.0), FlowEdge(1, 0, 1.0, 50.0)])
    merged = {(e.src, e.dst): e for e in out}
    assert merged[(0, 1)].order_count == 4.0
    assert merged[(0, 1)].avg_delivery_time == pytest.approx(175.0)
    assert len(out) == 2


reals = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, deadline=None)
@given(st.lists(reals, min_size=8, max_size=8), reals, st.floats(0, 1e6), st.integers(0, 3))
def test_dataset_round_trip_is_bit_exact(feat, fval, label, n_samples):
    g = _global()
    g.nodes[0].features = np.array(feat)
    samples = []
    for i in range(n_samples):
        s = _sample(g, minute=i)
        s.f = s.f + fval * 1e-3
        s.label_pressure = label + 1e-7
        samples.append(s)
    ds = Dataset(8, 12, g, samples)
    back = loads_dataset(dumps_dataset(ds))
    assert datasets_equal(ds, back)
    assert np.asarray(back.global_graph.nodes[0].features).tobytes() == np.array(feat).tobytes()


def test_empty_dataset_is_header_only(tmp_path):
    path = tmp_path / "empty.jsonl"
    save_dataset(Dataset(8, 12, None, []), path)
    assert len(path.read_text().splitlines()) == 1
    back = load_dataset(path)
    assert back.samples == [] and back.global_graph is None


def test_load_errors_are_distinct():
    text = dumps_dataset(Dataset(8, 12, _global(), [_sample(_global())]))
    header, rest = text.split("\n", 1)
    h = json.loads(header)
    with pytest.raises(BadMagicError):
        loads_dataset(json.dumps({**h, "magic": "NOPE"}) + "\n" + rest)
    with pytest.raises(VersionMismatchError):
        loads_dataset(json.dumps({**h, "version": 99}) + "\n" + rest)
    with pytest.raises(TruncatedFileError):
        loads_dataset(text[: len(text) // 2])
    with pytest.raises(SchemaError):
        loads_dataset(json.dumps({k: v for k, v in h.items() if k != "f_aoi"}) + "\n" + rest)
    with pytest.raises(SchemaError):
        loads_dataset(text + '{"extra": 1}\n')


def _brute_graph_bytes(g):
    f = len(g.nodes[0].features) if g.nodes else 0
    return 4 + 4 + len(g.nodes) * (4 + 8 * f) + 4 + len(g.edges) * (4 + 4 + 8 + 8)


def test_input_bytes_matches_layout_count():
    g = _global()
    s = _sample(g)
    expect = 16 + _brute_graph_bytes(g) + _brute_graph_bytes(s.ongoing) + 4 + 8 * 12
    assert input_bytes(s, g) == expect


def test_empty_ongoing_graph_costs_global_plus_fixed_header():
    g = _global()
    s = _sample(g, ongoing=FlowGraph("ongoing"))
    assert input_bytes(s, g) == len(encode_graph(g)) + fixed_overhead(12)


def test_unknown_representation_rejected():
    g = _global()
    with pytest.raises(ValueError, match="unknown representation"):
        input_bytes(_sample(g), g, "sequence_0_slices")
    with pytest.raises(ValueError, match="unknown representation"):
        input_bytes(_sample(g), g, "video")


def test_input_bytes_is_pure():
    g = _global()
    s = _sample(g)
    before = dumps_dataset(Dataset(8, 12, g, [s]))
    assert input_bytes(s, g) == input_bytes(s, g)
    assert dumps_dataset(Dataset(8, 12, g, [s])) == before


def test_two_graph_input_is_smaller_than_ten_slices(small_world):
    g = small_world.global_graph
    for s in small_world.test.samples[:10]:
        slices = slice_graphs(small_world.run, s.minute_index, 10, g)
        assert input_bytes(s, g) < input_bytes(s, g, "sequence_10_slices", slices)


def test_binary_encoding_is_little_endian_u32_counts():
    g = FlowGraph("ongoing", [AoiNode(7, np.array([1.5]))], [FlowEdge(7, 7, 2.0, 3.0)])
    raw = encode_graph(g)
    assert struct.unpack_from("<II", raw, 0) == (1, 1)
    assert struct.unpack_from("<I", raw, 8) == (7,)
    assert struct.unpack_from("<d", raw, 12) == (1.5,)
    assert struct.unpack_from("<IIIdd", raw, 20) == (1, 7, 7, 2.0, 3.0)
