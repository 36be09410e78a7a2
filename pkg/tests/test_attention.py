import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from futuregraph import autodiff as ad
from futuregraph.autodiff import ShapeError, Tensor
from futuregraph.attention import (cat_block, cross_attention, influence_cat, init_cat_block, inter_graph_cat,
                                   zero_block)


def _block(seed=0, width=8, heads=2):
    return init_cat_block(np.random.default_rng(seed), width, heads)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 7), st.integers(0, 6))
def test_attention_rows_sum_to_one_over_unmasked_keys(seed, a, b, n_masked):
    rng = np.random.default_rng(seed)
    p = init_cat_block(rng, 8, 4)
    mask = np.ones(b, dtype=bool)
    mask[rng.permutation(b)[:min(n_masked, b - 1)]] = False
    _, w = cross_attention(p, Tensor(3 * rng.standard_normal((a, 8))), Tensor(3 * rng.standard_normal((b, 8))),
                           mask, heads=4, return_weights=True)
    np.testing.assert_allclose(w.data.sum(axis=-1), 1.0, atol=1e-9)
    assert np.all(w.data[..., ~mask] == 0.0)


def test_single_key_returns_projected_value_for_every_query():
    p = _block()
    rng = np.random.default_rng(1)
    kv = Tensor(rng.standard_normal((1, 8)))
    out = cross_attention(p, Tensor(rng.standard_normal((4, 8))), kv, heads=2).data
    expect = (kv.data @ p["wv"].data) @ p["wo"].data + p["bo"].data
    np.testing.assert_allclose(out, np.repeat(expect, 4, axis=0), atol=1e-12)


def test_single_head_two_by_two_by_hand():
    p = init_cat_block(np.random.default_rng(0), 2, 1)
    p["wq"].data = np.array([[1.0, 0.5], [0.0, 2.0]])
    p["wk"].data = np.array([[0.5, 0.0], [1.0, 1.0]])
    p["wv"].data = np.array([[2.0, -1.0], [0.0, 1.0]])
    p["wo"].data = np.eye(2)
    q_in = np.array([[1.0, 2.0], [-1.0, 0.5]])
    kv_in = np.array([[0.5, -0.5], [2.0, 1.0]])
    out = cross_attention(p, Tensor(q_in), Tensor(kv_in), heads=1).data
    for i in range(2):
        q = q_in[i] @ p["wq"].data
        s = [q @ (kv_in[j] @ p["wk"].data) / math.sqrt(2) for j in range(2)]
        e = [math.exp(x) for x in s]
        w = [x / sum(e) for x in e]
        v = sum(w[j] * (kv_in[j] @ p["wv"].data) for j in range(2))
        np.testing.assert_allclose(out[i], v, rtol=0, atol=1e-12)


def test_multi_head_matches_naive_per_head_loop():
    rng = np.random.default_rng(6)
    p = _block(6, 8, 4)
    q_in, kv_in = rng.standard_normal((3, 8)), rng.standard_normal((5, 8))
    out = cross_attention(p, Tensor(q_in), Tensor(kv_in), heads=4).data
    q, k, v = q_in @ p["wq"].data, kv_in @ p["wk"].data, kv_in @ p["wv"].data
    heads = []
    for h in range(4):
        sl = slice(2 * h, 2 * h + 2)
        s = q[:, sl] @ k[:, sl].T / math.sqrt(2)
        w = np.exp(s - s.max(axis=1, keepdims=True))
        heads.append((w / w.sum(axis=1, keepdims=True)) @ v[:, sl])
    expect = np.concatenate(heads, axis=1) @ p["wo"].data + p["bo"].data
    np.testing.assert_allclose(out, expect, atol=1e-12)


def test_zeroed_block_is_identity_on_query():
    rng = np.random.default_rng(2)
    p = _block(2)
    zero_block(p)
    e1 = rng.standard_normal((5, 8))
    out = cat_block(p, Tensor(e1), Tensor(rng.standard_normal((3, 8))), heads=2).data
    assert np.array_equal(out, e1)


@pytest.mark.parametrize("b", [1, 3, 9])
def test_block_output_has_query_shape(b):
    rng = np.random.default_rng(b)
    out = cat_block(_block(), Tensor(rng.standard_normal((4, 8))), Tensor(rng.standard_normal((b, 8))), heads=2)
    assert out.shape == (4, 8)


def test_block_is_invariant_to_key_order():
    rng = np.random.default_rng(3)
    p = _block(3)
    e1, e2 = rng.standard_normal((4, 8)), rng.standard_normal((6, 8))
    mask = np.array([1, 1, 0, 1, 0, 1], dtype=bool)
    perm = rng.permutation(6)
    a = cat_block(p, Tensor(e1), Tensor(e2), mask, heads=2).data
    b = cat_block(p, Tensor(e1), Tensor(e2[perm]), mask[perm], heads=2).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_masked_keys_have_no_influence():
    rng = np.random.default_rng(4)
    p = _block(4)
    e1, e2 = rng.standard_normal((4, 8)), rng.standard_normal((5, 8))
    mask = np.array([1, 0, 1, 1, 0], dtype=bool)
    junk = e2.copy()
    junk[~mask] = 1e3
    a = cat_block(p, Tensor(e1), Tensor(e2), mask, heads=2).data
    b = cat_block(p, Tensor(e1), Tensor(junk), mask, heads=2).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_cat_block_gradcheck():
    rng = np.random.default_rng(5)
    p = _block(5)
    for k in ("bo", "mlp_b1", "mlp_b2", "ln1_b", "ln2_b"):
        p[k].data = rng.normal(0, 0.1, p[k].shape)
    e1 = Tensor(rng.standard_normal((3, 8)), requires_grad=True)
    e2 = Tensor(rng.standard_normal((4, 8)), requires_grad=True)
    mask = np.array([1, 1, 0, 1], dtype=bool)
    r = Tensor(rng.standard_normal((3, 8)))
    err = ad.gradcheck(lambda: ad.sum_(cat_block(p, e1, e2, mask, heads=2) * r), [e1, e2, *p.values()])
    assert err < 1e-3


def test_directions_and_shapes():
    rng = np.random.default_rng(7)
    p = _block(7)
    eg, eo = Tensor(rng.standard_normal((20, 8))), Tensor(rng.standard_normal((10, 8)))
    assert inter_graph_cat(p, eg, eo, None, "global_query", heads=2).shape == (20, 8)
    assert inter_graph_cat(p, eg, eo, None, "ongoing_query", heads=2).shape == (10, 8)
    with pytest.raises(ValueError, match="direction"):
        inter_graph_cat(p, eg, eo, None, "sideways", heads=2)


def test_directions_give_transposed_scores():
    rng = np.random.default_rng(8)
    p = init_cat_block(rng, 8, 1)
    # shared query/key projections make the two score matrices transposes
    p["wk"].data = p["wq"].data.copy()
    eg, eo = Tensor(rng.standard_normal((5, 8))), Tensor(rng.standard_normal((3, 8)))
    _, wg = inter_graph_cat(p, eg, eo, None, "global_query", heads=1, return_weights=True)
    _, wo = inter_graph_cat(p, eg, eo, None, "ongoing_query", heads=1, return_weights=True)
    diff = np.log(wg.data[0]) - np.log(wo.data[0]).T
    # softmax normalisers only add a per-row and a per-column constant
    centred = diff - diff.mean(axis=0, keepdims=True) - diff.mean(axis=1, keepdims=True) + diff.mean()
    np.testing.assert_allclose(centred, 0.0, atol=1e-10)


def test_influence_rows_over_feature_tokens_sum_to_one():
    rng = np.random.default_rng(9)
    p = _block(9)
    out, w = influence_cat(p, Tensor(rng.standard_normal((20, 8))), Tensor(rng.standard_normal((12, 8))),
                           heads=2, return_weights=True)
    assert out.shape == (20, 8) and w.shape == (2, 20, 12)
    np.testing.assert_allclose(w.data.sum(axis=-1), 1.0, atol=1e-12)


def test_influence_perturbation_tracks_attention_mass():
    rng = np.random.default_rng(10)
    p = _block(10, 8, 1)
    e, tok = rng.standard_normal((6, 8)), rng.standard_normal((12, 8))
    # ignore the MLP so only the attention path responds
    for k in ("mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
        p[k].data[:] = 0.0
    base, w = influence_cat(p, Tensor(e), Tensor(tok), heads=1, return_weights=True)
    delta = np.zeros_like(tok)
    delta[4] = 1e-7 * rng.standard_normal(8)
    moved = influence_cat(p, Tensor(e), Tensor(tok + delta), heads=1).data - base.data
    mass = w.data[0, :, 4]
    size = np.linalg.norm(moved, axis=1)
    # rows attending more to token 4 move more
    assert np.corrcoef(mass, size)[0, 1] > 0.5


def test_width_must_divide_heads():
    with pytest.raises(ShapeError):
        init_cat_block(np.random.default_rng(0), 10, 4)


def test_mask_length_mismatch():
    p = _block()
    with pytest.raises(ShapeError):
        cross_attention(p, Tensor(np.zeros((2, 8))), Tensor(np.zeros((3, 8))), np.ones(4, dtype=bool), heads=2)
