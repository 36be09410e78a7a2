import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from futuregraph import autodiff as ad
from futuregraph.agl import graph_loss_numpy
from futuregraph.config import ABLATION_ROWS, AblationMask, ModelDims, TrainConfig
from futuregraph.nn import snapshot
from futuregraph.training import (NumericalError, _zscore_stats, ablate, active_parameters, evaluate,
                                  fit_normalization, forward, format_ablation, inference, init_model,
                                  loss_terms, make_batch, normalize_graph, per_sample_graph_loss, predict,
                                  prepare, regression_metrics, train)

SMALL = ModelDims(c=16, c_h=16, heads=4, head_hidden=16)
FEATURE_ONLY, FULL = ABLATION_ROWS[0], ABLATION_ROWS[-1]


def _generic_params(cfg, seed=0):
    # replace the zero-initialised entries so no branch is dead by construction
    rng = np.random.default_rng(seed)
    params = init_model(rng, cfg.dims, 1400.0, 300.0)
    for k, t in params.items():
        if k != "head.scale" and not np.any(t.data):
            t.data = rng.normal(0.0, 0.1, t.shape)
    active = set(active_parameters(cfg.ablation_mask, cfg.direction))
    for k, t in params.items():
        t.requires_grad = k in active
    return params


def test_zscore_passes_constant_features_through():
    mean, std = _zscore_stats(np.array([[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]]))
    np.testing.assert_allclose(mean, [3.0, 0.0])
    np.testing.assert_allclose(std, [math.sqrt(8 / 3), 1.0])


def test_normalization_examples(small_world):
    stats = fit_normalization(small_world.train)
    f = np.stack([s.f for s in small_world.train.samples])
    col = (f.mean(axis=0) - stats.f_mean) / stats.f_std
    np.testing.assert_allclose(col, 0.0, atol=1e-9)
    g = normalize_graph(stats, small_world.global_graph)
    counts = [e.order_count for e in g.edges]
    assert max(counts) == 1.0 and min(counts) > 0.0


def test_stats_never_read_other_splits(small_world):
    before = fit_normalization(small_world.train).as_arrays()
    for s in small_world.test.samples + small_world.val.samples:
        s_f = s.f.copy()
        s.f[:] = 1e9
        s.f, s_f = s_f, s.f
    stats = fit_normalization(small_world.train)
    for k, v in before.items():
        assert np.array_equal(v, stats.as_arrays()[k])
    # mutate the held-out splits for real and refit
    saved = [s.f.copy() for s in small_world.test.samples]
    try:
        for s in small_world.test.samples:
            s.f += 1e6
        after = fit_normalization(small_world.train).as_arrays()
        for k, v in before.items():
            assert np.array_equal(v, after[k])
    finally:
        for s, f in zip(small_world.test.samples, saved):
            s.f[:] = f


def test_fit_normalization_rejects_empty_train(small_world):
    empty = replace(small_world.train, samples=[])
    with pytest.raises(ValueError):
        fit_normalization(empty)


@pytest.mark.parametrize("mask", ABLATION_ROWS, ids=lambda m: m.label())
def test_forward_is_deterministic(small_bundle, mask):
    cfg = TrainConfig(ablation_mask=mask, dims=SMALL)
    params = _generic_params(cfg)
    batch = make_batch(small_bundle.train, np.arange(4))
    a = forward(params, small_bundle.sim, batch, small_bundle.glob, cfg).p_hat.data
    b = forward(params, small_bundle.sim, batch, small_bundle.glob, cfg).p_hat.data
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("direction", ["global_query", "ongoing_query"])
@pytest.mark.parametrize("mask", ABLATION_ROWS, ids=lambda m: m.label())
def test_every_active_parameter_gets_gradient(small_bundle, mask, direction):
    cfg = TrainConfig(ablation_mask=mask, dims=SMALL, direction=direction)
    params = _generic_params(cfg)
    data = small_bundle.train.take(np.arange(8))
    out = forward(params, small_bundle.sim, make_batch(data), small_bundle.glob, cfg)
    loss, _, _ = loss_terms(out, data, cfg, 300.0)
    ad.backward(loss)
    for name in active_parameters(mask, direction):
        g = params[name].grad
        assert g is not None and np.any(g != 0), name


def test_feature_only_row_reads_only_features(small_bundle):
    cfg = TrainConfig(ablation_mask=FEATURE_ONLY, dims=SMALL)
    params = _generic_params(cfg)
    data = small_bundle.train.take(np.arange(6))
    base = forward(params, small_bundle.sim, make_batch(data), small_bundle.glob, cfg).p_hat.data
    scrambled = replace(data, x_on=np.random.default_rng(0).standard_normal(data.x_on.shape),
                        a_on=data.a_on[::-1].copy(), mask_on=~data.mask_on)
    glob = replace(small_bundle.glob, x=small_bundle.glob.x, a_hat=np.eye(len(small_bundle.glob.a_hat)))
    again = forward(params, small_bundle.sim, make_batch(scrambled), glob, cfg).p_hat.data
    assert np.array_equal(base, again)
    moved = replace(data, f=data.f + 0.5)
    assert not np.allclose(forward(params, small_bundle.sim, make_batch(moved), small_bundle.glob, cfg).p_hat.data,
                           base)


def test_zero_lambda_removes_graph_supervision_gradient(small_bundle):
    data = small_bundle.train.take(np.arange(8))
    grads = {}
    for lam in (0.0, 0.1):
        cfg = TrainConfig(lam=lam, dims=SMALL)
        params = _generic_params(cfg)
        out = forward(params, small_bundle.sim, make_batch(data), small_bundle.glob, cfg)
        total, lp, _ = loss_terms(out, data, cfg, 300.0)
        ad.backward(total)
        g_total = params["agl.proj"].grad.copy()
        ad.zero_grad(params.values())
        out = forward(params, small_bundle.sim, make_batch(data), small_bundle.glob, cfg)
        _, lp, _ = loss_terms(out, data, cfg, 300.0)
        ad.backward(lp)
        grads[lam] = g_total - params["agl.proj"].grad
    assert np.array_equal(grads[0.0], np.zeros_like(grads[0.0]))
    assert np.any(grads[0.1] != 0)


def _quick(small_bundle, **kw):
    cfg = TrainConfig(epochs=2, dims=SMALL, **kw)
    return cfg, train(cfg, small_bundle.train, small_bundle.val, small_bundle.glob, small_bundle.sim)


def test_logged_loss_is_sum_of_terms(small_bundle):
    cfg, res = _quick(small_bundle, lam=0.7)
    assert res.steps
    for row in res.steps:
        assert row["loss"] == pytest.approx(row["l_p"] + 0.7 * row["l_graph"], rel=0, abs=1e-12)
        assert row["lam"] == 0.7


def test_same_seed_same_curves_and_frozen_simulator(small_bundle):
    before = snapshot(small_bundle.sim)
    _, a = _quick(small_bundle)
    _, b = _quick(small_bundle)
    assert a.curves == b.curves and a.steps == b.steps
    for k, v in snapshot(small_bundle.sim).items():
        assert v.tobytes() == before[k].tobytes()
    _, c = _quick(small_bundle, seed=1)
    assert c.curves != a.curves


def test_finetune_changes_simulator_and_restores_flags(small_bundle):
    import copy
    sim = copy.deepcopy(small_bundle.sim)
    before = snapshot(sim)
    cfg = TrainConfig(epochs=1, dims=SMALL, finetune_sim=True)
    train(cfg, small_bundle.train, small_bundle.val, small_bundle.glob, sim)
    assert any(not np.array_equal(before[k], v) for k, v in snapshot(sim).items())
    assert not any(t.requires_grad for t in sim.values())


@pytest.mark.parametrize("i", [0, 17, 40])
def test_one_sample_overfits(small_bundle, i):
    # the frozen simulator bounds what the graph alone can express, so the whole pipeline trains here
    import copy
    sim = copy.deepcopy(small_bundle.sim)
    one = small_bundle.train.take([i])
    cfg = TrainConfig(epochs=200, batch_size=1, finetune_sim=True)
    res = train(cfg, one, one.take([]), small_bundle.glob, sim)
    assert len(res.steps) == 200
    pred, _ = predict(res.params, sim, one, small_bundle.glob, cfg)
    assert abs(pred[0] - one.label[0]) < 1.0


def test_nan_loss_aborts_with_diagnostics(small_bundle):
    bad = replace(small_bundle.train, label=small_bundle.train.label.copy())
    bad.label[3] = np.nan
    with pytest.raises(NumericalError, match="non-finite loss"):
        train(TrainConfig(epochs=1, dims=SMALL, batch_size=8), bad, small_bundle.val, small_bundle.glob,
              small_bundle.sim)


def test_train_rejects_empty_and_bad_config(small_bundle):
    with pytest.raises(ValueError):
        train(TrainConfig(dims=SMALL), small_bundle.train.take([]), small_bundle.val, small_bundle.glob,
              small_bundle.sim)
    with pytest.raises(ValueError):
        train(TrainConfig(learning_rate=0.0, dims=SMALL), small_bundle.train, small_bundle.val,
              small_bundle.glob, small_bundle.sim)
    with pytest.raises(ValueError):
        train(TrainConfig(lam=-1.0, dims=SMALL), small_bundle.train, small_bundle.val, small_bundle.glob,
              small_bundle.sim)


def test_ongoing_query_builds_global_sized_graph_on_ongoing_rows(small_bundle):
    cfg = TrainConfig(direction="ongoing_query", dims=SMALL)
    params = _generic_params(cfg)
    data = small_bundle.train.take(np.arange(4))
    out = forward(params, small_bundle.sim, make_batch(data), small_bundle.glob, cfg)
    big_m = len(small_bundle.glob.x)
    assert out.a_future.shape == (4, big_m, big_m)
    for i in range(4):
        rows = data.on_idx[i][data.on_idx[i] >= 0]
        assert out.a_mask[i].sum() == len(rows)
        off = np.ones(big_m, dtype=bool)
        off[rows] = False
        assert np.all(out.a_future.data[i][off] == 0)
        np.testing.assert_allclose(out.a_future.data[i][rows].sum(axis=1), 1.0, atol=1e-9)


def test_inference_context_restores_flags():
    params = _generic_params(TrainConfig(dims=SMALL))
    flags = {k: t.requires_grad for k, t in params.items()}
    with inference(params):
        assert not any(t.requires_grad for t in params.values())
    assert {k: t.requires_grad for k, t in params.items()} == flags


def test_metric_examples():
    y = np.array([100.0, 250.0, 900.0])
    assert regression_metrics(y, y) == (0.0, 0.0, 0.0)
    mae, rmse, _ = regression_metrics(y, y + 10.0)
    assert mae == pytest.approx(10.0, abs=1e-12) and rmse == pytest.approx(10.0, abs=1e-12)
    with pytest.raises(ValueError):
        regression_metrics(np.array([]), np.array([]))


def test_mape_ignores_labels_under_floor():
    _, _, mape = regression_metrics(np.array([30.0, 100.0]), np.array([60.0, 110.0]))
    assert mape == pytest.approx(0.1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(60, 5000), st.floats(0, 5000)), min_size=1, max_size=40))
def test_rmse_never_below_mae(pairs):
    y, yhat = np.array(pairs).T
    mae, rmse, mape = regression_metrics(y, yhat)
    assert rmse >= mae - 1e-9 and mae >= 0 and mape >= 0


def test_evaluate_report(small_bundle):
    cfg, res = _quick(small_bundle)
    rep = evaluate(res.params, small_bundle.sim, small_bundle.test, small_bundle.glob, cfg)
    pred, a = predict(res.params, small_bundle.sim, small_bundle.test, small_bundle.glob, cfg)
    err = small_bundle.test.label - pred
    assert rep.mae == pytest.approx(np.mean(np.abs(err)), rel=1e-12)
    assert rep.rmse == pytest.approx(np.sqrt(np.mean(err ** 2)), rel=1e-12)
    assert rep.rmse >= rep.mae >= 0 and rep.runtime_per_batch > 0 and rep.input_bytes > 0
    per = per_sample_graph_loss(a, small_bundle.test)
    assert per[0] == graph_loss_numpy(a[0], small_bundle.test.a_truth_norm[0], small_bundle.test.row_mask[0])
    with pytest.raises(ValueError):
        evaluate(res.params, small_bundle.sim, small_bundle.test.take([]), small_bundle.glob, cfg)


def test_disabled_graphs_shrink_input_bytes(small_bundle):
    cfg, res = _quick(small_bundle)
    full = evaluate(res.params, small_bundle.sim, small_bundle.test, small_bundle.glob, cfg, timing_batches=1)
    cfg0 = replace(cfg, ablation_mask=AblationMask(False, False, True, True))
    bare = evaluate(res.params, small_bundle.sim, small_bundle.test, small_bundle.glob, cfg0, timing_batches=1)
    assert bare.input_bytes < full.input_bytes


def test_ablation_table_rows_follow_mask_order(small_bundle):
    base = TrainConfig(epochs=1, dims=SMALL)
    table = ablate(base, small_bundle.train, small_bundle.val, small_bundle.test, small_bundle.glob,
                   small_bundle.sim, seeds=(0,))
    assert [r.mask for r in table] == list(ABLATION_ROWS)
    assert [m.label() for m in ABLATION_ROWS] == ["----", "x---", "-x--", "xx--", "xxx-", "xxxx"]
    text = format_ablation(table)
    assert len(text.splitlines()) == 2 + len(ABLATION_ROWS)


@pytest.mark.slow
def test_default_run_beats_mean_baseline(default_bundle, default_full_run):
    _, res = default_full_run
    baseline = np.mean(np.abs(default_bundle.val.label - default_bundle.train.label.mean()))
    assert res.curves[-1]["val_mae"] < baseline
    assert res.best_val_mae < baseline


@pytest.mark.slow
def test_graph_loss_falls_over_first_five_epochs(default_full_run):
    _, res = default_full_run
    first = [row["train_graph_loss"] for row in res.curves[:5]]
    assert all(b < a for a, b in zip(first, first[1:])), first
