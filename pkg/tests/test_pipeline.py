import numpy as np
import pytest

from twostage import metrics
from twostage.dataset import Dataset, derive_seed, make_rng, take_subset
from twostage.model import NetConfig, Network, TrainConfig, extract_features, init, train
from twostage.pipeline import ConfigError, StrategySpec, StrategyTrace, evaluate, run_strategy
from twostage.resampling import rus_with_provenance

FAST = TrainConfig(epochs=2, learning_rate=1e-3)


def net_cfg(ds):
    return NetConfig(ds.dim, (8, 4), 6, ds.num_classes)


@pytest.mark.parametrize("name", ["baseline", "is:rus", "is:smote", "fs:ros", "ts:smote+rus", "ts:smote+smote"])
def test_parse_round_trip(name):
    spec = StrategySpec.parse(name)
    assert spec.name == name
    assert StrategySpec.parse(name.upper()) == spec


@pytest.mark.parametrize("name", ["ts:none+none", "is", "xs:rus", "ts:smote", "is:adasyn", "fs:"])
def test_parse_errors(name):
    with pytest.raises(ConfigError):
        StrategySpec.parse(name)


def test_smote_k_is_carried():
    assert StrategySpec.parse("ts:smote+smote", k=3).first.k == 3


def test_baseline_is_plain_training(make_blobs):
    ds = make_blobs([20, 20])
    seed = 17
    got = run_strategy(ds, StrategySpec(), net_cfg(ds), FAST, seed=seed)
    net = init(net_cfg(ds), make_rng(derive_seed(seed, "init")))
    want = train(net, ds, TrainConfig(epochs=2, learning_rate=1e-3, seed=derive_seed(seed, "s1.train")))
    for a, b in zip(got.body_params + got.head_params, want.body_params + want.head_params):
        assert np.array_equal(a, b)


def test_fs_rus_fine_tunes_on_minority_count(make_blobs):
    ds = make_blobs([100, 10])
    trace = StrategyTrace()
    run_strategy(ds, StrategySpec.parse("fs:rus"), net_cfg(ds), FAST, seed=1, trace=trace)
    assert trace.stage1_rows == 110
    assert trace.stage2_rows == 20


def test_ts_sizes_use_original_data(make_blobs):
    ds = make_blobs([50, 20, 10])
    trace = StrategyTrace()
    run_strategy(ds, StrategySpec.parse("ts:smote+rus"), net_cfg(ds), FAST, seed=2, trace=trace)
    assert trace.stage1_rows == 150
    assert trace.stage2_source_rows == 80
    assert trace.stage2_rows == 30


@pytest.mark.parametrize("name", ["fs:smote", "ts:smote+rus", "ts:ros+smote"])
def test_stage2_only_touches_head(make_blobs, name):
    ds = make_blobs([30, 12, 6])
    trace = StrategyTrace()
    net = run_strategy(ds, StrategySpec.parse(name), net_cfg(ds), FAST, seed=3, trace=trace)
    for a, b in zip(trace.body_after_stage1, net.body_params):
        assert np.array_equal(a, b)


def test_stage_substreams_are_independent(make_blobs):
    ds = make_blobs([30, 10])
    t1, t2 = StrategyTrace(), StrategyTrace()
    run_strategy(ds, StrategySpec.parse("ts:smote+rus"), net_cfg(ds), FAST, seed=4, trace=t1)
    run_strategy(ds, StrategySpec.parse("ts:smote+ros"), net_cfg(ds), FAST, seed=4, trace=t2)
    for a, b in zip(t1.body_after_stage1, t2.body_after_stage1):
        assert np.array_equal(a, b)


def test_rus_commutes_with_feature_extraction(make_blobs):
    ds = make_blobs([25, 8, 13], dim=3)
    net = init(NetConfig(3, (6, 5), 4, 3), make_rng(0))
    feats = Dataset(extract_features(net, ds.features), ds.labels, 3)
    after, prov = rus_with_provenance(feats, make_rng(9))
    before = extract_features(net, take_subset(ds, prov.source).features)
    assert np.array_equal(after.features, before)


def _constant_net(cfg, label):
    net = init(cfg, make_rng(0))
    head = [np.zeros_like(p) for p in net.head_params]
    head[3][label] = 1.0
    return Network(cfg, net.body_params, head)


def test_evaluate_constant_predictor():
    ds = Dataset(np.random.default_rng(0).normal(size=(80, 4)), np.repeat(np.arange(8), 10), 8)
    ev = evaluate(_constant_net(NetConfig(4, (3,), 3, 8), 2), ds)
    assert ev.avacc == pytest.approx(1 / 8)
    assert ev.mavg == 0.0
    assert ev.acc == pytest.approx(1 / 8)


def test_evaluate_perfect_and_recomputed(make_blobs):
    ds = make_blobs([60, 60], spread=0.3)
    net = run_strategy(ds, StrategySpec(), net_cfg(ds), TrainConfig(epochs=40, learning_rate=1e-2), seed=0)
    ev = evaluate(net, ds)
    assert (ev.acc, ev.avacc, ev.cba, ev.mavg) == (1.0, 1.0, 1.0, 1.0)
    assert ev.avacc == metrics.avacc(ev.confusion)
    assert ev.cba == metrics.cba(ev.confusion)
    assert ev.mavg == metrics.mavg(ev.confusion)
    assert ev.acc == metrics.accuracy(ev.confusion)


def test_evaluate_requires_every_class():
    ds = Dataset(np.zeros((3, 4)), np.array([0, 0, 1]), 3)
    with pytest.raises(metrics.MetricError):
        evaluate(_constant_net(NetConfig(4, (3,), 3, 3), 0), ds)
