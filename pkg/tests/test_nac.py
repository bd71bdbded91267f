"""Comparator tests: propagation matrix, hand-computed GCN outputs, pair
construction, training behavior, gradient checks, and model serialization.
"""
import json
import math

import numpy as np
import pytest

from ctnas.nac import (ArchCodec, LabeledPair, NacComparator, NacConfig,
                       NacParams, build_pairs, compare, compare_many, embed,
                       fc_width, forward_pairs, gcn_forward, init_nac,
                       load_nac, nac_to_json, norm_adjacency, pair_loss,
                       save_nac, train_nac)
from ctnas.optim import init_adam
from ctnas.oracle import SyntheticOracle
from ctnas.space import IN, OUT, Architecture, SpaceSpec, arch_key, enumerate_space
from ctnas.tensor import grad_check

TINY = SpaceSpec(max_nodes=3, op_vocab=(IN, "conv3", OUT), max_edges=9)
SMALL = SpaceSpec(max_nodes=4, op_vocab=(IN, "conv3", "conv1", OUT), max_edges=9)
DESK = SpaceSpec(max_nodes=5, op_vocab=(IN, "conv3", "conv1", OUT), max_edges=9)

CHAIN3 = Architecture(n=3, ops=(IN, "conv3", OUT),
                      adj=((0, 1, 0), (0, 0, 1), (0, 0, 0)))
LINK2 = Architecture(n=2, ops=(IN, OUT), adj=((0, 1), (0, 0)))


def tiny_params(w_fc, d=1, readout="flatten", raw=False):
    """Fixed tiny comparator: emb rows 1,2,3 and PAD 0, identity weights."""
    cfg = NacConfig(d=d, raw_adjacency=raw, readout=readout)
    from ctnas.tensor import Tensor
    return NacParams(
        spec=TINY, cfg=cfg,
        emb=Tensor(np.array([[1.0], [2.0], [3.0], [0.0]])),
        W0=Tensor(np.array([[1.0]])),
        W1=Tensor(np.array([[1.0]])),
        W_fc=Tensor(np.asarray(w_fc, dtype=np.float64)),
    )


# -- propagation matrix ---------------------------------------------------------


def test_norm_adjacency_chain():
    adj = np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=np.float64)
    a_hat = norm_adjacency(adj)
    want = np.array([[1.0, 0.0, 0.0],
                     [0.5, 0.5, 0.0],
                     [0.0, 0.5, 0.5]])
    np.testing.assert_allclose(a_hat, want)


def test_norm_adjacency_rows_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        adj = np.triu((rng.random((6, 6)) < 0.5).astype(np.float64), k=1)
        rows = norm_adjacency(adj).sum(axis=1)
        np.testing.assert_allclose(rows, np.ones(6), atol=1e-12)


def test_norm_adjacency_raw_passthrough():
    adj = np.array([[0, 1], [0, 0]], dtype=np.float64)
    np.testing.assert_array_equal(norm_adjacency(adj, raw=True), adj)


def test_gcn_forward_hand_computed_chain():
    # chain IN -> conv3 -> OUT with scalar features 1, 2, 3
    params = tiny_params(np.zeros((6, 1)))
    codec = ArchCodec(TINY, params.cfg)
    a_hat, ids = codec.encode(CHAIN3)
    z = gcn_forward(a_hat, params.emb.data[ids], params)
    np.testing.assert_allclose(z, [[1.0], [1.25], [2.0]])


def test_gcn_forward_hand_computed_padded():
    # IN -> OUT with one PAD slot; the PAD row stays zero
    params = tiny_params(np.zeros((6, 1)))
    codec = ArchCodec(TINY, params.cfg)
    a_hat, ids = codec.encode(LINK2)
    z = gcn_forward(a_hat, params.emb.data[ids], params)
    np.testing.assert_allclose(z, [[1.0], [1.5], [0.0]])


def test_gcn_forward_raw_adjacency_hand_computed():
    params = tiny_params(np.zeros((6, 1)), raw=True)
    codec = ArchCodec(TINY, params.cfg)
    a_hat, ids = codec.encode(CHAIN3)
    z = gcn_forward(a_hat, params.emb.data[ids], params)
    # strict-predecessor sums: no self loop, IN row ends up empty
    np.testing.assert_allclose(z, [[3.0], [0.0], [0.0]])


def test_gcn_forward_shape_mismatch():
    params = tiny_params(np.zeros((6, 1)))
    with pytest.raises(ValueError):
        gcn_forward(np.eye(3), np.zeros((4, 1)), params)


# -- compare --------------------------------------------------------------------


def test_compare_zero_head_gives_half():
    params = tiny_params(np.zeros((6, 1)))
    assert compare(CHAIN3, LINK2, params) == 0.5
    assert compare(LINK2, CHAIN3, params) == 0.5


def test_compare_hand_computed_logit():
    # head reads Z[2] of each side: logit = 2.0 - 0.0 = 2
    w = np.array([[0.0], [0.0], [1.0], [0.0], [0.0], [-1.0]])
    params = tiny_params(w)
    p = compare(CHAIN3, LINK2, params)
    assert p == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), rel=1e-12)
    q = compare(LINK2, CHAIN3, params)
    assert q == pytest.approx(1.0 / (1.0 + math.exp(2.0)), rel=1e-12)
    assert p + q == pytest.approx(1.0, rel=1e-12)


def test_compare_mean_readout_hand_computed():
    w = np.array([[1.0], [-1.0]])
    params = tiny_params(w, readout="mean")
    logit = (1.0 + 1.25 + 2.0) / 3.0 - (1.0 + 1.5 + 0.0) / 3.0
    assert compare(CHAIN3, LINK2, params) == pytest.approx(
        1.0 / (1.0 + math.exp(-logit)), rel=1e-12)


def test_compare_many_matches_single_calls():
    rng = np.random.default_rng(7)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    oracle = SyntheticOracle(SMALL, 0)
    archs = oracle.sample_archs(12, rng)
    pairs = [(archs[i], archs[j]) for i in range(6) for j in range(6, 12)]
    batched = compare_many(pairs, params)
    singles = np.array([compare(a, b, params) for a, b in pairs])
    np.testing.assert_allclose(batched, singles, rtol=1e-12)


def test_forward_pairs_matches_compare_many():
    rng = np.random.default_rng(3)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    codec = ArchCodec(SMALL, params.cfg)
    oracle = SyntheticOracle(SMALL, 1)
    archs = oracle.sample_archs(8, rng)
    pairs = [(archs[i], archs[i + 4]) for i in range(4)]
    diff = forward_pairs([a for a, _ in pairs], [b for _, b in pairs],
                         params, codec)
    np.testing.assert_allclose(diff.data[:, 0], compare_many(pairs, params),
                               rtol=1e-12)


def test_embed_uses_pad_row_for_short_archs():
    params = tiny_params(np.zeros((6, 1)))
    x = embed(LINK2, params)
    np.testing.assert_array_equal(x, params.emb.data[[0, 2, 3]])


def test_codec_caches_by_key():
    codec = ArchCodec(TINY, NacConfig(d=1))
    first = codec.encode(CHAIN3)
    again = codec.encode(Architecture(n=3, ops=(IN, "conv3", OUT),
                                      adj=((0, 1, 0), (0, 0, 1), (0, 0, 0))))
    assert first[0] is again[0] and first[1] is again[1]


def test_fc_width():
    assert fc_width(TINY, NacConfig(d=1)) == 6
    assert fc_width(TINY, NacConfig(d=1, readout="mean")) == 2
    assert fc_width(DESK, NacConfig(d=32)) == 2 * 5 * 32
    with pytest.raises(ValueError):
        fc_width(TINY, NacConfig(d=1, readout="max"))


def test_init_nac_shapes():
    rng = np.random.default_rng(0)
    params = init_nac(DESK, rng, NacConfig(d=16))
    assert params.emb.data.shape == (5, 16)  # 4 ops + PAD
    assert params.W0.data.shape == (16, 16)
    assert params.W1.data.shape == (16, 16)
    assert params.W_fc.data.shape == (2 * 5 * 16, 1)


# -- pair construction ----------------------------------------------------------


def test_build_pairs_counts_and_labels():
    archs = list(enumerate_space(SMALL))[:4]
    recs = [(archs[0], 0.9), (archs[1], 0.8), (archs[2], 0.85), (archs[3], 0.8)]
    plain = build_pairs(recs, augment=False)
    assert len(plain) == 6
    assert plain[0].a is archs[0] and plain[0].b is archs[1] and plain[0].y == 1
    doubled = build_pairs(recs, augment=True)
    assert len(doubled) == 12
    # swapped copy follows its original with the complement label
    assert doubled[1].a is archs[1] and doubled[1].b is archs[0]
    assert doubled[1].y == 0
    for i in range(0, 12, 2):
        assert doubled[i].y + doubled[i + 1].y == 1
        assert all(p.source == "ground_truth" for p in doubled)


def test_build_pairs_tie_goes_to_first():
    archs = list(enumerate_space(SMALL))[:2]
    pairs = build_pairs([(archs[0], 0.8), (archs[1], 0.8)], augment=True)
    assert pairs[0].y == 1 and pairs[1].y == 0


def test_build_pairs_full_budget_count():
    archs = list(enumerate_space(DESK))[:423]
    recs = [(a, i / 1000.0) for i, a in enumerate(archs)]
    assert len(build_pairs(recs, augment=False)) == 89_253
    assert len(build_pairs(recs, augment=True)) == 178_506


def test_build_pairs_rejects_duplicates():
    arch = next(iter(enumerate_space(SMALL)))
    with pytest.raises(ValueError, match="duplicate"):
        build_pairs([(arch, 0.8), (arch, 0.9)])


def test_pair_loss_zero_head_is_log2():
    params = tiny_params(np.zeros((6, 1)))
    codec = ArchCodec(TINY, params.cfg)
    batch = [LabeledPair(CHAIN3, LINK2, 1), LabeledPair(LINK2, CHAIN3, 0)]
    assert pair_loss(batch, params, codec).item() == pytest.approx(
        math.log(2.0), rel=1e-12)


# -- training -------------------------------------------------------------------


def _training_setup(seed, n_archs=16, d=8):
    rng = np.random.default_rng(seed)
    oracle = SyntheticOracle(DESK, 3)
    archs = oracle.sample_archs(n_archs, rng)
    recs = [(a, oracle.mean_acc(a)) for a in archs]
    pairs = build_pairs(recs, augment=True)
    params = init_nac(DESK, rng, NacConfig(d=d))
    adam = init_adam(params.tensors(), lr=2e-4, weight_decay=5e-4)
    return pairs, params, adam, rng


def test_train_nac_loss_decreases():
    pairs, params, adam, rng = _training_setup(0)
    params, losses = train_nac(pairs, params, adam, 64, 200, rng)
    assert np.mean(losses[-20:]) < np.mean(losses[:20])
    assert all(np.isfinite(losses))


def test_train_nac_deterministic():
    runs = []
    for _ in range(2):
        pairs, params, adam, rng = _training_setup(11)
        params, losses = train_nac(pairs, params, adam, 32, 30, rng)
        runs.append((losses, [t.data.copy() for t in params.tensors()]))
    assert runs[0][0] == runs[1][0]
    for a, b in zip(runs[0][1], runs[1][1]):
        np.testing.assert_array_equal(a, b)


def test_train_nac_zero_lr_keeps_params():
    pairs, params, _, rng = _training_setup(2)
    adam = init_adam(params.tensors(), lr=0.0, weight_decay=5e-4)
    before = [t.data.copy() for t in params.tensors()]
    params, _ = train_nac(pairs, params, adam, 32, 5, rng)
    for t, b in zip(params.tensors(), before):
        np.testing.assert_array_equal(t.data, b)


def test_train_nac_rejects_empty():
    _, params, adam, rng = _training_setup(0)
    with pytest.raises(ValueError):
        train_nac([], params, adam, 32, 5, rng)


def test_train_nac_pseudo_mix_changes_stream():
    pairs, params, adam, rng = _training_setup(5)
    pseudo = [LabeledPair(p.a, p.b, p.y, source="pseudo") for p in pairs[:8]]
    params, losses = train_nac(pairs, params, adam, 16, 10, rng,
                               pseudo_pairs=pseudo, pseudo_fraction=0.5)
    assert len(losses) == 10 and all(np.isfinite(losses))

    pairs2, params2, adam2, rng2 = _training_setup(5)
    _, losses_plain = train_nac(pairs2, params2, adam2, 16, 10, rng2)
    assert losses != losses_plain


def test_swap_consistency_after_training():
    # augmentation trains p(a,b) and p(b,a) toward complements
    pairs, params, adam, rng = _training_setup(1, n_archs=20)
    params, _ = train_nac(pairs, params, adam, 64, 300, rng)
    oracle = SyntheticOracle(DESK, 3)
    probe = oracle.sample_archs(12, rng)
    fwd = [(probe[i], probe[j]) for i in range(12) for j in range(12) if i != j]
    rev = [(b, a) for a, b in fwd]
    gap = compare_many(fwd, params) + compare_many(rev, params) - 1.0
    assert np.abs(gap).mean() < 0.1


def test_pair_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(9)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    codec = ArchCodec(SMALL, params.cfg)
    oracle = SyntheticOracle(SMALL, 0)
    archs = oracle.sample_archs(4, rng)
    recs = [(a, oracle.mean_acc(a)) for a in archs]
    batch = build_pairs(recs, augment=False)
    worst = grad_check(lambda: pair_loss(batch, params, codec),
                       params.tensors())
    assert worst < 1e-4


# -- serialization --------------------------------------------------------------


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    path = tmp_path / "model.json"
    save_nac(params, str(path))
    loaded = load_nac(str(path))

    assert loaded.spec == params.spec
    assert loaded.cfg == params.cfg
    for a, b in zip(params.tensors(), loaded.tensors()):
        np.testing.assert_array_equal(a.data, b.data)

    oracle = SyntheticOracle(SMALL, 0)
    archs = oracle.sample_archs(6, rng)
    pairs = [(archs[i], archs[i + 3]) for i in range(3)]
    np.testing.assert_array_equal(compare_many(pairs, params),
                                  compare_many(pairs, loaded))


def test_load_rejects_spec_hash_mismatch(tmp_path):
    rng = np.random.default_rng(4)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    path = tmp_path / "model.json"
    save_nac(params, str(path))
    doc = json.loads(path.read_text())
    doc["spec_hash"] = "0" * 16
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="hash"):
        load_nac(str(path))


def test_save_is_deterministic(tmp_path):
    rng = np.random.default_rng(4)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_nac(params, str(p1))
    save_nac(params, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_nac_to_json_shapes_annotated():
    rng = np.random.default_rng(0)
    params = init_nac(TINY, rng, NacConfig(d=1))
    doc = nac_to_json(params)
    assert doc["tensors"]["emb"]["shape"] == [4, 1]
    assert doc["tensors"]["W_fc"]["shape"] == [6, 1]
    assert doc["config"]["readout"] == "flatten"


def test_comparator_wrapper_matches_functions():
    rng = np.random.default_rng(8)
    params = init_nac(SMALL, rng, NacConfig(d=4))
    cmp = NacComparator(params)
    oracle = SyntheticOracle(SMALL, 2)
    a, b = oracle.sample_archs(2, rng)
    assert cmp.pair(a, b) == compare(a, b, params)
    np.testing.assert_array_equal(cmp.many([(a, b), (b, a)]),
                                  compare_many([(a, b), (b, a)], params))
