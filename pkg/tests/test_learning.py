import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from simcoref.corpus import build_document
from simcoref.encoder import EncoderConfig
from simcoref.gradcheck import analytic_gradients, gradient_check, numerical_gradients, relative_error
from simcoref.learning import (
    CheckpointError,
    TrainConfig,
    TrainingError,
    detection_loss,
    gold_antecedent_mask,
    load_checkpoint,
    marginal_loss,
    parameter_arrays,
    predict,
    pretrain_mentions,
    read_checkpoint_meta,
    save_checkpoint,
    checkpoint_train_config,
    train,
)
from simcoref.model import CorefModel, ModelConfig
from simcoref.scorer import AntecedentScores, PrunedSet
from simcoref.spans import Span
from simcoref.synthetic import make_corpus

NEG = float("-inf")


def _t(values, grad=False):
    return torch.tensor(values, dtype=torch.float64, requires_grad=grad)


# ---------------------------------------------------------------- detection loss


def test_detection_loss_examples():
    assert detection_loss(_t([0.0]), [1]).item() == pytest.approx(math.log(2), abs=1e-12)
    assert detection_loss(_t([0.0, 0.0]), [1, 0]).item() == pytest.approx(2 * math.log(2), abs=1e-12)
    assert detection_loss(_t([40.0, -40.0]), [1, 0]).item() < 1e-10
    # clamped: confidently wrong stays finite
    assert math.isfinite(detection_loss(_t([800.0]), [0]).item())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-8, 8), st.integers(0, 1)), min_size=1, max_size=10))
def test_detection_loss_gradient_and_sign(pairs):
    s = _t([p[0] for p in pairs], grad=True)
    y = [float(p[1]) for p in pairs]
    loss = detection_loss(s, y)
    assert loss.item() >= 0
    loss.backward()
    expected = torch.sigmoid(s.detach()) - torch.tensor(y, dtype=torch.float64)
    assert torch.allclose(s.grad, expected, atol=1e-12, rtol=0)


def test_detection_loss_accepts_pruned_set():
    pruned = PrunedSet([Span(0, 0)], _t([0.0]), [0], 0.25)
    assert detection_loss(pruned, [0]).item() == pytest.approx(math.log(2))


# ---------------------------------------------------------------- marginal loss


def _scores(rows):
    k = len(rows)
    logits = _t([[0.0] + r + [NEG] * (k - len(r)) for r in rows], grad=True)
    return AntecedentScores(logits, torch.zeros(k, k, dtype=torch.float64))


SPANS = [Span(i, i) for i in range(3)]


def _pruned(k):
    return PrunedSet(SPANS[:k], torch.zeros(k, dtype=torch.float64), list(range(k)), 0.25)


def test_marginal_loss_examples():
    # lone span: only the dummy, loss 0
    assert marginal_loss(_scores([[]]), [], _pruned(1)).item() == 0.0
    # span 1 has gold antecedent 0, scores tied with dummy: ln 2
    loss = marginal_loss(_scores([[], [0.0]]), [[SPANS[0], SPANS[1]]], _pruned(2))
    assert loss.item() == pytest.approx(math.log(2), abs=1e-12)
    # two gold antecedents among three equal options: ln(3/2)
    loss = marginal_loss(_scores([[], [50.0], [0.0, 0.0]]), [SPANS], _pruned(3))
    assert loss.item() == pytest.approx(math.log(1.5), abs=1e-9)
    # non-mention prefers the dummy; loss is ln(1 + e^s)
    loss = marginal_loss(_scores([[], [1.0]]), [], _pruned(2))
    assert loss.item() == pytest.approx(math.log1p(math.e), abs=1e-12)


def test_gold_mask_dummy_fallback():
    spans = [Span(0, 0), Span(1, 1), Span(2, 2)]
    mask = gold_antecedent_mask(spans, [[Span(0, 0), Span(2, 2)]])
    assert mask.tolist() == [
        [True, False, False, False],
        [True, False, False, False],
        [False, True, False, False],
    ]
    capped = gold_antecedent_mask(spans, [[Span(0, 0), Span(2, 2)]], torch.tensor([[True, False, True, False]] * 3))
    assert capped[2].tolist() == [True, False, False, False]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_marginal_loss_properties(seed):
    gen = torch.Generator().manual_seed(seed)
    k = 5
    spans = [Span(i, i) for i in range(k)]
    rows = [torch.randn(i, generator=gen, dtype=torch.float64).mul(4).tolist() for i in range(k)]
    scores = _scores(rows)
    probs = scores.probabilities()
    assert torch.all((probs.sum(dim=1) - 1).abs() <= 1e-12)
    members = [s for s in spans if torch.rand(1, generator=gen).item() < 0.6]
    clusters = [members] if len(members) >= 2 else []
    pruned = PrunedSet(spans, torch.zeros(k, dtype=torch.float64), list(range(k)), 0.25)
    loss = marginal_loss(scores, clusters, pruned)
    assert loss.item() >= 0
    # independent evaluation from the probabilities
    mask = gold_antecedent_mask(spans, clusters)
    direct = -sum(math.log(probs[i][mask[i]].sum().item()) for i in range(k))
    assert loss.item() == pytest.approx(direct, abs=1e-9)


# ---------------------------------------------------------------- gradient check


def _grad_docs():
    return [
        build_document("g0", [["Ann", "met", "Bo", "."], ["She", "left", "him", "."]], clusters=[[(0, 0), (4, 4)], [(2, 2), (6, 6)]]),
        build_document("g1", [["the", "dog", "ran", "and", "it", "barked"]], clusters=[[(0, 1), (4, 4)]]),
    ]


@pytest.mark.parametrize("scope", ["all", "pruned"])
def test_gradients_match_finite_differences(tiny_model, scope):
    config = TrainConfig(lam=0.4, max_width=3, detect_scope=scope)
    docs = _grad_docs()
    analytic, keeps = analytic_gradients(tiny_model, docs, config)
    names = ["encoder.mix_weight", "encoder.mix_bias", "ffnn_alpha.layers.0.weight", "ffnn_a.layers.2.bias"]
    numeric = numerical_gradients(tiny_model, docs, config, keeps, names=names)
    for name in names:
        assert np.abs(analytic[name]).max() > 0, name
        assert relative_error(analytic[name], numeric[name], floor=1e-4).max() < 1e-4, name


def test_full_gradient_check(tiny_model):
    errors = gradient_check(tiny_model, _grad_docs(), TrainConfig(lam=0.4, max_width=3), floor=1e-4)
    assert max(errors.values()) < 1e-4


# ---------------------------------------------------------------- training


@pytest.fixture(scope="module")
def small_docs():
    return make_corpus(2, seed=1, max_tokens=24)


def test_zero_epochs_returns_init(tiny_model, small_docs):
    config = TrainConfig(epochs=0, pretrain_epochs=0)
    before = parameter_arrays(tiny_model)
    for out in (pretrain_mentions(small_docs, config, init=tiny_model), train(small_docs, config, tiny_model)):
        after = parameter_arrays(out)
        assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_is_deterministic_and_leaves_init(tiny_model, small_docs):
    config = TrainConfig(epochs=3, pretrain_epochs=3)
    before = parameter_arrays(tiny_model)
    runs = []
    for _ in range(2):
        model = train(small_docs, config, pretrain_mentions(small_docs, config, init=tiny_model))
        runs.append(parameter_arrays(model))
    assert all(np.array_equal(runs[0][k], runs[1][k]) for k in before)
    assert all(np.array_equal(before[k], parameter_arrays(tiny_model)[k]) for k in before)
    assert any(not np.array_equal(before[k], runs[0][k]) for k in before)


def test_callback_and_learning_rate_decay(tiny_model, small_docs):
    seen = []
    config = TrainConfig(pretrain_epochs=3, lr_encoder=0.1, lr_head=0.2, lr_decay=0.5)
    pretrain_mentions(small_docs, config, init=tiny_model, callback=lambda *a: seen.append(a))
    assert [s[:2] for s in seen] == [("pretrain", 0), ("pretrain", 1), ("pretrain", 2)]
    assert [s[3] for s in seen] == [0.1, 0.05, 0.025]
    assert [s[4] for s in seen] == [0.2, 0.1, 0.05]
    assert seen[-1][2] < seen[0][2]


def test_pretraining_lowers_detection_loss(tiny_model, small_docs):
    losses = []
    pretrain_mentions(small_docs, TrainConfig(pretrain_epochs=20, lr_head=0.05), init=tiny_model,
                      callback=lambda p, e, loss, *_: losses.append(loss))
    assert losses[-1] < losses[0]


def test_non_finite_loss_raises(tiny_model, small_docs):
    with torch.no_grad():
        tiny_model.ffnn_m.layers[-1].bias.fill_(float("nan"))
    with pytest.raises(TrainingError, match="non-finite"):
        pretrain_mentions(small_docs, TrainConfig(pretrain_epochs=1), init=tiny_model)


def test_no_documents(tiny_model):
    with pytest.raises(TrainingError):
        train([], TrainConfig(epochs=1), tiny_model)


def test_predict_outputs(tiny_model, small_docs):
    preds = predict(tiny_model, small_docs, TrainConfig())
    assert [p.doc_key for p in preds] == [d.doc_key for d in small_docs]
    for p, doc in zip(preds, small_docs):
        proposed = set(p.proposed)
        assert all(m in proposed for c in p.clusters for m in c)
        assert all(len(c) >= 2 for c in p.clusters)


def test_train_config_validation():
    for bad in (dict(lam=0), dict(lam=1.5), dict(max_width=0), dict(lr_head=0), dict(epochs=-1), dict(detect_scope="x")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip(tmp_path, tiny_model):
    config = TrainConfig(epochs=7, seed=3)
    path = tmp_path / "m.npz"
    save_checkpoint(tiny_model, path, config)
    loaded = load_checkpoint(path)
    before, after = parameter_arrays(tiny_model), parameter_arrays(loaded)
    assert before.keys() == after.keys()
    for k in before:
        assert before[k].tobytes() == after[k].tobytes()
    meta = read_checkpoint_meta(path)
    assert meta["dtype"] == "float64" and meta["seed"] == 0
    assert meta["shapes"]["encoder.embedding"] == [64, 4]
    assert checkpoint_train_config(path) == config
    assert loaded.config == tiny_model.config


def test_checkpoint_shape_mismatch(tmp_path, tiny_model, tiny_config):
    path = tmp_path / "m.npz"
    save_checkpoint(tiny_model, path)
    other = ModelConfig(EncoderConfig(dim=6, max_segment=8, vocab_size=64), hidden=8, depth=2)
    with pytest.raises(CheckpointError, match="encoder.embedding"):
        load_checkpoint(path, other)


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, a=np.zeros(2))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
