import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from winmask.model import MaskRegime, ModelConfig
from winmask.representations import (
    ReprError,
    ReprLevel,
    lm_score,
    pool_sentence,
    sentence_vector,
    token_representations,
)
from winmask.rng import make_rng
from winmask.synthetic import grammar_corpus
from winmask.tokenizer import PAD, build_vocab, encode
from winmask.training import TrainConfig, train_loop

from conftest import random_sentence, small_model


def count_passes(model):
    calls = {"n": 0}
    original = model.forward

    def counted(*args, **kwargs):
        calls["n"] += 1
        return original(*args, **kwargs)

    model.forward = counted
    return calls


class TestReprLevel:
    @pytest.mark.parametrize("text,expected", [
        ("embed", ReprLevel("embed")),
        ("output", ReprLevel("output")),
        ("context", ReprLevel("context", 3)),
        ("context:2", ReprLevel("context", 2)),
        (" Context:1 ", ReprLevel("context", 1)),
    ])
    def test_parse(self, text, expected):
        assert ReprLevel.parse(text, 3) == expected

    @pytest.mark.parametrize("text", ["logits", "context:x", "context:0", ""])
    def test_parse_rejects(self, text):
        with pytest.raises(ReprError):
            ReprLevel.parse(text, 3)

    def test_label(self):
        assert ReprLevel("context", 2).label() == "context:2"
        assert ReprLevel("embed").label() == "embed"

    def test_layer_beyond_depth(self, rng):
        model = small_model(MaskRegime.WINDOW, layers=2)
        with pytest.raises(ReprError):
            token_representations(model, random_sentence(rng, 20, 5), ReprLevel("context", 3))


class TestTokenRepresentations:
    @pytest.mark.parametrize("regime", list(MaskRegime))
    def test_shapes(self, regime, rng):
        model = small_model(regime, layers=2)
        ids = random_sentence(rng, 20, 7)
        for level in (ReprLevel("embed"), ReprLevel("context", 1), ReprLevel("context", 2), ReprLevel("output")):
            assert token_representations(model, ids, level).shape == (7, 8)

    def test_last_context_is_final_hidden(self, rng):
        model = small_model(MaskRegime.CAUSAL, layers=2)
        ids = random_sentence(rng, 20, 6)
        acts = model.forward(ids)
        np.testing.assert_array_equal(token_representations(model, ids, ReprLevel("context", 2)),
                                      acts.final_hidden.data)

    def test_embed_is_regime_independent(self, rng):
        ids = random_sentence(rng, 20, 6)
        outs = [token_representations(small_model(r), ids, ReprLevel("embed")) for r in MaskRegime]
        assert all(np.array_equal(outs[0], o) for o in outs[1:])

    def test_single_pass(self, rng):
        model = small_model(MaskRegime.MLM)
        calls = count_passes(model)
        token_representations(model, random_sentence(rng, 20, 9), ReprLevel("output"))
        assert calls["n"] == 1


class TestPooling:
    def test_identical_rows(self):
        row = np.array([0.3, -1.0, 2.0])
        pooled = pool_sentence(np.tile(row, (5, 1)))
        np.testing.assert_allclose(pooled.values, row)

    def test_two_token_example(self):
        tokens = np.array([[9.0, 9.0], [1.0, 0.0], [0.0, 1.0], [-9.0, 7.0]])
        np.testing.assert_allclose(pool_sentence(tokens).values, [0.5, 0.5])

    def test_pad_rows_are_excluded(self):
        tokens = np.array([[9.0, 9.0], [1.0, 2.0], [5.0, 5.0], [7.0, 7.0]])
        pooled = pool_sentence(tokens, ids=[2, 8, 3, PAD])
        np.testing.assert_allclose(pooled.values, [3.0, 3.5])

    def test_nothing_to_pool(self):
        with pytest.raises(ReprError):
            pool_sentence(np.ones((2, 4)))

    def test_unknown_method(self):
        with pytest.raises(ReprError):
            pool_sentence(np.ones((4, 4)), method="max")

    @settings(max_examples=50, deadline=None)
    @given(st.integers(3, 12), st.integers(0, 10_000))
    def test_permutation_invariance(self, n, seed):
        rng = make_rng(seed, "pool")
        tokens = rng.normal(size=(n, 5))
        interior = tokens[1:-1].copy()
        shuffled = tokens.copy()
        shuffled[1:-1] = interior[rng.permutation(n - 2)]
        np.testing.assert_allclose(pool_sentence(tokens).values, pool_sentence(shuffled).values, atol=1e-12)

    def test_sentence_vector_dimension(self, rng):
        model = small_model(MaskRegime.WINDOW)
        vec = sentence_vector(model, random_sentence(rng, 20, 6), ReprLevel("output"))
        assert vec.values.shape == (8,) and vec.level == ReprLevel("output")


class TestLmScore:
    @pytest.mark.parametrize("regime,expected", [
        (MaskRegime.MLM, 5), (MaskRegime.WINDOW, 1), (MaskRegime.CAUSAL, 1),
    ])
    def test_pass_count_n7(self, regime, expected, rng):
        model = small_model(regime)
        calls = count_passes(model)
        score = lm_score(model, random_sentence(rng, 20, 7))
        assert score.passes == expected == calls["n"]

    @pytest.mark.parametrize("regime", list(MaskRegime))
    def test_non_positive_and_deterministic(self, regime, rng):
        model = small_model(regime, layers=2)
        for n in (3, 6, 11):
            ids = random_sentence(rng, 20, n)
            a, b = lm_score(model, ids), lm_score(model, ids)
            assert a.log_likelihood <= 0
            assert a.log_likelihood == b.log_likelihood

    def test_causal_matches_manual_sum(self, rng):
        model = small_model(MaskRegime.CAUSAL)
        ids = random_sentence(rng, 20, 6)
        logits = model.forward(ids).logits.data.astype(np.float64)
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        manual = sum(logp[i, ids[i + 1]] for i in range(5))
        assert lm_score(model, ids).log_likelihood == pytest.approx(manual, rel=1e-9)


@pytest.fixture(scope="module")
def overfit_models():
    corpus = grammar_corpus(50, seed=21)
    vocab = build_vocab(corpus, 100, 1)
    encoded = [encode(vocab, s, 16) for s in corpus]
    models = {}
    for regime in MaskRegime:
        mcfg = ModelConfig(vocab_size=len(vocab), num_layers=2, model_dim=32, num_heads=4, ffn_dim=64,
                           max_len=16, dropout_rate=0.0, regime=regime)
        tcfg = TrainConfig(batch_size=16, steps=150, lr=3e-3, seed=0, regime=regime, log_every=50)
        ckpt, _ = train_loop(encoded, mcfg, tcfg, vocab)
        models[regime] = ckpt.build_model()
    return encoded, models


@pytest.mark.parametrize("regime", list(MaskRegime))
def test_trained_sentences_outscore_shuffled(overfit_models, regime):
    encoded, models = overfit_models
    model = models[regime]
    rng = make_rng(4, "shuffle")
    wins = 0
    trials = 0
    for ids in encoded[:20]:
        ids = np.asarray(ids)
        shuffled = ids.copy()
        shuffled[1:-1] = ids[1:-1][rng.permutation(len(ids) - 2)]
        if np.array_equal(shuffled, ids):
            continue
        trials += 1
        wins += lm_score(model, ids).log_likelihood > lm_score(model, shuffled).log_likelihood
    assert wins >= 0.9 * trials
