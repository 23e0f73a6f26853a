import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keymark.errors import CorruptFile, EmptyCorpus, EmptySequence, ModelMissing, NegativeEntry, SumNotOne, WrongLength
from keymark.lm import (
    demo_corpus_path,
    load_model,
    markov_train,
    sample_text,
    validate_distribution,
    watermark_potential,
)

from conftest import FixedModel


class TestValidateDistribution:
    def test_valid_passes(self):
        validate_distribution([0.25, 0.75])
        validate_distribution(np.ones(7) / 7, vocab_size=7)

    def test_negative_entry(self):
        with pytest.raises(NegativeEntry):
            validate_distribution([1.2, -0.2])

    def test_sum_not_one(self):
        with pytest.raises(SumNotOne):
            validate_distribution([0.5, 0.6])

    def test_wrong_length(self):
        with pytest.raises(WrongLength):
            validate_distribution([0.5, 0.5], vocab_size=3)

    def test_tolerates_float_eps(self):
        # oracle: sums within 1e-9 of 1 are accepted
        v = np.array([0.1] * 10)
        v[0] += 2e-10
        validate_distribution(v)


class TestMarkovTrain:
    def test_seen_context_smoothed_counts(self):
        # oracle: hand-counted transitions of 0,1,0,1 with lambda=1, N=2;
        # context 0 is followed by 1 twice, so (0+1)/(2+2), (2+1)/(2+2)
        model = markov_train([0, 1, 0, 1], order=1, smoothing=1.0, vocab_size=2)
        assert np.allclose(model.next_dist((0,)), [0.25, 0.75])

    def test_unseen_context_is_uniform(self):
        model = markov_train([0, 1, 0, 1], order=2, smoothing=1.0, vocab_size=2)
        assert np.allclose(model.next_dist((1, 1)), [0.5, 0.5])

    def test_backoff_by_prefix_length(self):
        # a short prefix consults the lower-order table, not the full-order one
        model = markov_train([0, 1, 0, 1], order=2, smoothing=1.0, vocab_size=2)
        assert np.allclose(model.next_dist(()), model.next_dist(()))
        marg = model.next_dist(())
        assert marg.sum() == pytest.approx(1.0)
        assert np.allclose(marg, [0.5, 0.5])  # 2 zeros, 2 ones, lambda=1

    def test_long_prefix_truncated_to_order(self):
        model = markov_train([0, 1, 0, 1], order=1, smoothing=1.0, vocab_size=2)
        assert np.allclose(model.next_dist((1, 1, 1, 0)), model.next_dist((0,)))

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpus):
            markov_train([], order=1, smoothing=1.0, vocab_size=2)

    @given(
        corpus=st.lists(st.integers(0, 3), min_size=1, max_size=60),
        order=st.integers(0, 3),
        ctx=st.lists(st.integers(0, 3), max_size=4),
        lam=st.floats(0.01, 5.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_next_dist_always_valid(self, corpus, order, ctx, lam):
        model = markov_train(corpus, order=order, smoothing=lam, vocab_size=4)
        probs = model.next_dist(tuple(ctx))
        assert probs.shape == (4,)
        assert (probs > 0).all()
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)


class TestModelRoundtrip:
    def test_save_load_identity(self, tmp_path):
        model = markov_train([3, 1, 4, 1, 5, 2, 0], order=2, smoothing=0.5, vocab_size=6)
        path = tmp_path / "m.json"
        model.save(path)
        back = load_model(path)
        assert back.order == model.order
        assert back.vocab_size == model.vocab_size
        assert back.smoothing == model.smoothing
        assert set(back.counts) == set(model.counts)
        for ctx in model.counts:
            assert np.array_equal(back.counts[ctx], model.counts[ctx])
        assert np.array_equal(back.next_dist((1,)), model.next_dist((1,)))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelMissing):
            load_model(tmp_path / "absent.json")

    def test_not_json(self, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{ nope")
        with pytest.raises(CorruptFile):
            load_model(p)

    def test_wrong_format_tag(self, tmp_path):
        p = tmp_path / "other.json"
        p.write_text(json.dumps({"format": "something-else", "version": 1}))
        with pytest.raises(CorruptFile):
            load_model(p)

    def test_future_version(self, tmp_path):
        model = markov_train([0, 1], order=0, smoothing=1.0, vocab_size=2)
        p = tmp_path / "m.json"
        model.save(p)
        payload = json.loads(p.read_text())
        payload["version"] = 99
        p.write_text(json.dumps(payload))
        with pytest.raises(CorruptFile):
            load_model(p)


class TestWatermarkPotential:
    def test_uniform_model(self):
        assert watermark_potential(FixedModel([0.25] * 4), [0, 1, 2]) == pytest.approx(0.75)

    def test_quarter_prob(self):
        assert watermark_potential(FixedModel([0.25, 0.75]), [0, 0]) == pytest.approx(0.75)

    def test_deterministic_model_zero(self):
        assert watermark_potential(FixedModel([0.0, 1.0]), [1, 1, 1]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(EmptySequence):
            watermark_potential(FixedModel([0.5, 0.5]), [])

    def test_prompt_conditions_but_not_scored(self):
        model = markov_train([0, 1, 0, 1], order=1, smoothing=1.0, vocab_size=2)
        # first scored token sees context (0,), i.e. p(1 | 0) = 0.75
        assert watermark_potential(model, [1], prompt=[0]) == pytest.approx(0.25)


class TestSampleText:
    def test_length_and_range(self, rng):
        model = markov_train(rng.integers(0, 5, 200), order=1, smoothing=1.0, vocab_size=5)
        y = sample_text(model, 40, np.random.default_rng(1))
        assert y.shape == (40,)
        assert y.min() >= 0 and y.max() < 5

    def test_reproducible(self):
        model = markov_train([0, 1, 2, 0, 1, 2], order=1, smoothing=1.0, vocab_size=3)
        a = sample_text(model, 25, np.random.default_rng(9))
        b = sample_text(model, 25, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_marginal_matches_model(self):
        # oracle: order-0 model frequency law of large numbers, 3 sigma
        model = markov_train([0, 0, 0, 1], order=0, smoothing=0.01, vocab_size=2)
        p1 = float(model.next_dist(())[1])
        y = sample_text(model, 40000, np.random.default_rng(3))
        se = np.sqrt(p1 * (1 - p1) / y.size)
        assert abs(y.mean() - p1) < 3 * se

    def test_zero_smoothing_rejected(self):
        with pytest.raises(ValueError):
            markov_train([0, 1], order=0, smoothing=0.0, vocab_size=2)


def test_demo_corpus_present():
    path = demo_corpus_path()
    with open(path, "rb") as fh:
        data = fh.read()
    assert len(data) > 1000
    model = markov_train(np.frombuffer(data, dtype=np.uint8).astype(np.int64),
                         order=1, smoothing=1.0, vocab_size=256)
    assert model.next_dist((ord("t"),)).argmax() >= 0
