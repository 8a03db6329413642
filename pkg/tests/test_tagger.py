"""Forward passes, explicit gradients, the optimizer, and training."""

import copy

import numpy as np
import pytest

from cmtag.clustering import WordClustering
from cmtag.corpus import TagSet
from cmtag.errors import ConfigError, ShapeError
from cmtag.noise import (ConfusionLogits, ConfusionModel, identity_logits,
                         row_softmax)
from cmtag.tagger import (Instance, NadamState, TaggerModel, TrainConfig,
                          featurize, forward_clean, forward_noisy,
                          load_checkpoint, loss_and_grads, nadam_step,
                          predict, save_checkpoint, train, write_log)

from conftest import make_corpus, make_table


def random_instances(model, n, k, rng, source="noisy", groups=(0, 1, 2)):
    out = []
    for i in range(n):
        out.append(Instance(
            "w%d" % i, rng.normal(size=model.input_dim),
            int(rng.integers(k)), source, int(rng.choice(groups))))
    return out


def random_cm(k, rng, lam=0.5, mode="cluster-ip", n_groups=2):
    groups = {g: ConfusionLogits(rng.normal(size=(k, k)))
              for g in range(n_groups)}
    return ConfusionModel(ConfusionLogits(rng.normal(size=(k, k))),
                          groups=groups, selected=set(range(n_groups)),
                          lam=lam, mode=mode)


class TestForwardClean:

    def test_zero_weights_give_uniform(self):
        m = TaggerModel(6, 4, 3, window=0)
        m.w1[:] = 0.0
        m.u[:] = 0.0
        np.testing.assert_allclose(forward_clean(m, np.ones(6)),
                                   np.full(3, 1 / 3), rtol=1e-12)

    def test_shifted_output_row_dominates(self):
        m = TaggerModel(4, 3, 4, window=0, seed=1)
        m.b_out[2] += 10.0
        probs = forward_clean(m, np.zeros(4))
        assert probs[2] > 0.999

    def test_tiny_hand_forward(self):
        # H=2, k=2 model evaluated against an explicit computation
        m = TaggerModel(2, 2, 2, window=0)
        m.w1 = np.array([[1.0, 0.0], [0.5, -0.5]])
        m.b1 = np.array([0.1, -0.2])
        m.u = np.array([[1.0, -1.0], [0.0, 2.0]])
        m.b_out = np.array([0.0, 0.3])
        x = np.array([0.4, 0.8])
        h = np.tanh(np.array([1.0 * 0.4 + 0.0 * 0.8 + 0.1,
                              0.5 * 0.4 - 0.5 * 0.8 - 0.2]))
        z = np.array([h[0] - h[1], 2.0 * h[1] + 0.3])
        expect = np.exp(z) / np.exp(z).sum()
        np.testing.assert_allclose(forward_clean(m, x), expect, rtol=1e-12)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(0)
        m = TaggerModel(8, 5, 4, window=0, seed=2)
        x = rng.normal(size=(20, 8)) * 5
        probs = forward_clean(m, x)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs >= 0)

    def test_shape_mismatch(self):
        m = TaggerModel(4, 3, 2, window=0)
        with pytest.raises(ShapeError):
            forward_clean(m, np.zeros(5))


class TestForwardNoisy:

    def test_identity_matrix_equals_clean(self):
        rng = np.random.default_rng(3)
        m = TaggerModel(6, 4, 3, window=0, seed=3)
        cm = ConfusionModel(identity_logits(3, gain=1000.0), mode="global")
        inst = Instance("w", rng.normal(size=6), 0, "noisy", 0)
        np.testing.assert_allclose(forward_noisy(m, cm, inst),
                                   forward_clean(m, inst.feature),
                                   atol=1e-12)

    def test_uniform_rows_give_uniform(self):
        m = TaggerModel(6, 4, 3, window=0, seed=4)
        cm = ConfusionModel(ConfusionLogits(np.zeros((3, 3))), mode="global")
        inst = Instance("w", np.ones(6), 0, "noisy", 0)
        np.testing.assert_allclose(forward_noisy(m, cm, inst),
                                   np.full(3, 1 / 3), rtol=1e-9)


class TestFeaturize:

    def test_window_concatenation_and_padding(self):
        table = make_table(["a", "b", "c"], dim=3, seed=0)
        corpus = make_corpus([("a b c", "O O O")])
        sent = corpus.sentences[0]
        inst = featurize(sent, 0, table, None, window=1, tagset=TagSet())
        np.testing.assert_array_equal(inst.feature[:3], np.zeros(3))
        np.testing.assert_array_equal(inst.feature[3:6], table.lookup("a"))
        np.testing.assert_array_equal(inst.feature[6:], table.lookup("b"))
        assert inst.target == 0
        assert inst.group is None

    def test_zero_window_is_center_only(self):
        table = make_table(["a"], dim=4)
        sent = make_corpus([("a", "O")]).sentences[0]
        inst = featurize(sent, 0, table, None, window=0)
        np.testing.assert_array_equal(inst.feature, table.lookup("a"))

    def test_group_from_clustering(self):
        table = make_table(["a", "b"], dim=2)
        clustering = WordClustering({"a": 1}, 2)
        sent = make_corpus([("a b", "O O")]).sentences[0]
        assert featurize(sent, 0, table, clustering, 0).group == 1
        assert featurize(sent, 1, table, clustering, 0).group == 2  # OOV

    def test_position_out_of_range(self):
        table = make_table(["a"], dim=2)
        sent = make_corpus([("a", "O")]).sentences[0]
        with pytest.raises(ConfigError):
            featurize(sent, 1, table, None, 0)


class TestLossAndGrads:

    def test_confident_model_near_zero_loss(self):
        m = TaggerModel(4, 3, 2, window=0, seed=0)
        m.b_out = np.array([30.0, -30.0])
        batch = [Instance("w", np.zeros(4), 0, "clean", None)] * 3
        loss, _ = loss_and_grads(m, None, batch)
        assert loss < 1e-9

    def test_duplicating_batch_changes_nothing(self):
        rng = np.random.default_rng(5)
        k = 4
        m = TaggerModel(6, 5, k, window=0, seed=5)
        cm = random_cm(k, rng)
        batch = (random_instances(m, 6, k, rng, "noisy")
                 + random_instances(m, 3, k, rng, "clean"))
        loss1, g1 = loss_and_grads(m, cm, batch)
        loss2, g2 = loss_and_grads(m, cm, batch + batch)
        np.testing.assert_allclose(loss1, loss2, rtol=1e-12)
        np.testing.assert_allclose(g1.w1, g2.w1, atol=1e-12)
        np.testing.assert_allclose(g1.u, g2.u, atol=1e-12)
        np.testing.assert_allclose(g1.cm_global, g2.cm_global, atol=1e-12)
        for g in g1.cm_groups:
            np.testing.assert_allclose(g1.cm_groups[g], g2.cm_groups[g],
                                       atol=1e-12)

    def test_clean_instances_ignore_confusion_model(self):
        rng = np.random.default_rng(6)
        k = 3
        m = TaggerModel(4, 3, k, window=0, seed=6)
        cm = random_cm(k, rng)
        batch = random_instances(m, 5, k, rng, "clean")
        loss_with, g_with = loss_and_grads(m, cm, batch)
        loss_without, g_without = loss_and_grads(m, None, batch)
        assert loss_with == loss_without
        np.testing.assert_array_equal(g_with.w1, g_without.w1)
        # confusion logits get exactly zero gradient from clean batches
        np.testing.assert_array_equal(g_with.cm_global, np.zeros((k, k)))
        assert g_with.cm_groups == {}

    def test_empty_batch_rejected(self):
        m = TaggerModel(4, 3, 2, window=0)
        with pytest.raises(ConfigError):
            loss_and_grads(m, None, [])

    def grad_check(self, seed, lam=0.5, mode="cluster-ip"):
        """Central finite differences over every parameter tensor."""
        rng = np.random.default_rng(seed)
        k, d, hidden = 5, 10, 8
        m = TaggerModel(d, hidden, k, window=0, rng=rng)
        cm = random_cm(k, rng, lam=lam, mode=mode)
        batch = (random_instances(m, 8, k, rng, "noisy", groups=(0, 1, 2, 3))
                 + random_instances(m, 4, k, rng, "clean"))

        def loss_of():
            return loss_and_grads(m, cm, batch)[0]

        _, grads = loss_and_grads(m, cm, batch)
        tensors = {
            "w1": (m.w1, grads.w1), "b1": (m.b1, grads.b1),
            "u": (m.u, grads.u), "b_out": (m.b_out, grads.b_out),
            "cm_global": (cm.global_logits.b, grads.cm_global),
        }
        for g in cm.groups:
            tensors["cm_group:%d" % g] = (
                cm.groups[g].b,
                grads.cm_groups.get(g, np.zeros((k, k))))
        step = 1e-5
        worst = 0.0
        for name, (tensor, grad) in tensors.items():
            flat = tensor.reshape(-1)
            gflat = grad.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + step
                up = loss_of()
                flat[i] = keep - step
                down = loss_of()
                flat[i] = keep
                num = (up - down) / (2 * step)
                rel = abs(num - gflat[i]) / max(abs(num), abs(gflat[i]), 1e-8)
                worst = max(worst, rel)
        return worst

    def test_gradients_match_finite_differences(self):
        assert self.grad_check(seed=0) < 1e-4

    def test_gradients_flow_to_group_and_global(self):
        rng = np.random.default_rng(7)
        k = 3
        m = TaggerModel(4, 3, k, window=0, seed=7)
        cm = random_cm(k, rng, lam=0.5, mode="cluster-ip")
        batch = [Instance("w", rng.normal(size=4), 1, "noisy", 0)]
        _, grads = loss_and_grads(m, cm, batch)
        assert np.abs(grads.cm_groups[0]).max() > 0
        assert np.abs(grads.cm_global).max() > 0
        # the other group's matrix was never touched
        assert 1 not in grads.cm_groups


class TestNadam:

    def test_zero_gradient_is_noop(self):
        rng = np.random.default_rng(0)
        params = {"a": rng.normal(size=(3, 3))}
        before = params["a"].copy()
        state = NadamState()
        config = TrainConfig()
        for _ in range(5):
            nadam_step(params, {"a": np.zeros((3, 3))}, state, config)
        np.testing.assert_array_equal(params["a"], before)

    def test_first_step_closed_form(self):
        # one step from zero state under constant gradient g:
        # m_hat = g, v_hat = g^2, correction (1-b1)/(1-b1) = 1, so the
        # update is lr * (b1 + 1) * g / (|g| + eps) — magnitude about
        # (1 + b1) * lr, direction -sign(g)
        config = TrainConfig(learning_rate=2e-3)
        g = np.array([0.7, -1.3, 4.0])
        params = {"a": np.zeros(3)}
        nadam_step(params, {"a": g.copy()}, NadamState(), config)
        expect = -config.learning_rate * (1 + config.beta1) * np.sign(g) \
            * np.abs(g) / (np.abs(g) + config.eps)
        np.testing.assert_allclose(params["a"], expect, rtol=1e-9)
        assert np.all(np.sign(params["a"]) == -np.sign(g))

    def test_first_step_scale_invariance(self):
        # adaptive normalization: scaling gradients 10x moves the first
        # step by far less than 1%
        config = TrainConfig()
        g = np.array([0.3, -0.9])
        p1 = {"a": np.zeros(2)}
        p2 = {"a": np.zeros(2)}
        nadam_step(p1, {"a": g.copy()}, NadamState(), config)
        nadam_step(p2, {"a": 10 * g}, NadamState(), config)
        ratio = p2["a"] / p1["a"]
        np.testing.assert_allclose(ratio, 1.0, rtol=1e-2)

    def test_updates_all_tensors(self):
        rng = np.random.default_rng(1)
        params = {"a": rng.normal(size=2), "b": rng.normal(size=(2, 2))}
        before = {k: v.copy() for k, v in params.items()}
        grads = {"a": rng.normal(size=2), "b": rng.normal(size=(2, 2))}
        nadam_step(params, grads, NadamState(), TrainConfig())
        assert np.abs(params["a"] - before["a"]).max() > 0
        assert np.abs(params["b"] - before["b"]).max() > 0


def tiny_world(seed=0, n_clean=6, n_noisy=10):
    """A small fully wired training setup."""
    rng = np.random.default_rng(seed)
    tagset = TagSet()
    words = ["w%d" % i for i in range(30)]
    table = make_table(words, dim=5, seed=seed)

    def sent(i):
        tokens = [words[int(j)] for j in rng.integers(0, 30, 5)]
        tags = [tagset.tag(int(t)) for t in rng.integers(0, 5, 5)]
        return (" ".join(tokens), " ".join(tags))

    clean = make_corpus([sent(i) for i in range(n_clean)])
    noisy = make_corpus([sent(i) for i in range(n_noisy)], role="noisy")
    dev = make_corpus([sent(i) for i in range(4)])
    return clean, noisy, dev, table, tagset


class TestTrain:

    def config(self, **kw):
        base = dict(epochs=2, batch_size=8, hidden=6, window=1, seed=0)
        base.update(kw)
        return TrainConfig(**base)

    def test_zero_epochs_returns_initialized_model(self):
        clean, noisy, dev, table, tagset = tiny_world()
        config = self.config(epochs=0, mode="base")
        model, cm, log = train(clean, None, dev, None, config, table,
                               tagset=tagset)
        assert log == []
        fresh = TaggerModel(table.dimension * 3, 6, 5, 1,
                            rng=np.random.default_rng(0))
        np.testing.assert_array_equal(model.w1, fresh.w1)

    def test_base_mode_ignores_noisy_data(self):
        clean, noisy, dev, table, tagset = tiny_world()
        config = self.config(mode="base")
        m1, _, log1 = train(clean, None, dev, None, config, table,
                            tagset=tagset)
        m2, _, log2 = train(clean, noisy, dev, None, self.config(mode="base"),
                            table, tagset=tagset)
        np.testing.assert_array_equal(m1.w1, m2.w1)
        np.testing.assert_array_equal(m1.u, m2.u)
        assert log1 == log2

    def test_deterministic_for_seed(self):
        clean, noisy, dev, table, tagset = tiny_world()
        cm1 = ConfusionModel(identity_logits(5), mode="global-identity")
        cm2 = ConfusionModel(identity_logits(5), mode="global-identity")
        m1, _, _ = train(clean, noisy, dev, cm1, self.config(mode="cm"),
                         table, tagset=tagset)
        m2, _, _ = train(clean, noisy, dev, cm2, self.config(mode="cm"),
                         table, tagset=tagset)
        np.testing.assert_array_equal(m1.w1, m2.w1)
        np.testing.assert_array_equal(m1.b_out, m2.b_out)

    def test_log_has_one_entry_per_epoch(self):
        clean, noisy, dev, table, tagset = tiny_world()
        config = self.config(mode="base+noise", epochs=3, patience=50)
        _, _, log = train(clean, noisy, dev, None, config, table,
                          tagset=tagset)
        assert [e["epoch"] for e in log] == [1, 2, 3]
        for e in log:
            assert set(e) == {"epoch", "loss", "dev_precision",
                              "dev_recall", "dev_f1"}

    def test_early_stopping_respects_patience(self):
        clean, noisy, dev, table, tagset = tiny_world()
        config = self.config(mode="base", epochs=40, patience=2)
        _, _, log = train(clean, None, dev, None, config, table,
                          tagset=tagset)
        assert len(log) < 40
        best = max(e["dev_f1"] for e in log)
        tail = [e["dev_f1"] for e in log if e["dev_f1"] == best]
        assert tail  # a best epoch exists and stopping came after it

    def test_validation_errors(self):
        clean, noisy, dev, table, tagset = tiny_world()
        from cmtag.corpus import Corpus
        with pytest.raises(ConfigError):
            train(Corpus([]), noisy, dev, None, self.config(mode="base"),
                  table, tagset=tagset)
        with pytest.raises(ConfigError):
            train(clean, None, dev, None, self.config(mode="cm"), table,
                  tagset=tagset)  # cm mode without a confusion model
        with pytest.raises(ConfigError):
            train(clean, None, dev, None, self.config(mode="base+noise"),
                  table, tagset=tagset)  # needs noisy data

    def test_mode_string_validated(self):
        with pytest.raises(ConfigError):
            self.config(mode="sideways").validate()


class TestPredict:

    def test_predicts_valid_tags_for_all_tokens(self):
        clean, noisy, dev, table, tagset = tiny_world()
        m = TaggerModel(table.dimension * 3, 6, 5, 1, seed=0)
        out = predict(m, dev, table, tagset)
        assert len(out) == len(dev)
        for sent, orig in zip(out, dev):
            assert sent.tokens == orig.tokens
            assert all(tagset.valid_io(t) for t in sent.tags)

    def test_deterministic(self):
        clean, noisy, dev, table, tagset = tiny_world()
        m = TaggerModel(table.dimension * 3, 6, 5, 1, seed=1)
        a = predict(m, dev, table, tagset)
        b = predict(m, dev, table, tagset)
        assert [s.tags for s in a] == [s.tags for s in b]


class TestCheckpoint:

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        tagset = TagSet()
        m = TaggerModel(10, 4, 5, window=1, seed=3)
        cm = random_cm(5, rng, lam=0.3, mode="cluster-freq-ip")
        path = tmp_path / "ck.json"
        save_checkpoint(str(path), m, cm, tagset, epoch=7, dev_f1=55.5)
        m2, cm2, tags, extras = load_checkpoint(str(path))
        assert tags == list(tagset)
        assert extras == {"epoch": 7, "dev_f1": 55.5}
        np.testing.assert_array_equal(m2.w1, m.w1)
        np.testing.assert_array_equal(m2.b_out, m.b_out)
        assert m2.window == m.window
        assert cm2.mode == cm.mode and cm2.lam == cm.lam
        np.testing.assert_array_equal(cm2.global_logits.b, cm.global_logits.b)

    def test_without_confusion_model(self, tmp_path):
        m = TaggerModel(4, 3, 5, window=0, seed=0)
        path = tmp_path / "ck.json"
        save_checkpoint(str(path), m, None, TagSet())
        _, cm, _, _ = load_checkpoint(str(path))
        assert cm is None

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"format": "nope"}\n')
        with pytest.raises(ConfigError):
            load_checkpoint(str(path))

    def test_write_log(self, tmp_path):
        import json
        path = tmp_path / "log.jsonl"
        write_log([{"epoch": 1, "loss": 0.5}], str(path))
        lines = path.read_text().strip().split("\n")
        assert json.loads(lines[0])["epoch"] == 1
