import numpy as np
import pytest

from depsearch.features import FeatureVector
from depsearch.learners import (
    FTRL,
    VARIANTS,
    ConfigurationError,
    CostSensitiveExample,
    LinearRegressor,
    ModelFormatError,
    NeuralRegressor,
    NumericFault,
    cs_predict,
    deserialize_model,
    make_model,
    serialize_model,
)

BITS = 10


def vector(pairs, bits=BITS):
    fv = FeatureVector(bits=bits)
    for i, v in pairs:
        fv.add_index("x", i, v)
    return fv


def random_vector(rng, bits=BITS, size=6):
    idx = rng.choice(1 << bits, size=size, replace=False)
    return vector([(int(i), float(rng.normal())) for i in idx], bits)


class TestLinear:
    def test_single_sgd_step(self):
        reg = LinearRegressor(BITS, 2, "sgd", lr=0.5)
        reg.update(np.array([3]), np.array([1.0]), {0: 1.0})
        assert reg.w[3, 0] == pytest.approx(0.5)
        assert reg.w[3, 1] == 0.0

    def test_zero_gradient_leaves_weights(self):
        reg = LinearRegressor(BITS, 2, "sgd", lr=0.5)
        reg.update(np.array([3]), np.array([1.0]), {0: 0.0, 1: 0.0})
        assert not reg.w.any()

    def test_sgd_plus_importance_invariant_never_overshoots(self):
        reg = LinearRegressor(BITS, 1, "sgd+", lr=50.0)
        idx, val = np.array([1, 2]), np.array([1.0, 3.0])
        reg.update(idx, val, {0: 1.0})
        pred = float(reg.scores(idx, val)[0])
        assert 0.0 < pred <= 1.0 + 1e-6

    def test_sgd_plus_scale_invariance(self):
        a = LinearRegressor(BITS, 1, "sgd+", lr=0.5)
        b = LinearRegressor(BITS, 1, "sgd+", lr=0.5)
        for _ in range(5):
            a.update(np.array([1]), np.array([1.0]), {0: 2.0})
            b.update(np.array([1]), np.array([100.0]), {0: 2.0})
        assert a.scores(np.array([1]), np.array([1.0]))[0] == pytest.approx(
            b.scores(np.array([1]), np.array([100.0]))[0], rel=1e-4)

    def test_unknown_rule(self):
        with pytest.raises(ConfigurationError):
            LinearRegressor(BITS, 2, "adam")

    def test_class_out_of_range(self):
        reg = LinearRegressor(BITS, 2)
        with pytest.raises(ConfigurationError):
            reg.update(np.array([1]), np.array([1.0]), {5: 1.0})

    def test_nan_input_faults(self):
        reg = LinearRegressor(BITS, 2, "sgd")
        with pytest.raises(NumericFault):
            reg.update(np.array([1]), np.array([np.nan]), {0: 1.0})


class TestFTRL:
    def test_initial_z_reproduces_weights(self):
        ftrl = FTRL(0.1, 1.0, 0.0, 0.5)
        w0 = np.array([-0.3, 0.0, 0.2])
        np.testing.assert_allclose(ftrl.weights(ftrl.initial_z(w0), np.zeros(3)), w0)

    def test_l1_gives_exact_zeros(self):
        ftrl = FTRL(0.1, 1.0, l1=1.0)
        w, z, n = np.zeros(4), np.zeros(4), np.zeros(4)
        for _ in range(3):
            w, z, n = ftrl.step(w, z, n, np.array([0.1, -0.2, 5.0, -5.0]))
        assert w[0] == 0.0 and w[1] == 0.0
        assert w[2] < 0 < w[3]

    def test_matches_reference_formula(self):
        ftrl = FTRL(0.2, 1.0, 0.1, 0.01)
        w, z, n = np.zeros(1), np.zeros(1), np.zeros(1)
        g = np.array([0.7])
        w, z, n = ftrl.step(w, z, n, g)
        sigma = (np.sqrt(0.49) - 0.0) / 0.2
        z_ref = 0.7 - sigma * 0.0
        w_ref = -(z_ref - 0.1) / ((1.0 + 0.7) / 0.2 + 0.01)
        assert z[0] == pytest.approx(z_ref) and w[0] == pytest.approx(w_ref)


class TestNeural:
    @pytest.mark.parametrize("loss", ["squared", "logistic"])
    @pytest.mark.parametrize("inpass", [True, False])
    def test_finite_difference_gradients(self, loss, inpass):
        rng = np.random.default_rng(11)
        net = NeuralRegressor(6, 4, hidden=3, loss=loss, init_scale=0.5, inpass=inpass, rng=rng)
        if inpass:
            net.U[:] = rng.normal(scale=0.3, size=net.U.shape)
        for _ in range(10):
            idx = np.sort(rng.choice(64, size=5, replace=False))
            val = rng.normal(size=5)
            costs = {k: float(rng.integers(0, 3)) for k in range(4)}
            _, grads, ks = net.loss_and_grads(idx, val, costs)
            rows = {"W": idx, "b": slice(None), "V": ks, "c": ks, "U": (idx[:, None], ks[None, :])}
            for name, g in grads.items():
                param = getattr(net, name)
                view = param[rows[name]]
                num = np.zeros_like(view)
                for pos in np.ndindex(view.shape):
                    old = view[pos]
                    for sign in (1, -1):
                        view[pos] = old + sign * 1e-6
                        param[rows[name]] = view
                        num[pos] += sign * net.loss_and_grads(idx, val, costs)[0] / 2e-6
                    view[pos] = old
                    param[rows[name]] = view
                np.testing.assert_allclose(g, num, rtol=1e-4, atol=1e-7, err_msg=name)

    def test_bias_moves_towards_target(self):
        net = NeuralRegressor(6, 2, hidden=2, lr=0.1, inpass=False)
        before = net.scores(np.array([1]), np.array([1.0]))[0]
        net.update(np.array([1]), np.array([1.0]), {0: before + 1.0})
        assert net.scores(np.array([1]), np.array([1.0]))[0] > before

    def test_logistic_negates_scores(self):
        net = NeuralRegressor(6, 2, hidden=2, loss="logistic", lr=0.5, inpass=False)
        for _ in range(30):
            net.update(np.array([1]), np.array([1.0]), {0: 0.0, 1: 3.0})
        s = net.scores(np.array([1]), np.array([1.0]))
        assert s[0] < s[1]


class TestPolicyModel:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_learns_cost_ordering(self, variant):
        model = make_model(variant, (3,), bits=BITS, seed=1)
        lr_override = {"sgd": {"lr": 0.2}, "nn": {"lr": 0.05}}.get(variant, {})
        model.hparams.update(lr_override)
        for learner in model.learners:
            if hasattr(learner, "lr") and "lr" in lr_override:
                learner.lr = lr_override["lr"]
        a, b = vector([(1, 1.0), (2, 1.0)]), vector([(3, 1.0), (4, 1.0)])
        for _ in range(200):
            model.update(CostSensitiveExample(a, {0: 1.0, 1: 0.0, 2: 2.0}))
            model.update(CostSensitiveExample(b, {0: 0.0, 1: 2.0, 2: 1.0}))
        assert model.predict(0, a, [0, 1, 2]) == 1
        assert model.predict(0, b, [0, 1, 2]) == 0
        if variant != "multiclass":
            # the runner-up cost is only learned by the cost-sensitive variants
            assert model.predict(0, a, [0, 2]) == 0

    def test_tie_goes_to_smallest_allowed(self):
        model = make_model("sgd", (4,), bits=BITS)
        assert cs_predict(model, 0, vector([(1, 1.0)]), [3, 1, 2]) == 1

    def test_empty_allowed(self):
        model = make_model("sgd", (4,), bits=BITS)
        with pytest.raises(ValueError):
            cs_predict(model, 0, vector([(1, 1.0)]), [])

    def test_unknown_role_and_variant(self):
        model = make_model("sgd", (2,), bits=BITS)
        with pytest.raises(ConfigurationError):
            model.predict_costs(3, vector([(1, 1.0)]))
        with pytest.raises(ConfigurationError):
            make_model("svm", (2,))

    def test_positive_class_prefers_reference(self):
        ex = CostSensitiveExample(vector([]), {0: 0.0, 2: 0.0, 1: 1.0}, reference=2)
        assert ex.positive_class() == 2
        assert CostSensitiveExample(vector([]), {0: 1.0, 2: 0.0}).positive_class() == 2

    def test_empty_costs_rejected(self):
        with pytest.raises(ValueError):
            CostSensitiveExample(vector([]), {})


class TestSerialization:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_round_trip_preserves_predictions(self, variant):
        rng = np.random.default_rng(2)
        model = make_model(variant, (3, 2), bits=BITS, seed=4, metadata={"labels": ["a", "b"]})
        for _ in range(50):
            model.update(CostSensitiveExample(random_vector(rng), {0: 1.0, 1: 0.0, 2: 2.0}))
        copy = deserialize_model(serialize_model(model))
        assert copy.metadata == model.metadata and copy.hparams == model.hparams
        for _ in range(100):
            fv = random_vector(rng)
            for role in (0, 1):
                np.testing.assert_array_equal(model.predict_costs(role, fv), copy.predict_costs(role, fv))
        # training continues identically after reload
        ex = CostSensitiveExample(random_vector(rng), {0: 0.0, 1: 1.0, 2: 1.0})
        model.update(ex)
        copy.update(ex)
        assert serialize_model(model) == serialize_model(copy)

    def test_corruption_detected(self):
        blob = bytearray(serialize_model(make_model("sgd", (2,), bits=BITS)))
        blob[len(blob) // 2] ^= 0xFF
        with pytest.raises(ModelFormatError, match="checksum"):
            deserialize_model(bytes(blob))

    def test_truncation_detected(self):
        blob = serialize_model(make_model("sgd", (2,), bits=BITS))
        with pytest.raises(ModelFormatError):
            deserialize_model(blob[:-100])

    def test_bad_magic(self):
        with pytest.raises(ModelFormatError, match="magic"):
            deserialize_model(b"NOTAMODEL" * 4)

    def test_version_mismatch(self):
        import struct
        import zlib

        blob = serialize_model(make_model("sgd", (2,), bits=BITS))
        body = bytearray(blob[:-4])
        struct.pack_into("<I", body, 8, 99)
        forged = bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))
        with pytest.raises(ModelFormatError, match="version"):
            deserialize_model(forged)
