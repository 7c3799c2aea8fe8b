import json
import math
import random
from importlib import resources

import pytest

from sliceguard.detect import (
    AnomalyDetector,
    FeatureWindow,
    PacketFeatures,
    TreeEnsembleModel,
    encode,
    logistic,
    predict,
)
from sliceguard.errors import InputError, ModelFormatError


def make_model_doc(trees=None, bias=0.0, max_depth=6, vocab=None, transform="log1p"):
    vocab = vocab or {
        "protocol_type": ["icmp", "tcp", "udp"],
        "service": ["http", "smtp", "ftp_data", "domain_u", "other"],
        "flag": ["SF", "S0", "REJ", "RSTO"],
    }
    return {
        "format": "sliceguard-tree-ensemble",
        "version": 1,
        "metadata": {"dataset": "unit-test", "training_hash": "none", "numeric_transform": transform},
        "vocabularies": vocab,
        "numeric_features": ["src_bytes", "dst_bytes"],
        "bias": bias,
        "decision_threshold": 0.5,
        "max_depth": max_depth,
        "trees": trees if trees is not None else [],
    }


def stump(feature, threshold, left_value, right_value):
    return {
        "feature": [feature, -1, -1],
        "threshold": [threshold, 0.0, 0.0],
        "left": [1, 0, 0],
        "right": [2, 0, 0],
        "value": [0.0, left_value, right_value],
    }


@pytest.fixture(scope="module")
def bundled():
    return TreeEnsembleModel.load_bundled()


@pytest.fixture(scope="module")
def fixtures():
    text = resources.files("sliceguard").joinpath("assets", "bundled_fixtures.json").read_text("utf-8")
    return json.loads(text)


class TestEncode:
    def test_structure_with_3_5_4_vocab(self):
        model = TreeEnsembleModel(make_model_doc())
        vec = encode(PacketFeatures("tcp", "http", "SF", 0, 0), model)
        assert len(vec) == 3 + 5 + 4 + 2
        assert vec.count(1.0) == 3  # one hot per categorical group
        assert vec[-2:] == [0.0, 0.0]  # log1p(0) numeric slots

    def test_unknown_category_encodes_as_zero_group(self):
        model = TreeEnsembleModel(make_model_doc())
        vec = encode(PacketFeatures("tcp", "xyz", "SF", 5, 7), model)
        assert vec[3:8] == [0.0] * 5
        assert vec.count(1.0) == 2

    def test_log1p_transform(self):
        model = TreeEnsembleModel(make_model_doc())
        vec = encode(PacketFeatures("udp", "other", "SF", 100, 2000), model)
        assert vec[-2] == math.log1p(100)
        assert vec[-1] == math.log1p(2000)

    def test_identity_transform(self):
        model = TreeEnsembleModel(make_model_doc(transform="identity"))
        vec = encode(PacketFeatures("udp", "other", "SF", 100, 2000), model)
        assert vec[-2:] == [100.0, 2000.0]

    def test_fixture_vectors_exact(self, bundled, fixtures):
        for fx in fixtures:
            vec = encode(PacketFeatures(**fx["features"]), bundled)
            assert vec == fx["vector"]

    def test_negative_bytes_rejected(self):
        with pytest.raises(InputError):
            PacketFeatures("tcp", "http", "SF", -1, 0)


class TestPredict:
    def test_empty_ensemble_bias_zero_is_half(self):
        model = TreeEnsembleModel(make_model_doc(trees=[]))
        assert predict(model, [0.0] * 14) == 0.5

    def test_single_stump_hand_evaluated(self):
        model = TreeEnsembleModel(make_model_doc(trees=[stump(0, 1.0, -2.0, 2.0)]))
        vec = [0.0] * 14
        vec[0] = 5.0
        assert predict(model, vec) == pytest.approx(logistic(2.0))
        assert predict(model, vec) == pytest.approx(0.8808, abs=1e-4)
        vec[0] = 1.0  # boundary goes left
        assert predict(model, vec) == pytest.approx(logistic(-2.0))

    def test_vector_length_checked(self):
        model = TreeEnsembleModel(make_model_doc())
        with pytest.raises(InputError):
            predict(model, [0.0] * 3)

    def test_fixture_probabilities_within_1e6(self, bundled, fixtures):
        for fx in fixtures:
            p = predict(model=bundled, vector=fx["vector"])
            assert abs(p - fx["probability"]) < 1e-6

    def test_deterministic(self, bundled, fixtures):
        vec = fixtures[0]["vector"]
        assert predict(bundled, vec) == predict(bundled, vec)


class TestModelValidation:
    def test_feature_index_out_of_schema(self):
        with pytest.raises(ModelFormatError):
            TreeEnsembleModel(make_model_doc(trees=[stump(99, 0.0, 0.0, 0.0)]))

    def test_non_finite_leaf(self):
        with pytest.raises(ModelFormatError):
            TreeEnsembleModel(make_model_doc(trees=[stump(0, 0.0, float("nan"), 0.0)]))

    def test_ragged_arrays(self):
        bad = stump(0, 0.0, 0.0, 0.0)
        bad["value"] = [0.0]
        with pytest.raises(ModelFormatError):
            TreeEnsembleModel(make_model_doc(trees=[bad]))

    def test_depth_over_declared_max(self):
        deep = {
            "feature": [0, 1, -1, -1, -1],
            "threshold": [0.0, 0.0, 0.0, 0.0, 0.0],
            "left": [1, 2, 0, 0, 0],
            "right": [4, 3, 0, 0, 0],
            "value": [0.0, 0.0, 0.1, 0.2, 0.3],
        }
        TreeEnsembleModel(make_model_doc(trees=[deep], max_depth=2))
        with pytest.raises(ModelFormatError):
            TreeEnsembleModel(make_model_doc(trees=[deep], max_depth=1))

    def test_unknown_transform(self):
        with pytest.raises(ModelFormatError):
            TreeEnsembleModel(make_model_doc(transform="zscore"))

    def test_declared_schema_mismatch(self):
        doc = make_model_doc()
        doc["schema"] = ["bogus"]
        with pytest.raises(ModelFormatError):
            TreeEnsembleModel(doc)

    def test_save_load_roundtrip(self, tmp_path, bundled, fixtures):
        path = tmp_path / "model.json"
        bundled.save(path)
        again = TreeEnsembleModel.load(path)
        for fx in fixtures[:5]:
            assert predict(again, fx["vector"]) == predict(bundled, fx["vector"])


def two_sided_model():
    """Classifies anomalous iff feature 0 (icmp one-hot) is set."""
    return TreeEnsembleModel(make_model_doc(trees=[stump(0, 0.5, -4.0, 4.0)]))


BENIGN = PacketFeatures("tcp", "http", "SF", 100, 2000)
ATTACK = PacketFeatures("icmp", "other", "SF", 1000, 0)


class TestObserve:
    def test_forty_benign_scores_zero(self):
        det = AnomalyDetector(two_sided_model())
        reports = [det.observe(1, BENIGN, t) for t in range(40)]
        emitted = [r for r in reports if r is not None]
        assert len(emitted) == 4  # every 10 packets
        assert emitted[-1].window_score == 0.0
        assert emitted[-1].packets_seen == 40

    def test_forty_anomalous_hits_full_score_at_packet_forty(self):
        det = AnomalyDetector(two_sided_model())
        emitted = [r for t in range(40) if (r := det.observe(1, ATTACK, t)) is not None]
        assert emitted[-1].window_score == 1.0
        assert emitted[-1].packets_seen == 40
        # pre-fill reports carry the exact seen-so-far fraction
        assert emitted[0].window_score == 1.0 and emitted[0].packets_seen == 10

    def test_window_slides_past_anomalies(self):
        det = AnomalyDetector(two_sided_model())
        for t in range(20):
            det.observe(1, ATTACK, t)
        for t in range(20, 60):
            det.observe(1, BENIGN, t)
        assert det.window_score(1) == 0.0

    def test_per_ue_isolation(self):
        det = AnomalyDetector(two_sided_model())
        for t in range(40):
            det.observe(1, ATTACK, t)
            det.observe(2, BENIGN, t)
        assert det.window_score(1) == 1.0
        assert det.window_score(2) == 0.0

    def test_window_score_matches_brute_force_recount(self):
        model = two_sided_model()
        rng = random.Random(1234)
        for _ in range(200):
            det = AnomalyDetector(model, report_every=rng.choice([1, 7, 10]))
            labels = []
            for t in range(rng.randint(1, 120)):
                anomalous = rng.random() < 0.5
                feats = ATTACK if anomalous else BENIGN
                labels.append(anomalous)
                det.observe(1, feats, t)
                recent = labels[-40:]
                assert det.window_score(1) == sum(recent) / len(recent)


class TestFeatureWindow:
    def test_capacity_forty(self):
        window = FeatureWindow()
        for _ in range(100):
            window.push(BENIGN, False)
        assert len(window.entries) == 40
        assert window.packets_seen == 100

    def test_empty_scores_zero(self):
        assert FeatureWindow().score() == 0.0
