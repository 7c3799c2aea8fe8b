"""Edge anomaly detection: feature encoding, tree-ensemble inference, and
per-UE sliding windows with periodic score reports.

The model file is a portable JSON document (vocabularies, numeric transform,
flattened binary trees, bias, decision threshold) so that models trained
elsewhere can be loaded here and scored identically; see docs/model_format.md.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from sliceguard import kernels
from sliceguard.errors import InputError, ModelFormatError

CATEGORICAL_FIELDS = ("protocol_type", "service", "flag")
NUMERIC_FIELDS = ("src_bytes", "dst_bytes")
DEFAULT_WINDOW_SIZE = 40
DEFAULT_REPORT_EVERY = 10
BUNDLED_MODEL = "bundled_model.json"


@dataclass(frozen=True)
class PacketFeatures:
    """The five per-packet fields fed to the classifier."""

    protocol_type: str
    service: str
    flag: str
    src_bytes: int
    dst_bytes: int

    def __post_init__(self):
        if self.src_bytes < 0 or self.dst_bytes < 0:
            raise InputError("byte counts must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "protocol_type": self.protocol_type,
            "service": self.service,
            "flag": self.flag,
            "src_bytes": self.src_bytes,
            "dst_bytes": self.dst_bytes,
        }


@dataclass(frozen=True)
class AnomalyReport:
    ue_id: int
    window_score: float
    packets_seen: int
    timestamp_tti: int


class TreeEnsembleModel:
    """Loaded portable model: schema, vocabularies, trees, bias, threshold."""

    def __init__(self, doc: dict):
        self._doc = doc
        try:
            self.metadata = dict(doc["metadata"])
            self.vocabularies = {f: list(doc["vocabularies"][f]) for f in CATEGORICAL_FIELDS}
            self.numeric_transform = doc["metadata"]["numeric_transform"]
            self.bias = float(doc["bias"])
            self.decision_threshold = float(doc["decision_threshold"])
            self.max_depth = int(doc["max_depth"])
            trees = doc["trees"]
        except KeyError as exc:
            raise ModelFormatError(f"missing model field {exc}") from exc
        if self.numeric_transform not in ("log1p", "identity"):
            raise ModelFormatError(f"unknown numeric_transform {self.numeric_transform!r}")

        self.schema: list[str] = []
        for fname in CATEGORICAL_FIELDS:
            self.schema.extend(f"{fname}={v}" for v in self.vocabularies[fname])
        self.schema.extend(NUMERIC_FIELDS)
        declared = doc.get("schema")
        if declared is not None and list(declared) != self.schema:
            raise ModelFormatError("declared schema does not match vocabularies")

        feats: list[int] = []
        thresholds: list[float] = []
        lefts: list[int] = []
        rights: list[int] = []
        values: list[float] = []
        roots: list[int] = []
        for t, tree in enumerate(trees):
            base = len(feats)
            roots.append(base)
            n = len(tree["feature"])
            for key in ("threshold", "left", "right", "value"):
                if len(tree[key]) != n:
                    raise ModelFormatError(f"tree {t}: ragged node arrays")
            for i in range(n):
                f = int(tree["feature"][i])
                if f >= len(self.schema):
                    raise ModelFormatError(f"tree {t} node {i}: feature index {f} out of schema")
                v = float(tree["value"][i])
                if not math.isfinite(v):
                    raise ModelFormatError(f"tree {t} node {i}: non-finite leaf value")
                left, right = int(tree["left"][i]), int(tree["right"][i])
                if f >= 0 and not (0 <= left < n and 0 <= right < n):
                    raise ModelFormatError(f"tree {t} node {i}: child index out of range")
                feats.append(f)
                thresholds.append(float(tree["threshold"][i]))
                lefts.append(base + left)
                rights.append(base + right)
                values.append(v)
            self._check_depth(t, tree, n)

        self.n_trees = len(roots)
        self._margin = kernels.make_margin_fn(feats, thresholds, lefts, rights, values, roots, self.bias)
        self._margin_batch = kernels.make_margin_batch_fn(
            feats, thresholds, lefts, rights, values, roots, self.bias
        )

    def _check_depth(self, t: int, tree: dict, n: int):
        depth = [0] * n
        for i in range(n):  # children always follow their parent in export order
            if int(tree["feature"][i]) < 0:
                continue
            for child in (int(tree["left"][i]), int(tree["right"][i])):
                if child <= i:
                    raise ModelFormatError(f"tree {t}: node {child} is not below its parent {i}")
                depth[child] = depth[i] + 1
                if depth[child] > self.max_depth:
                    raise ModelFormatError(f"tree {t}: depth exceeds declared max {self.max_depth}")

    @classmethod
    def load(cls, path: str | Path) -> "TreeEnsembleModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def load_bundled(cls) -> "TreeEnsembleModel":
        text = resources.files("sliceguard").joinpath("assets", BUNDLED_MODEL).read_text("utf-8")
        return cls(json.loads(text))

    def save(self, path: str | Path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self._doc, fh, sort_keys=True, indent=1)
            fh.write("\n")


def encode(features: PacketFeatures, model: TreeEnsembleModel) -> list[float]:
    """One-hot the categoricals against the model vocabulary and transform
    the byte counts. Unknown categories encode as an all-zero group."""
    vec: list[float] = []
    raw = features.as_dict()
    for fname in CATEGORICAL_FIELDS:
        vocab = model.vocabularies[fname]
        group = [0.0] * len(vocab)
        try:
            group[vocab.index(raw[fname])] = 1.0
        except ValueError:
            pass
        vec.extend(group)
    for fname in NUMERIC_FIELDS:
        value = float(raw[fname])
        vec.append(math.log1p(value) if model.numeric_transform == "log1p" else value)
    return vec


def logistic(margin: float) -> float:
    if margin >= 0.0:
        return 1.0 / (1.0 + math.exp(-margin))
    e = math.exp(margin)
    return e / (1.0 + e)


def predict(model: TreeEnsembleModel, vector: Iterable[float]) -> float:
    """Probability that the encoded packet is anomalous."""
    vec = list(vector)
    if len(vec) != len(model.schema):
        raise InputError(f"vector length {len(vec)} != schema length {len(model.schema)}")
    return logistic(model._margin(vec))


@dataclass
class FeatureWindow:
    """Ring buffer over the most recent classified packets of one UE."""

    capacity: int = DEFAULT_WINDOW_SIZE
    entries: deque = field(default_factory=deque)
    packets_seen: int = 0

    def push(self, features: PacketFeatures, label: bool):
        if len(self.entries) == self.capacity:
            self.entries.popleft()
        self.entries.append((features, label))
        self.packets_seen += 1

    def score(self) -> float:
        if not self.entries:
            return 0.0
        return sum(1 for _, label in self.entries if label) / len(self.entries)


class AnomalyDetector:
    """Per-slice detector instance: classifies packets, keeps per-UE windows,
    and emits a report every ``report_every`` packets per UE."""

    def __init__(
        self,
        model: TreeEnsembleModel,
        report_every: int = DEFAULT_REPORT_EVERY,
        window_size: int = DEFAULT_WINDOW_SIZE,
    ):
        self.model = model
        self.report_every = report_every
        self.window_size = window_size
        self.windows: dict[int, FeatureWindow] = {}

    def observe(self, ue_id: int, features: PacketFeatures, tti: int) -> AnomalyReport | None:
        window = self.windows.get(ue_id)
        if window is None:
            window = self.windows[ue_id] = FeatureWindow(capacity=self.window_size)
        proba = predict(self.model, encode(features, self.model))
        window.push(features, proba >= self.model.decision_threshold)
        if window.packets_seen % self.report_every == 0:
            return AnomalyReport(
                ue_id=ue_id,
                window_score=window.score(),
                packets_seen=window.packets_seen,
                timestamp_tti=tti,
            )
        return None

    def window_score(self, ue_id: int) -> float:
        window = self.windows.get(ue_id)
        return window.score() if window else 0.0
