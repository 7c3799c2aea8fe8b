"""Regenerate the bundled runtime assets under src/sliceguard/assets/.

Produces:
  * bundled_model.json    -- portable tree-ensemble trained on synthetic
                             flood-vs-benign traffic (scikit-learn reference)
  * bundled_fixtures.json -- 50 scoring fixtures; vectors and probabilities
                             come from this script's own encoder and from
                             scikit-learn, NOT from the package's engine, so
                             the parity tests compare independent paths
  * attack_trace.csv      -- replayable flood records, all of which the
                             bundled model classifies as anomalous
  * frames.hex            -- golden wire frames, one per message type

Dev-only dependency: scikit-learn (preinstalled in the dev environment).
Run from the repo root:  python3 tools/make_bundled_assets.py
"""

from __future__ import annotations

import json
import math
import random
import sys
from pathlib import Path

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier

REPO = Path(__file__).resolve().parent.parent
ASSETS = REPO / "src" / "sliceguard" / "assets"

SEED = 20240601
N_BENIGN = 4000
N_ATTACK = 4000
N_FIXTURES = 50
N_TRACE = 400

PROTO_VOCAB = ["icmp", "tcp", "udp"]
SERVICE_VOCAB = ["domain_u", "ecr_i", "ftp_data", "http", "other", "private", "smtp"]
FLAG_VOCAB = ["REJ", "S0", "SF"]


def gen_benign(rng: random.Random) -> dict:
    proto = rng.choices(["tcp", "udp"], weights=[85, 15])[0]
    if proto == "udp":
        service = rng.choices(["domain_u", "other"], weights=[80, 20])[0]
    else:
        service = rng.choices(["http", "smtp", "ftp_data", "other"], weights=[70, 10, 15, 5])[0]
    flag = rng.choices(["SF", "REJ"], weights=[97, 3])[0]
    src = int(math.exp(rng.gauss(5.5, 0.8)))
    dst = int(math.exp(rng.gauss(8.2, 1.2))) if flag == "SF" else 0
    return {
        "protocol_type": proto,
        "service": service,
        "flag": flag,
        "src_bytes": src,
        "dst_bytes": dst,
        "label": 0,
    }


def gen_attack(rng: random.Random) -> dict:
    kind = rng.choices(["smurf", "synflood", "sweep"], weights=[60, 30, 10])[0]
    if kind == "smurf":
        return {
            "protocol_type": "icmp",
            "service": "ecr_i",
            "flag": "SF",
            "src_bytes": rng.randrange(520, 1500, 20),
            "dst_bytes": 0,
            "label": 1,
        }
    if kind == "synflood":
        return {
            "protocol_type": "tcp",
            "service": rng.choice(["private", "other"]),
            "flag": "S0",
            "src_bytes": 0,
            "dst_bytes": 0,
            "label": 1,
        }
    return {
        "protocol_type": "tcp",
        "service": "private",
        "flag": "REJ",
        "src_bytes": 0,
        "dst_bytes": 0,
        "label": 1,
    }


def encode_row(row: dict) -> list[float]:
    """Independent one-hot + log1p encoder (kept separate from the package)."""
    vec: list[float] = []
    for vocab, key in (
        (PROTO_VOCAB, "protocol_type"),
        (SERVICE_VOCAB, "service"),
        (FLAG_VOCAB, "flag"),
    ):
        group = [0.0] * len(vocab)
        if row[key] in vocab:
            group[vocab.index(row[key])] = 1.0
        vec.extend(group)
    vec.append(math.log1p(float(row["src_bytes"])))
    vec.append(math.log1p(float(row["dst_bytes"])))
    return vec


def export_model(clf: GradientBoostingClassifier) -> dict:
    trees = []
    for stage in clf.estimators_[:, 0]:
        t = stage.tree_
        feature, threshold, left, right, value = [], [], [], [], []
        for i in range(t.node_count):
            is_leaf = t.children_left[i] < 0
            feature.append(-1 if is_leaf else int(t.feature[i]))
            threshold.append(0.0 if is_leaf else float(t.threshold[i]))
            left.append(0 if is_leaf else int(t.children_left[i]))
            right.append(0 if is_leaf else int(t.children_right[i]))
            value.append(float(t.value[i][0][0]) * clf.learning_rate if is_leaf else 0.0)
        trees.append(
            {"feature": feature, "threshold": threshold, "left": left, "right": right, "value": value}
        )
    schema = (
        [f"protocol_type={v}" for v in PROTO_VOCAB]
        + [f"service={v}" for v in SERVICE_VOCAB]
        + [f"flag={v}" for v in FLAG_VOCAB]
        + ["src_bytes", "dst_bytes"]
    )
    return {
        "format": "sliceguard-tree-ensemble",
        "version": 1,
        "metadata": {
            "dataset": "synthetic-flood-v1",
            "training_hash": f"seed={SEED}",
            "numeric_transform": "log1p",
        },
        "vocabularies": {
            "protocol_type": PROTO_VOCAB,
            "service": SERVICE_VOCAB,
            "flag": FLAG_VOCAB,
        },
        "schema": schema,
        "numeric_features": ["src_bytes", "dst_bytes"],
        "bias": 0.0,
        "decision_threshold": 0.5,
        "max_depth": int(clf.max_depth),
        "trees": trees,
    }


def ref_probability(clf: GradientBoostingClassifier, vec: list[float]) -> float:
    raw = float(clf.decision_function(np.array([vec]))[0])
    if raw >= 0:
        return 1.0 / (1.0 + math.exp(-raw))
    e = math.exp(raw)
    return e / (1.0 + e)


def make_frames_hex() -> str:
    from sliceguard.protocol import (
        Ack,
        AnomalyReportMsg,
        ErrorMsg,
        Hello,
        RrcReleaseCmd,
        SliceCreate,
        SliceDelete,
        SliceIndication,
        ThrottleCmd,
        UeAssociate,
        encode_frame,
    )
    from sliceguard.sched import NvsCapacity, SliceConfig

    samples = [
        ("hello", Hello()),
        ("slice_create", SliceCreate(config=SliceConfig(slice_id=2, policy=NvsCapacity(share=0.25)))),
        ("slice_delete", SliceDelete(slice_id=2)),
        ("ue_associate", UeAssociate(ue_id=7, slice_id=2)),
        (
            "slice_indication",
            SliceIndication(
                tti=1000,
                per_slice={1: {"delivered_mbps": 42.5, "prb_share": 0.5}},
                per_ue={7: {"delivered_mbps": 42.5}},
            ),
        ),
        (
            "anomaly_report",
            AnomalyReportMsg(ue_id=7, window_score=0.75, packets_seen=120, timestamp_tti=999),
        ),
        ("throttle_cmd", ThrottleCmd(ue_id=7, cap=0.25)),
        ("rrc_release_cmd", RrcReleaseCmd(ue_id=7)),
        ("ack", Ack(acks="AnomalyReport", commands=2)),
        ("error", ErrorMsg(reason="bad field", field="cap")),
    ]
    return "".join(f"{name} {encode_frame(msg).hex()}\n" for name, msg in samples)


def main() -> int:
    rng = random.Random(SEED)
    rows = [gen_benign(rng) for _ in range(N_BENIGN)] + [gen_attack(rng) for _ in range(N_ATTACK)]
    rng.shuffle(rows)
    X = np.array([encode_row(r) for r in rows])
    y = np.array([r["label"] for r in rows])

    clf = GradientBoostingClassifier(
        n_estimators=30,
        max_depth=4,
        learning_rate=0.2,
        init="zero",
        random_state=SEED % (2**31),
    )
    clf.fit(X, y)
    acc = float((clf.predict(X) == y).mean())
    print(f"training accuracy: {acc:.4f}")

    doc = export_model(clf)
    ASSETS.mkdir(parents=True, exist_ok=True)
    with open(ASSETS / "bundled_model.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    # fixtures: fresh rows, scored by this script's own paths
    fixtures = []
    while len(fixtures) < N_FIXTURES:
        row = gen_benign(rng) if len(fixtures) % 2 == 0 else gen_attack(rng)
        vec = encode_row(row)
        fixtures.append(
            {
                "features": {k: row[k] for k in ("protocol_type", "service", "flag", "src_bytes", "dst_bytes")},
                "vector": vec,
                "probability": ref_probability(clf, vec),
                "label": row["label"],
            }
        )
    with open(ASSETS / "bundled_fixtures.json", "w", encoding="utf-8") as fh:
        json.dump(fixtures, fh, indent=1)
        fh.write("\n")

    # attack trace: keep only records the model is confidently anomalous on
    trace_rows = []
    while len(trace_rows) < N_TRACE:
        row = gen_attack(rng)
        p = ref_probability(clf, encode_row(row))
        if p >= 0.5 + 1e-3:
            trace_rows.append(row)
    with open(ASSETS / "attack_trace.csv", "w", encoding="utf-8") as fh:
        fh.write("protocol_type,service,flag,src_bytes,dst_bytes\n")
        for r in trace_rows:
            fh.write(f"{r['protocol_type']},{r['service']},{r['flag']},{r['src_bytes']},{r['dst_bytes']}\n")
    mean_payload = sum(max(r["src_bytes"], 64) for r in trace_rows) / len(trace_rows)
    print(f"trace rows: {len(trace_rows)}, mean replay payload: {mean_payload:.0f} B")

    # benign template must score benign or the scenario stories break
    benign_probe = {
        "protocol_type": "tcp",
        "service": "http",
        "flag": "SF",
        "src_bytes": 240,
        "dst_bytes": 9000,
    }
    p = ref_probability(clf, encode_row(benign_probe))
    print(f"benign template probability: {p:.6f}")
    if p >= 0.5:
        print("ERROR: benign template classified anomalous", file=sys.stderr)
        return 1

    with open(ASSETS / "frames.hex", "w", encoding="utf-8") as fh:
        fh.write(make_frames_hex())

    print(f"assets written to {ASSETS}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
