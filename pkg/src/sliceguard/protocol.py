"""Framed control-plane protocol: length-prefixed JSON messages.

Wire format: a 4-byte big-endian payload length followed by a UTF-8 JSON
body with canonical (sorted) keys, so encoding is deterministic. Bodies
carry a ``type`` tag naming one of the fixed message vocabulary entries.
The codec is pure and incremental; connection handling lives in transport.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import Any

from sliceguard.errors import DecodeError, EncodeError, ProtocolError
from sliceguard.sched import Edf, NvsCapacity, NvsRate, Policy, SliceConfig, Static

MAX_FRAME_BYTES = 1 << 20
PROTOCOL_VERSION = "1"


class NeedMoreData:
    """Sentinel: the buffered bytes do not yet hold a complete frame."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NeedMoreData"


NEED_MORE_DATA = NeedMoreData()


def policy_to_json(policy: Policy) -> dict:
    if isinstance(policy, Static):
        return {"kind": "static", "prbs": sorted(policy.prb_set)}
    if isinstance(policy, NvsRate):
        return {
            "kind": "nvs_rate",
            "min_rate_mbps": policy.min_rate_mbps,
            "ref_rate_mbps": policy.ref_rate_mbps,
        }
    if isinstance(policy, NvsCapacity):
        return {"kind": "nvs_capacity", "share": policy.share}
    if isinstance(policy, Edf):
        return {"kind": "edf", "deadline_ms": policy.deadline_ms}
    raise EncodeError(f"unknown policy {policy!r}")


def policy_from_json(body: Any) -> Policy:
    if not isinstance(body, dict) or "kind" not in body:
        raise DecodeError("policy must be an object with a kind", field="policy.kind")
    kind = body["kind"]
    try:
        if kind == "static":
            return Static(prb_set=frozenset(int(i) for i in body["prbs"]))
        if kind == "nvs_rate":
            return NvsRate(
                min_rate_mbps=float(body["min_rate_mbps"]),
                ref_rate_mbps=float(body["ref_rate_mbps"]),
            )
        if kind == "nvs_capacity":
            return NvsCapacity(share=float(body["share"]))
        if kind == "edf":
            return Edf(deadline_ms=float(body["deadline_ms"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"bad policy body: {exc}", field=f"policy.{kind}") from exc
    raise DecodeError(f"unknown policy kind {kind!r}", field="policy.kind")


@dataclass(frozen=True)
class Hello:
    version: str = PROTOCOL_VERSION


@dataclass(frozen=True)
class SliceCreate:
    config: SliceConfig


@dataclass(frozen=True)
class SliceDelete:
    slice_id: int


@dataclass(frozen=True)
class UeAssociate:
    ue_id: int
    slice_id: int


@dataclass(frozen=True)
class SliceIndication:
    tti: int
    per_slice: dict  # slice_id -> {"delivered_mbps": float, "prb_share": float}
    per_ue: dict  # ue_id -> {"delivered_mbps": float}


@dataclass(frozen=True)
class AnomalyReportMsg:
    ue_id: int
    window_score: float
    packets_seen: int
    timestamp_tti: int


@dataclass(frozen=True)
class ThrottleCmd:
    ue_id: int
    cap: float


@dataclass(frozen=True)
class RrcReleaseCmd:
    ue_id: int


@dataclass(frozen=True)
class Ack:
    acks: str
    commands: int = 0


@dataclass(frozen=True)
class ErrorMsg:
    reason: str
    field: str = ""


ControlMessage = (
    Hello
    | SliceCreate
    | SliceDelete
    | UeAssociate
    | SliceIndication
    | AnomalyReportMsg
    | ThrottleCmd
    | RrcReleaseCmd
    | Ack
    | ErrorMsg
)

_TYPE_TAGS: dict[type, str] = {
    Hello: "Hello",
    SliceCreate: "SliceCreate",
    SliceDelete: "SliceDelete",
    UeAssociate: "UeAssociate",
    SliceIndication: "SliceIndication",
    AnomalyReportMsg: "AnomalyReport",
    ThrottleCmd: "ThrottleCmd",
    RrcReleaseCmd: "RrcReleaseCmd",
    Ack: "Ack",
    ErrorMsg: "Error",
}
_TAG_TYPES = {tag: cls for cls, tag in _TYPE_TAGS.items()}


def _validate(msg: ControlMessage):
    if isinstance(msg, ThrottleCmd) and not 0.0 <= msg.cap <= 1.0:
        raise EncodeError(f"ThrottleCmd cap {msg.cap} outside [0, 1]")
    if isinstance(msg, AnomalyReportMsg):
        if not 0.0 <= msg.window_score <= 1.0:
            raise EncodeError(f"window_score {msg.window_score} outside [0, 1]")
        if msg.packets_seen < 0:
            raise EncodeError("packets_seen must be nonnegative")
    if isinstance(msg, Hello) and not isinstance(msg.version, str):
        raise EncodeError("Hello version must be a string")


def _to_body(msg: ControlMessage) -> dict:
    body: dict[str, Any] = {"type": _TYPE_TAGS[type(msg)]}
    if isinstance(msg, SliceCreate):
        body["slice_id"] = msg.config.slice_id
        body["policy"] = policy_to_json(msg.config.policy)
    elif isinstance(msg, SliceIndication):
        body["tti"] = msg.tti
        body["per_slice"] = {str(k): v for k, v in msg.per_slice.items()}
        body["per_ue"] = {str(k): v for k, v in msg.per_ue.items()}
    else:
        for f in fields(msg):
            body[f.name] = getattr(msg, f.name)
    return body


def _from_body(body: dict) -> ControlMessage:
    tag = body.get("type")
    cls = _TAG_TYPES.get(tag)
    if cls is None:
        raise ProtocolError(f"unknown message type {tag!r}")
    try:
        if cls is SliceCreate:
            return SliceCreate(
                config=SliceConfig(
                    slice_id=int(body["slice_id"]), policy=policy_from_json(body["policy"])
                )
            )
        if cls is SliceIndication:
            return SliceIndication(
                tti=int(body["tti"]),
                per_slice={int(k): v for k, v in body["per_slice"].items()},
                per_ue={int(k): v for k, v in body["per_ue"].items()},
            )
        kwargs = {f.name: body[f.name] for f in fields(cls)}
        return cls(**kwargs)
    except KeyError as exc:
        raise DecodeError(f"missing field {exc} in {tag}", field=str(exc.args[0])) from exc
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"bad field in {tag}: {exc}", field=tag) from exc


def encode_frame(msg: ControlMessage) -> bytes:
    """Length-prefixed canonical encoding; raises EncodeError on invalid
    field values or oversize payloads."""
    _validate(msg)
    payload = json.dumps(_to_body(msg), sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds {MAX_FRAME_BYTES}")
    return len(payload).to_bytes(4, "big") + payload


def decode_frame(buf: bytes) -> tuple[ControlMessage, bytes] | NeedMoreData:
    """Incremental decode: returns (message, remaining bytes) once a full
    frame is buffered, NEED_MORE_DATA otherwise. Malformed frames raise;
    the connection is expected to be torn down rather than resynchronized."""
    if len(buf) < 4:
        return NEED_MORE_DATA
    declared = int.from_bytes(buf[:4], "big")
    if declared > MAX_FRAME_BYTES:
        raise ProtocolError(f"declared frame length {declared} exceeds {MAX_FRAME_BYTES}")
    if len(buf) < 4 + declared:
        return NEED_MORE_DATA
    payload = buf[4 : 4 + declared]
    try:
        body = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"payload is not valid JSON: {exc}", field="payload") from exc
    if not isinstance(body, dict):
        raise DecodeError("payload must be a JSON object", field="payload")
    msg = _from_body(body)
    try:
        _validate(msg)
    except EncodeError as exc:
        raise DecodeError(str(exc), field="payload") from exc
    return msg, buf[4 + declared :]


class StreamDecoder:
    """Buffering wrapper around decode_frame for byte-stream inputs."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes):
        self._buf.extend(data)

    def next_message(self) -> ControlMessage | None:
        result = decode_frame(bytes(self._buf))
        if result is NEED_MORE_DATA:
            return None
        msg, rest = result
        self._buf = bytearray(rest)
        return msg

    def drain(self) -> list[ControlMessage]:
        out = []
        while (msg := self.next_message()) is not None:
            out.append(msg)
        return out


def type_tag(msg: ControlMessage) -> str:
    return _TYPE_TAGS[type(msg)]
