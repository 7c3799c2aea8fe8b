"""Controller attachment over encoded frames.

The runner talks to the controller through two logical connections: a
detector-side link carrying anomaly reports and a RAN-side link carrying
slice indications downstream and commands upstream. Both run the same
exchange discipline so the in-process and socket modes order events
identically:

  * connect RAN link: Hello/Hello, then Ack{acks: Hello, commands: n}
    followed by n setup messages (slice plan) on the RAN link;
  * connect detector link: Hello/Hello;
  * per request (report or indication): Ack{commands: n} returns on the
    request's own link, then n command messages arrive on the RAN link.

Every message crosses the codec even in-process, so both modes exercise
identical bytes.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import tempfile
from pathlib import Path

from sliceguard.controller import SlaPolicy, SliceController
from sliceguard.errors import HandshakeError, ProtocolError
from sliceguard.protocol import (
    Ack,
    AnomalyReportMsg,
    ControlMessage,
    Hello,
    PROTOCOL_VERSION,
    SliceIndication,
    StreamDecoder,
    encode_frame,
    policy_from_json,
    policy_to_json,
    type_tag,
)
from sliceguard.sched import SliceConfig

RECV_TIMEOUT_S = 30.0


def policy_doc(policy: SlaPolicy) -> dict:
    return {
        "slices": [
            {"slice_id": c.slice_id, "policy": policy_to_json(c.policy)}
            for c in policy.slice_configs
        ],
        "ues": [[u, s] for u, s in policy.ue_slices],
        "min_cap": policy.min_cap,
        "release_after": policy.release_after,
        "full_window_packets": policy.full_window_packets,
        "sla_enforcement": policy.sla_enforcement,
        "violation_streak": policy.violation_streak,
        "rate_raise_factor": policy.rate_raise_factor,
    }


def policy_from_doc(doc: dict) -> SlaPolicy:
    return SlaPolicy(
        slice_configs=tuple(
            SliceConfig(slice_id=int(s["slice_id"]), policy=policy_from_json(s["policy"]))
            for s in doc["slices"]
        ),
        ue_slices=tuple((int(u), int(s)) for u, s in doc["ues"]),
        min_cap=doc["min_cap"],
        release_after=doc["release_after"],
        full_window_packets=doc["full_window_packets"],
        sla_enforcement=doc["sla_enforcement"],
        violation_streak=doc["violation_streak"],
        rate_raise_factor=doc["rate_raise_factor"],
    )


def _expect_hello(msg: ControlMessage):
    if not isinstance(msg, Hello):
        raise HandshakeError(f"expected Hello, got {type_tag(msg)}")
    if msg.version != PROTOCOL_VERSION:
        raise HandshakeError(f"protocol version {msg.version!r} != {PROTOCOL_VERSION!r}")


class InprocControllerLink:
    """Runs the controller in-process; frames cross in-memory buffers."""

    def __init__(self, policy: SlaPolicy):
        self._controller = SliceController(policy)
        self._to_ctrl = StreamDecoder()
        self._det_rx = StreamDecoder()  # runner <- controller, detector link
        self._ran_rx = StreamDecoder()  # runner <- controller, RAN link

    def start(self) -> list[ControlMessage]:
        setup = self._controller.setup_messages()
        # RAN link handshake
        self._to_ctrl.feed(encode_frame(Hello()))
        _expect_hello(self._to_ctrl.next_message())
        self._ran_rx.feed(encode_frame(Hello()))
        _expect_hello(self._ran_rx.next_message())
        self._ran_rx.feed(encode_frame(Ack(acks="Hello", commands=len(setup))))
        for msg in setup:
            self._ran_rx.feed(encode_frame(msg))
        ack = self._ran_rx.next_message()
        plan = [self._ran_rx.next_message() for _ in range(ack.commands)]
        # detector link handshake
        self._to_ctrl.feed(encode_frame(Hello()))
        _expect_hello(self._to_ctrl.next_message())
        self._det_rx.feed(encode_frame(Hello()))
        _expect_hello(self._det_rx.next_message())
        return plan

    def _exchange(self, msg: ControlMessage, reply_rx: StreamDecoder) -> list[ControlMessage]:
        self._to_ctrl.feed(encode_frame(msg))
        inbound = self._to_ctrl.next_message()
        commands = self._controller.handle(inbound)
        reply_rx.feed(encode_frame(Ack(acks=type_tag(inbound), commands=len(commands))))
        for cmd in commands:
            self._ran_rx.feed(encode_frame(cmd))
        ack = reply_rx.next_message()
        if not isinstance(ack, Ack):
            raise ProtocolError(f"expected Ack, got {type_tag(ack)}")
        return [self._ran_rx.next_message() for _ in range(ack.commands)]

    def send_report(self, report: AnomalyReportMsg) -> list[ControlMessage]:
        return self._exchange(report, self._det_rx)

    def send_indication(self, indication: SliceIndication) -> list[ControlMessage]:
        return self._exchange(indication, self._ran_rx)

    def close(self):
        pass


class _SocketStream:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.decoder = StreamDecoder()
        sock.settimeout(RECV_TIMEOUT_S)

    def send(self, msg: ControlMessage):
        self.sock.sendall(encode_frame(msg))

    def recv(self) -> ControlMessage:
        while True:
            msg = self.decoder.next_message()
            if msg is not None:
                return msg
            try:
                data = self.sock.recv(65536)
            except socket.timeout as exc:
                raise ProtocolError("timed out waiting for a frame") from exc
            if not data:
                raise ProtocolError("connection closed mid-stream")
            self.decoder.feed(data)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class SocketControllerLink:
    """Spawns the controller as a subprocess and talks over loopback TCP."""

    def __init__(self, policy: SlaPolicy):
        self._policy = policy
        self._proc: subprocess.Popen | None = None
        self._det: _SocketStream | None = None
        self._ran: _SocketStream | None = None
        self._policy_file: Path | None = None

    def start(self) -> list[ControlMessage]:
        det_srv = socket.create_server(("127.0.0.1", 0))
        ran_srv = socket.create_server(("127.0.0.1", 0))
        det_srv.settimeout(RECV_TIMEOUT_S)
        ran_srv.settimeout(RECV_TIMEOUT_S)
        fd, path = tempfile.mkstemp(prefix="ctrl_policy_", suffix=".json")
        self._policy_file = Path(path)
        with open(fd, "w", encoding="utf-8") as fh:
            json.dump(policy_doc(self._policy), fh)
        self._proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "sliceguard._ctrl_proc",
                "--det-port",
                str(det_srv.getsockname()[1]),
                "--ran-port",
                str(ran_srv.getsockname()[1]),
                "--policy",
                str(self._policy_file),
            ]
        )
        det_sock, _ = det_srv.accept()
        ran_sock, _ = ran_srv.accept()
        det_srv.close()
        ran_srv.close()
        self._det = _SocketStream(det_sock)
        self._ran = _SocketStream(ran_sock)

        self._ran.send(Hello())
        _expect_hello(self._ran.recv())
        ack = self._ran.recv()
        if not isinstance(ack, Ack):
            raise ProtocolError(f"expected setup Ack, got {type_tag(ack)}")
        plan = [self._ran.recv() for _ in range(ack.commands)]
        self._det.send(Hello())
        _expect_hello(self._det.recv())
        return plan

    def _collect(self, stream: _SocketStream) -> list[ControlMessage]:
        ack = stream.recv()
        if not isinstance(ack, Ack):
            raise ProtocolError(f"expected Ack, got {type_tag(ack)}")
        return [self._ran.recv() for _ in range(ack.commands)]

    def send_report(self, report: AnomalyReportMsg) -> list[ControlMessage]:
        self._det.send(report)
        return self._collect(self._det)

    def send_indication(self, indication: SliceIndication) -> list[ControlMessage]:
        self._ran.send(indication)
        return self._collect(self._ran)

    def close(self):
        for stream in (self._det, self._ran):
            if stream is not None:
                stream.close()
        if self._proc is not None:
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._policy_file is not None:
            self._policy_file.unlink(missing_ok=True)
