"""Controller worker process for socket mode.

Connects back to the runner's two listening ports (detector side, RAN
side), performs the Hello handshake, pushes the slice plan, then serves
requests until both connections close.
"""

from __future__ import annotations

import argparse
import json
import selectors
import socket

from sliceguard.controller import SliceController
from sliceguard.protocol import Ack, Hello, StreamDecoder, encode_frame, type_tag
from sliceguard.transport import _expect_hello, policy_from_doc


def _serve(det_sock: socket.socket, ran_sock: socket.socket, controller: SliceController):
    streams = {det_sock: StreamDecoder(), ran_sock: StreamDecoder()}

    def recv_msg(sock: socket.socket):
        decoder = streams[sock]
        while True:
            msg = decoder.next_message()
            if msg is not None:
                return msg
            data = sock.recv(65536)
            if not data:
                return None
            decoder.feed(data)

    # RAN handshake first, then push the slice plan, then detector handshake.
    msg = recv_msg(ran_sock)
    _expect_hello(msg)
    ran_sock.sendall(encode_frame(Hello()))
    setup = controller.setup_messages()
    ran_sock.sendall(encode_frame(Ack(acks="Hello", commands=len(setup))))
    for m in setup:
        ran_sock.sendall(encode_frame(m))
    msg = recv_msg(det_sock)
    _expect_hello(msg)
    det_sock.sendall(encode_frame(Hello()))

    sel = selectors.DefaultSelector()
    sel.register(det_sock, selectors.EVENT_READ)
    sel.register(ran_sock, selectors.EVENT_READ)
    open_socks = {det_sock, ran_sock}
    while open_socks:
        for key, _ in sel.select(timeout=60):
            sock = key.fileobj
            msg = recv_msg(sock)
            if msg is None:
                sel.unregister(sock)
                open_socks.discard(sock)
                continue
            commands = controller.handle(msg)
            sock.sendall(encode_frame(Ack(acks=type_tag(msg), commands=len(commands))))
            for cmd in commands:
                ran_sock.sendall(encode_frame(cmd))
        if not open_socks:
            break


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--det-port", type=int, required=True)
    parser.add_argument("--ran-port", type=int, required=True)
    parser.add_argument("--policy", required=True)
    args = parser.parse_args(argv)

    with open(args.policy, "r", encoding="utf-8") as fh:
        policy = policy_from_doc(json.load(fh))
    controller = SliceController(policy)

    det_sock = socket.create_connection(("127.0.0.1", args.det_port))
    ran_sock = socket.create_connection(("127.0.0.1", args.ran_port))
    try:
        _serve(det_sock, ran_sock, controller)
    finally:
        det_sock.close()
        ran_sock.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
