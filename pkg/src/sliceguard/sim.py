"""Discrete-time downlink simulator.

Drives a 1 ms TTI clock: traffic sources enqueue into per-UE FIFO queues,
the scheduler splits the PRB grid, queues drain over the granted PRBs, and
delivered packets are handed to the detector tap. RTT probes ride the same
queues; a load proxy tracks packets processed plus weighted control-plane
traffic. Everything is driven by one seeded RNG, so runs are reproducible.
"""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass, field

from sliceguard.detect import PacketFeatures
from sliceguard.errors import ConfigurationError
from sliceguard.protocol import (
    ControlMessage,
    RrcReleaseCmd,
    SliceCreate,
    SliceIndication,
    ThrottleCmd,
    UeAssociate,
)
from sliceguard.sched import (
    DEFAULT_BITS_PER_PRB,
    DEFAULT_EMA_ALPHA,
    DEFAULT_GRID_SIZE,
    Edf,
    SliceConfig,
    SliceRuntimeState,
    allocate_tti,
    intra_slice_schedule,
    update_ema,
    validate_slice_configs,
)

DEFAULT_QUEUE_BOUND = 5_000_000
DEFAULT_PROBE_INTERVAL = 100
DEFAULT_PROBE_BYTES = 32
DEFAULT_PROXY_WINDOW = 1000
DEFAULT_PROXY_CAPACITY = 20_000
DEFAULT_PROXY_KAPPA = 10.0
DEFAULT_REPLAY_RPS = 2000.0
REPLAY_MIN_PAYLOAD = 64

BENIGN_TEMPLATE = PacketFeatures("tcp", "http", "SF", 240, 0)


class RrcState(enum.Enum):
    CONNECTED = "Connected"
    RELEASED = "Released"


@dataclass(frozen=True)
class LinkModel:
    bits_per_prb_per_tti: int = DEFAULT_BITS_PER_PRB
    tti_ms: float = 1.0
    base_rtt_ms: float = 10.0

    def __post_init__(self):
        if self.bits_per_prb_per_tti <= 0 or self.tti_ms <= 0 or self.base_rtt_ms <= 0:
            raise ConfigurationError("link constants must be strictly positive")


@dataclass
class Packet:
    size_bytes: int
    enqueue_tti: int
    deadline_tti: int | None = None
    is_probe: bool = False
    features: PacketFeatures | None = None
    remaining_bytes: int = field(init=False)

    def __post_init__(self):
        self.remaining_bytes = self.size_bytes


class CbrSource:
    """Constant bit rate; emits fixed-size packets with benign features."""

    def __init__(
        self,
        mbps: float,
        packet_bytes: int = 1500,
        features: PacketFeatures | None = None,
        start_tti: int = 0,
        end_tti: int | None = None,
    ):
        self.mbps = mbps
        self.packet_bytes = packet_bytes
        self.features = features
        self.start_tti = start_tti
        self.end_tti = end_tti
        self._carry = 0.0

    def emit(self, tti: int, tti_ms: float, rng: random.Random) -> list[tuple[int, PacketFeatures]]:
        if tti < self.start_tti or (self.end_tti is not None and tti >= self.end_tti):
            return []
        self._carry += self.mbps * 125.0 * tti_ms
        out = []
        while self._carry >= self.packet_bytes:
            self._carry -= self.packet_bytes
            out.append((self.packet_bytes, self._features_for(self.packet_bytes)))
        return out

    def _features_for(self, size: int) -> PacketFeatures:
        base = self.features or BENIGN_TEMPLATE
        return PacketFeatures(base.protocol_type, base.service, base.flag, base.src_bytes, size)


class PoissonSource(CbrSource):
    """Poisson packet arrivals at a mean byte rate, fixed packet size."""

    def __init__(self, mbps: float, mean_pkt_bytes: int = 1500, **kwargs):
        super().__init__(mbps, packet_bytes=mean_pkt_bytes, **kwargs)
        self.lam = mbps * 125.0 / mean_pkt_bytes

    def emit(self, tti, tti_ms, rng):
        if tti < self.start_tti or (self.end_tti is not None and tti >= self.end_tti):
            return []
        count = _knuth_poisson(rng, self.lam * tti_ms)
        return [(self.packet_bytes, self._features_for(self.packet_bytes)) for _ in range(count)]


def _knuth_poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


class ReplaySource:
    """Replays feature records cyclically at a fixed record rate.

    The downlink payload carried per record is max(src_bytes, a floor),
    since many flood records describe tiny or empty payloads.
    """

    def __init__(
        self,
        records: list[PacketFeatures],
        records_per_second: float = DEFAULT_REPLAY_RPS,
        start_tti: int = 0,
        end_tti: int | None = None,
        min_payload: int = REPLAY_MIN_PAYLOAD,
    ):
        if not records:
            raise ConfigurationError("replay source needs at least one record")
        self.records = records
        self.rps = records_per_second
        self.start_tti = start_tti
        self.end_tti = end_tti
        self.min_payload = min_payload
        self._carry = 0.0
        self._idx = 0

    def emit(self, tti, tti_ms, rng):
        if tti < self.start_tti or (self.end_tti is not None and tti >= self.end_tti):
            return []
        self._carry += self.rps * tti_ms / 1000.0
        out = []
        while self._carry >= 1.0:
            self._carry -= 1.0
            rec = self.records[self._idx % len(self.records)]
            self._idx += 1
            out.append((max(rec.src_bytes, self.min_payload), rec))
        return out


@dataclass
class UeContext:
    ue_id: int
    slice_id: int
    sources: list = field(default_factory=list)
    queue: deque = field(default_factory=deque)
    queue_bytes: int = 0
    queue_bound: int = DEFAULT_QUEUE_BOUND
    throttle_cap: float = 1.0
    rrc_state: RrcState = RrcState.CONNECTED
    anomaly_score: float = 0.0
    bytes_generated: int = 0
    bytes_delivered: int = 0
    bytes_dropped: int = 0


@dataclass
class TtiDelta:
    """What one clock tick produced, for metrics and the detector tap."""

    tti: int
    delivered_bytes: dict[int, int]
    tapped: list[tuple[int, int, PacketFeatures]]  # (slice_id, ue_id, features)
    rtt_samples: list[tuple[int, float | None]]  # None encodes a probe timeout
    load_proxy_pct: float


class RanSim:
    def __init__(
        self,
        slices: list[SliceConfig],
        ues: list[UeContext],
        link: LinkModel = LinkModel(),
        grid_size: int = DEFAULT_GRID_SIZE,
        seed: int = 0,
        ema_alpha: float = DEFAULT_EMA_ALPHA,
        probe_interval: int = DEFAULT_PROBE_INTERVAL,
        probe_bytes: int = DEFAULT_PROBE_BYTES,
        proxy_window: int = DEFAULT_PROXY_WINDOW,
        proxy_capacity: int = DEFAULT_PROXY_CAPACITY,
        proxy_kappa: float = DEFAULT_PROXY_KAPPA,
        quantum: int = 1,
    ):
        problems = validate_slice_configs(slices, grid_size)
        if problems:
            raise ConfigurationError("; ".join(problems))
        self.slice_configs: dict[int, SliceConfig] = {c.slice_id: c for c in slices}
        self.slice_states: dict[int, SliceRuntimeState] = {
            c.slice_id: SliceRuntimeState() for c in slices
        }
        self.ues: dict[int, UeContext] = {}
        for ue in ues:
            if ue.ue_id in self.ues:
                raise ConfigurationError(f"duplicate ue_id {ue.ue_id}")
            if ue.slice_id not in self.slice_configs:
                raise ConfigurationError(f"ue {ue.ue_id} bound to missing slice {ue.slice_id}")
            self.ues[ue.ue_id] = ue
        self.link = link
        self.grid_size = grid_size
        self.ema_alpha = ema_alpha
        self.probe_interval = probe_interval
        self.probe_bytes = probe_bytes
        self.proxy_window = proxy_window
        self.proxy_capacity = proxy_capacity
        self.proxy_kappa = proxy_kappa
        self.quantum = quantum
        self.rng = random.Random(seed)
        self.tti = 0
        self.rtt_series: dict[int, list[tuple[int, float | None]]] = {u: [] for u in self.ues}
        self._proxy_entries: deque = deque(maxlen=proxy_window)
        self._pending_control_msgs = 0
        self._timeout_samples: list[tuple[int, float | None]] = []
        self._indication_acc: dict[int, dict[str, float]] = {}
        self._indication_ue_acc: dict[int, int] = {}
        self._indication_ttis = 0

    # -- control-plane entry points -------------------------------------

    def apply_command(self, msg: ControlMessage):
        if isinstance(msg, ThrottleCmd):
            ue = self._ue(msg.ue_id)
            if ue.rrc_state is RrcState.CONNECTED:
                ue.throttle_cap = msg.cap
        elif isinstance(msg, RrcReleaseCmd):
            self.release(msg.ue_id)
        elif isinstance(msg, SliceCreate):
            self.reconfigure_slice(msg.config)
        elif isinstance(msg, UeAssociate):
            ue = self._ue(msg.ue_id)
            if msg.slice_id not in self.slice_configs:
                raise ConfigurationError(f"associate to missing slice {msg.slice_id}")
            ue.slice_id = msg.slice_id
        else:
            raise ConfigurationError(f"simulator cannot apply {type(msg).__name__}")

    def release(self, ue_id: int):
        ue = self._ue(ue_id)
        if ue.rrc_state is RrcState.RELEASED:
            return
        ue.rrc_state = RrcState.RELEASED
        ue.bytes_dropped += sum(p.remaining_bytes for p in ue.queue)
        ue.queue.clear()
        ue.queue_bytes = 0
        ue.throttle_cap = 0.0

    def reconfigure_slice(self, config: SliceConfig):
        candidate = dict(self.slice_configs)
        candidate[config.slice_id] = config
        problems = validate_slice_configs(list(candidate.values()), self.grid_size)
        if problems:
            raise ConfigurationError("; ".join(problems))
        if config.slice_id not in self.slice_states:
            self.slice_states[config.slice_id] = SliceRuntimeState()
        self.slice_configs[config.slice_id] = config

    def note_control_messages(self, count: int):
        self._pending_control_msgs += count

    # -- main clock ------------------------------------------------------

    def step(self) -> TtiDelta:
        tti = self.tti
        self._generate_traffic(tti)
        self._enqueue_probes(tti)

        demands = self._slice_demands()
        edf_queues = self._edf_queues()
        alloc = allocate_tti(
            list(self.slice_configs.values()),
            [self.slice_states[c.slice_id] for c in self.slice_configs.values()],
            demands,
            self.grid_size,
            bits_per_prb=self.link.bits_per_prb_per_tti,
            tti=tti,
            edf_queues=edf_queues or None,
            alpha=self.ema_alpha,
            tti_ms=self.link.tti_ms,
            quantum=self.quantum,
        )
        per_ue = dict(alloc.per_ue)  # EDF grants arrive pre-assigned
        for sid in sorted(self.slice_configs):
            if isinstance(self.slice_configs[sid].policy, Edf):
                continue
            members = [
                (u.ue_id, u.queue_bytes, u.throttle_cap)
                for u in self._slice_ues(sid)
                if u.rrc_state is RrcState.CONNECTED
            ]
            per_ue.update(
                intra_slice_schedule(members, alloc.per_slice.get(sid, 0), self.link.bits_per_prb_per_tti)
            )

        delivered_bytes, tapped, rtt_samples, packets_processed = self._drain(tti, per_ue)
        self._update_slice_state(alloc.per_slice, delivered_bytes)

        self._proxy_entries.append((packets_processed, self._pending_control_msgs))
        self._pending_control_msgs = 0
        rtt_samples.extend(self._timeout_samples)
        self._timeout_samples = []

        self._accumulate_indication(alloc.per_slice, delivered_bytes)
        self.tti += 1
        return TtiDelta(
            tti=tti,
            delivered_bytes=delivered_bytes,
            tapped=tapped,
            rtt_samples=rtt_samples,
            load_proxy_pct=self.load_proxy(),
        )

    # -- measurements -----------------------------------------------------

    def load_proxy(self, window: int | None = None) -> float:
        """Synthetic core-load figure: packets plus kappa-weighted control
        messages over the trailing window, as a percentage of capacity."""
        entries = list(self._proxy_entries)
        if window is not None:
            if window < 1:
                raise ConfigurationError("proxy window must be >= 1 TTI")
            entries = entries[-window:]
        if not entries:
            return 0.0
        packets = sum(e[0] for e in entries)
        msgs = sum(e[1] for e in entries)
        return 100.0 * min(1.0, (packets + self.proxy_kappa * msgs) / self.proxy_capacity)

    def rtt_samples(self, ue_id: int) -> list[tuple[int, float | None]]:
        if ue_id not in self.rtt_series:
            raise ConfigurationError(f"unknown ue_id {ue_id}")
        return self.rtt_series[ue_id]

    def build_indication(self) -> SliceIndication:
        ttis = max(self._indication_ttis, 1)
        ms = ttis * self.link.tti_ms
        per_slice = {}
        for sid in sorted(self.slice_configs):
            acc = self._indication_acc.get(sid, {"bits": 0.0, "prbs": 0.0})
            per_slice[sid] = {
                "delivered_mbps": acc["bits"] / (1000.0 * ms),
                "prb_share": acc["prbs"] / (self.grid_size * ttis),
            }
        per_ue = {
            uid: {"delivered_mbps": bits / (1000.0 * ms)}
            for uid, bits in sorted(self._indication_ue_acc.items())
        }
        ind = SliceIndication(tti=self.tti, per_slice=per_slice, per_ue=per_ue)
        self._indication_acc = {}
        self._indication_ue_acc = {}
        self._indication_ttis = 0
        return ind

    def conservation_ok(self) -> bool:
        for ue in self.ues.values():
            if ue.bytes_generated != ue.bytes_delivered + ue.bytes_dropped + ue.queue_bytes:
                return False
        return True

    def inject(self, ue_id: int, size_bytes: int, features: PacketFeatures | None = None):
        """Test helper: enqueue a packet directly, honoring the queue bound."""
        ue = self._ue(ue_id)
        ue.bytes_generated += size_bytes
        self._enqueue(ue, Packet(size_bytes, self.tti, features=features))

    # -- internals ---------------------------------------------------------

    def _ue(self, ue_id: int) -> UeContext:
        try:
            return self.ues[ue_id]
        except KeyError:
            raise ConfigurationError(f"unknown ue_id {ue_id}") from None

    def _slice_ues(self, sid: int):
        return [self.ues[u] for u in sorted(self.ues) if self.ues[u].slice_id == sid]

    def _deadline_for(self, ue: UeContext, tti: int) -> int | None:
        pol = self.slice_configs[ue.slice_id].policy
        if isinstance(pol, Edf):
            return tti + max(1, math.ceil(pol.deadline_ms / self.link.tti_ms))
        return None

    def _enqueue(self, ue: UeContext, packet: Packet):
        if ue.rrc_state is RrcState.RELEASED:
            ue.bytes_dropped += packet.size_bytes
            return
        if not packet.is_probe and ue.queue_bytes + packet.size_bytes > ue.queue_bound:
            ue.bytes_dropped += packet.size_bytes
            return
        ue.queue.append(packet)
        ue.queue_bytes += packet.size_bytes

    def _generate_traffic(self, tti: int):
        for uid in sorted(self.ues):
            ue = self.ues[uid]
            for source in ue.sources:
                for size, features in source.emit(tti, self.link.tti_ms, self.rng):
                    ue.bytes_generated += size
                    self._enqueue(
                        ue,
                        Packet(size, tti, deadline_tti=self._deadline_for(ue, tti), features=features),
                    )

    def _enqueue_probes(self, tti: int):
        self._timeout_samples = []
        if self.probe_interval <= 0 or tti % self.probe_interval != 0:
            return
        for uid in sorted(self.ues):
            ue = self.ues[uid]
            if ue.rrc_state is RrcState.RELEASED:
                self.rtt_series[uid].append((tti, None))
                self._timeout_samples.append((uid, None))
                continue
            ue.bytes_generated += self.probe_bytes
            self._enqueue(ue, Packet(self.probe_bytes, tti, is_probe=True))

    def _slice_demands(self) -> dict[int, int]:
        demands = {sid: 0 for sid in self.slice_configs}
        for ue in self.ues.values():
            if ue.rrc_state is RrcState.CONNECTED and ue.throttle_cap > 0.0:
                demands[ue.slice_id] += ue.queue_bytes
        return demands

    def _edf_queues(self):
        out: dict[int, dict[int, list[tuple[int, int]]]] = {}
        for sid, cfg in self.slice_configs.items():
            if not isinstance(cfg.policy, Edf):
                continue
            queues: dict[int, list[tuple[int, int]]] = {}
            for ue in self._slice_ues(sid):
                if ue.rrc_state is RrcState.CONNECTED and ue.queue:
                    queues[ue.ue_id] = [
                        (p.remaining_bytes, p.deadline_tti if p.deadline_tti is not None else self.tti)
                        for p in ue.queue
                    ]
            out[sid] = queues
        return out

    def _drain(self, tti: int, per_ue: dict[int, int]):
        delivered_bytes = {uid: 0 for uid in self.ues}
        tapped: list[tuple[int, int, PacketFeatures]] = []
        rtt_samples: list[tuple[int, float | None]] = []
        packets_processed = 0
        for uid in sorted(self.ues):
            ue = self.ues[uid]
            budget_bits = per_ue.get(uid, 0) * self.link.bits_per_prb_per_tti
            while ue.queue and budget_bits >= 8:
                head = ue.queue[0]
                take = min(head.remaining_bytes, budget_bits // 8)
                if take == 0:
                    break
                head.remaining_bytes -= take
                budget_bits -= take * 8
                ue.queue_bytes -= take
                ue.bytes_delivered += take
                delivered_bytes[uid] += take
                if head.remaining_bytes == 0:
                    ue.queue.popleft()
                    if head.is_probe:
                        rtt = self.link.base_rtt_ms + (tti - head.enqueue_tti) * self.link.tti_ms
                        self.rtt_series[uid].append((tti, rtt))
                        rtt_samples.append((uid, rtt))
                    else:
                        packets_processed += 1
                        if head.features is not None:
                            tapped.append((ue.slice_id, uid, head.features))
        return delivered_bytes, tapped, rtt_samples, packets_processed

    def _update_slice_state(self, per_slice: dict[int, int], delivered_bytes: dict[int, int]):
        slice_bits = {sid: 0 for sid in self.slice_configs}
        for uid, nbytes in delivered_bytes.items():
            slice_bits[self.ues[uid].slice_id] += nbytes * 8
        for sid in self.slice_configs:
            state = update_ema(
                self.slice_states[sid],
                slice_bits[sid],
                per_slice.get(sid, 0),
                self.grid_size,
                self.ema_alpha,
                tti_ms=self.link.tti_ms,
            )
            backlog = sum(u.queue_bytes for u in self._slice_ues(sid))
            self.slice_states[sid] = SliceRuntimeState(
                ema_rate_mbps=state.ema_rate_mbps,
                ema_prb_share=state.ema_prb_share,
                backlog_bytes=backlog,
            )

    def _accumulate_indication(self, per_slice: dict[int, int], delivered_bytes: dict[int, int]):
        for sid in self.slice_configs:
            acc = self._indication_acc.setdefault(sid, {"bits": 0.0, "prbs": 0.0})
            acc["prbs"] += per_slice.get(sid, 0)
        for uid, nbytes in delivered_bytes.items():
            sid = self.ues[uid].slice_id
            self._indication_acc[sid]["bits"] += nbytes * 8
            self._indication_ue_acc[uid] = self._indication_ue_acc.get(uid, 0) + nbytes * 8
        self._indication_ttis += 1
