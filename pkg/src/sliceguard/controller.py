"""Slicing controller policy: reacts to anomaly reports with proportional
throttling and RRC release, and optionally re-weights rate reservations
that persistently miss their SLA while other slices run a surplus.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from sliceguard.errors import ConfigurationError
from sliceguard.protocol import (
    AnomalyReportMsg,
    ControlMessage,
    RrcReleaseCmd,
    SliceCreate,
    SliceIndication,
    ThrottleCmd,
    UeAssociate,
)
from sliceguard.sched import NvsCapacity, NvsRate, SliceConfig

log = logging.getLogger(__name__)

FULL_SCORE = 1.0


@dataclass(frozen=True)
class UeThreatState:
    ue_id: int
    last_score: float = 0.0
    consecutive_full_score_reports: int = 0
    released: bool = False


@dataclass(frozen=True)
class SlaPolicy:
    """Controller knobs plus a mirror of the slice plan it enforces."""

    slice_configs: tuple[SliceConfig, ...]
    ue_slices: tuple[tuple[int, int], ...] = ()  # (ue_id, slice_id)
    min_cap: float = 0.05
    release_after: int = 1  # full-score reports required before release
    full_window_packets: int = 40  # packets seen before a 1.0 score may release
    sla_enforcement: bool = False
    violation_streak: int = 5
    rate_raise_factor: float = 1.25

    def __post_init__(self):
        if not 0.0 < self.min_cap < 1.0:
            raise ConfigurationError(f"min_cap {self.min_cap} not in (0, 1)")


def on_anomaly_report(
    report: AnomalyReportMsg, state: UeThreatState, policy: SlaPolicy
) -> tuple[UeThreatState, list[ControlMessage]]:
    """Throttle proportionally to the window score; release at sustained 1.0.

    The release trigger additionally requires the report to cover a full
    window (packets_seen >= full_window_packets) so a short all-anomalous
    prefix cannot disconnect a UE off a handful of packets.
    """
    if state.released:
        log.warning("report for released ue %d ignored (score %.3f)", report.ue_id, report.window_score)
        return state, []

    cap = min(max(1.0 - report.window_score, policy.min_cap), 1.0)
    out: list[ControlMessage] = [ThrottleCmd(ue_id=report.ue_id, cap=cap)]

    full = report.window_score >= FULL_SCORE and report.packets_seen >= policy.full_window_packets
    streak = state.consecutive_full_score_reports + 1 if full else 0
    released = state.released
    if full and streak >= policy.release_after:
        out.append(RrcReleaseCmd(ue_id=report.ue_id))
        released = True
    return (
        replace(
            state,
            last_score=report.window_score,
            consecutive_full_score_reports=streak,
            released=released,
        ),
        out,
    )


class SlaTracker:
    """Consecutive-violation bookkeeping behind on_slice_indication."""

    def __init__(self, policy: SlaPolicy):
        self.policy = policy
        self.configs = {c.slice_id: c for c in policy.slice_configs}
        self.streaks: dict[int, int] = {sid: 0 for sid in self.configs}

    def on_slice_indication(self, indication: SliceIndication) -> list[ControlMessage]:
        """Raise a rate slice's reservation after ``violation_streak``
        consecutive misses of 0.9 x min_rate while some other slice runs
        above its own reservation. Emits one reconfiguration per streak."""
        for sid in indication.per_slice:
            if sid not in self.configs:
                raise ConfigurationError(f"indication for unknown slice {sid}")

        out: list[ControlMessage] = []
        for sid in sorted(self.configs):
            cfg = self.configs[sid]
            if not isinstance(cfg.policy, NvsRate) or sid not in indication.per_slice:
                continue
            delivered = float(indication.per_slice[sid].get("delivered_mbps", 0.0))
            if delivered >= 0.9 * cfg.policy.min_rate_mbps:
                self.streaks[sid] = 0
                continue
            self.streaks[sid] += 1
            if self.streaks[sid] < self.policy.violation_streak:
                continue
            if not self._surplus_elsewhere(indication, sid):
                continue
            raised = cfg.policy.min_rate_mbps * self.policy.rate_raise_factor
            new_cfg = SliceConfig(
                slice_id=sid,
                policy=NvsRate(min_rate_mbps=raised, ref_rate_mbps=max(cfg.policy.ref_rate_mbps, raised)),
            )
            self.configs[sid] = new_cfg
            self.streaks[sid] = 0
            out.append(SliceCreate(config=new_cfg))
        return out

    def _surplus_elsewhere(self, indication: SliceIndication, needy_sid: int) -> bool:
        for sid, metrics in indication.per_slice.items():
            if sid == needy_sid or sid not in self.configs:
                continue
            pol = self.configs[sid].policy
            if isinstance(pol, NvsRate) and float(metrics.get("delivered_mbps", 0.0)) > pol.min_rate_mbps:
                return True
            if isinstance(pol, NvsCapacity) and float(metrics.get("prb_share", 0.0)) > pol.share:
                return True
        return False


class SliceController:
    """Event-loop body: one ordered inbound stream, pure state transitions."""

    def __init__(self, policy: SlaPolicy):
        self.policy = policy
        self.tracker = SlaTracker(policy)
        self.threats: dict[int, UeThreatState] = {
            ue_id: UeThreatState(ue_id=ue_id) for ue_id, _ in policy.ue_slices
        }

    def setup_messages(self) -> list[ControlMessage]:
        """Initial slice plan pushed to the RAN after the handshake."""
        out: list[ControlMessage] = [SliceCreate(config=c) for c in self.policy.slice_configs]
        out.extend(UeAssociate(ue_id=u, slice_id=s) for u, s in self.policy.ue_slices)
        return out

    def handle(self, msg: ControlMessage) -> list[ControlMessage]:
        if isinstance(msg, AnomalyReportMsg):
            state = self.threats.get(msg.ue_id)
            if state is None:
                state = self.threats[msg.ue_id] = UeThreatState(ue_id=msg.ue_id)
            new_state, out = on_anomaly_report(msg, state, self.policy)
            self.threats[msg.ue_id] = new_state
            return out
        if isinstance(msg, SliceIndication):
            if not self.policy.sla_enforcement:
                return []
            return self.tracker.on_slice_indication(msg)
        return []
