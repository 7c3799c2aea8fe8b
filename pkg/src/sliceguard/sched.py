"""Per-TTI PRB scheduling across slices and across UEs within a slice.

Four slice policies are supported: static PRB sets, NVS rate-based and
capacity-based reservations, and earliest-deadline-first. All functions
are pure: state goes in, new state or an allocation comes out, so they are
safe to drive from any loop or thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from sliceguard import kernels
from sliceguard.errors import ConfigurationError, PolicyMismatchError

# Grid of 106 PRBs at 1132 bits/PRB/TTI and 1 ms TTIs carries ~120 Mbit/s.
DEFAULT_GRID_SIZE = 106
DEFAULT_BITS_PER_PRB = 1132
DEFAULT_EMA_ALPHA = 0.01
NVS_EPSILON = 1e-6


@dataclass(frozen=True)
class Static:
    """Fixed, exclusively owned set of PRB indices."""

    prb_set: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "prb_set", frozenset(self.prb_set))


@dataclass(frozen=True)
class NvsRate:
    """Rate-based reservation: guaranteed and reference throughput in Mbps."""

    min_rate_mbps: float
    ref_rate_mbps: float


@dataclass(frozen=True)
class NvsCapacity:
    """Capacity-based reservation: fraction of the PRB grid in (0, 1]."""

    share: float


@dataclass(frozen=True)
class Edf:
    """Deadline-driven slice; packets carry absolute deadlines in TTIs."""

    deadline_ms: float


Policy = Static | NvsRate | NvsCapacity | Edf


@dataclass(frozen=True)
class SliceConfig:
    slice_id: int
    policy: Policy


@dataclass(frozen=True)
class SliceRuntimeState:
    """Per-slice scheduler bookkeeping carried between TTIs."""

    ema_rate_mbps: float = 0.0
    ema_prb_share: float = 0.0
    backlog_bytes: int = 0


@dataclass
class PrbAllocation:
    """PRB grant for one TTI: per-slice counts plus any per-UE grants
    already decided at slice level (EDF fills these directly)."""

    tti: int
    per_slice: dict[int, int] = field(default_factory=dict)
    per_ue: dict[int, int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.per_slice.values())


def validate_slice_configs(configs: Sequence[SliceConfig], grid_size: int) -> list[str]:
    """Return all invariant violations for a slice set (empty list = valid)."""
    problems: list[str] = []
    seen: dict[int, SliceConfig] = {}
    for cfg in configs:
        if cfg.slice_id in seen:
            problems.append(f"duplicate slice_id {cfg.slice_id}")
        seen[cfg.slice_id] = cfg

    static = [(c.slice_id, c.policy) for c in configs if isinstance(c.policy, Static)]
    for sid, pol in static:
        bad = sorted(i for i in pol.prb_set if i < 0 or i >= grid_size)
        if bad:
            problems.append(f"slice {sid}: static PRB indices {bad} outside grid of {grid_size}")
    for i in range(len(static)):
        for j in range(i + 1, len(static)):
            overlap = sorted(static[i][1].prb_set & static[j][1].prb_set)
            if overlap:
                problems.append(
                    f"slices {static[i][0]} and {static[j][0]}: overlapping static PRBs {overlap}"
                )

    share_sum = 0.0
    for cfg in configs:
        pol = cfg.policy
        if isinstance(pol, NvsCapacity):
            if not 0.0 < pol.share <= 1.0:
                problems.append(f"slice {cfg.slice_id}: capacity share {pol.share} not in (0, 1]")
            else:
                share_sum += pol.share
        elif isinstance(pol, NvsRate):
            if not 0.0 < pol.min_rate_mbps <= pol.ref_rate_mbps:
                problems.append(
                    f"slice {cfg.slice_id}: rate reservation requires 0 < min ({pol.min_rate_mbps})"
                    f" <= ref ({pol.ref_rate_mbps})"
                )
        elif isinstance(pol, Edf):
            if pol.deadline_ms < 1.0:
                problems.append(f"slice {cfg.slice_id}: EDF deadline {pol.deadline_ms} ms below one TTI")
    if share_sum > 1.0 + 1e-9:
        problems.append(f"capacity shares sum to {share_sum:.6f} > 1.0")
    return problems


def nvs_priority(config: SliceConfig, state: SliceRuntimeState) -> float:
    """Reservation pressure of an NVS slice; higher means further below it.

    Rate slices: min_rate / max(ema_rate, eps), with the moving average
    capped at the reference rate. Capacity slices: share / max(ema_share, eps).
    """
    pol = config.policy
    if isinstance(pol, NvsRate):
        ema = min(state.ema_rate_mbps, pol.ref_rate_mbps)
        return pol.min_rate_mbps / max(ema, NVS_EPSILON)
    if isinstance(pol, NvsCapacity):
        return pol.share / max(state.ema_prb_share, NVS_EPSILON)
    raise PolicyMismatchError(f"nvs_priority on {type(pol).__name__} slice {config.slice_id}")


def update_ema(
    state: SliceRuntimeState,
    delivered_bits: int,
    used_prbs: int,
    grid_size: int,
    alpha: float = DEFAULT_EMA_ALPHA,
    *,
    tti_ms: float = 1.0,
) -> SliceRuntimeState:
    """Fold one TTI's delivery into the slice's moving averages.

    alpha = 1 degenerates to the instantaneous value.
    """
    if not 0.0 < alpha <= 1.0:
        raise ConfigurationError(f"ema alpha {alpha} not in (0, 1]")
    inst_rate = delivered_bits / (1000.0 * tti_ms)
    inst_share = used_prbs / grid_size
    return replace(
        state,
        ema_rate_mbps=(1.0 - alpha) * state.ema_rate_mbps + alpha * inst_rate,
        ema_prb_share=(1.0 - alpha) * state.ema_prb_share + alpha * inst_share,
    )


def prbs_for_bytes(n_bytes: int, bits_per_prb: int) -> int:
    if n_bytes <= 0:
        return 0
    return -(-(n_bytes * 8) // bits_per_prb)


def edf_schedule(
    queues: Mapping[int, Sequence[tuple[int, int]]],
    grid_size: int,
    bits_per_prb: int = DEFAULT_BITS_PER_PRB,
) -> dict[int, int]:
    """Grant PRBs to head-of-line packets in nondecreasing deadline order.

    queues: per-UE FIFO of (bytes, absolute_deadline_tti). Ties on deadline
    go to the lower ue_id. The last grant may be partial if the grid runs
    out mid-packet.
    """
    heads: list[tuple[int, int, int]] = []  # (deadline, ue_id, queue position)
    for ue_id in sorted(queues):
        if queues[ue_id]:
            heads.append((queues[ue_id][0][1], ue_id, 0))
    heads.sort()

    grants: dict[int, int] = {}
    remaining = grid_size
    while remaining > 0 and heads:
        deadline, ue_id, pos = heads.pop(0)
        n_bytes = queues[ue_id][pos][0]
        need = prbs_for_bytes(n_bytes, bits_per_prb)
        give = min(need, remaining)
        if give > 0:
            grants[ue_id] = grants.get(ue_id, 0) + give
            remaining -= give
        if give == need:
            pos += 1
            if pos < len(queues[ue_id]):
                # insort keeps (deadline, ue_id) order for the next head
                entry = (queues[ue_id][pos][1], ue_id, pos)
                lo = 0
                while lo < len(heads) and heads[lo][:2] <= entry[:2]:
                    lo += 1
                heads.insert(lo, entry)
    return grants


def intra_slice_schedule(
    ues: Sequence[tuple[int, int, float]],
    slice_prbs: int,
    bits_per_prb: int = DEFAULT_BITS_PER_PRB,
) -> dict[int, int]:
    """Deficit-round-robin over backlogged UEs with per-UE throttle caps.

    ues: (ue_id, backlog_bytes, throttle_cap) triples. Each UE's grant is
    bounded by ceil(cap * fair_share) where fair_share divides the slice's
    PRBs over backlogged UEs with a nonzero cap; cap 0 starves the UE.
    Surplus PRBs that no UE may take stay idle for this TTI.
    """
    active = [
        (ue_id, backlog, cap)
        for ue_id, backlog, cap in sorted(ues)
        if backlog > 0 and cap > 0.0
    ]
    if not active or slice_prbs <= 0:
        return {}
    fair_share = slice_prbs / len(active)
    limits: dict[int, int] = {}
    for ue_id, backlog, cap in active:
        limits[ue_id] = min(prbs_for_bytes(backlog, bits_per_prb), math.ceil(cap * fair_share))

    grants = {ue_id: 0 for ue_id, _, _ in active}
    remaining = slice_prbs
    progressed = True
    while remaining > 0 and progressed:
        progressed = False
        for ue_id, _, _ in active:
            if remaining == 0:
                break
            if grants[ue_id] < limits[ue_id]:
                grants[ue_id] += 1
                remaining -= 1
                progressed = True
    return {ue_id: g for ue_id, g in grants.items() if g > 0}


def allocate_tti(
    configs: Sequence[SliceConfig],
    states: Sequence[SliceRuntimeState],
    demands: Mapping[int, int],
    grid_size: int,
    *,
    bits_per_prb: int = DEFAULT_BITS_PER_PRB,
    tti: int = 0,
    edf_queues: Mapping[int, Mapping[int, Sequence[tuple[int, int]]]] | None = None,
    alpha: float = DEFAULT_EMA_ALPHA,
    tti_ms: float = 1.0,
    quantum: int = 1,
) -> PrbAllocation:
    """Split the PRB grid across slices for one TTI.

    demands maps slice_id to queued bytes. Static slices own their PRB sets
    outright; their unused PRBs idle. EDF slices are served next from the
    shared pool in global deadline order (edf_queues supplies the per-UE
    deadline queues, keyed by slice then UE). NVS slices then split what is
    left by repeated highest-priority quantum grants.
    """
    if grid_size < 1:
        raise ConfigurationError(f"grid_size {grid_size} < 1")
    if len(configs) != len(states):
        raise ConfigurationError("configs and states must align")
    by_id: dict[int, tuple[SliceConfig, SliceRuntimeState]] = {}
    for cfg, st in zip(configs, states):
        if cfg.slice_id in by_id:
            raise ConfigurationError(f"duplicate slice_id {cfg.slice_id}")
        by_id[cfg.slice_id] = (cfg, st)
    for sid in demands:
        if sid not in by_id:
            raise ConfigurationError(f"demand for unknown slice_id {sid}")

    alloc = PrbAllocation(tti=tti)
    static_reserved = 0
    for sid in sorted(by_id):
        cfg, _ = by_id[sid]
        if isinstance(cfg.policy, Static):
            static_reserved += len(cfg.policy.prb_set)
            need = prbs_for_bytes(demands.get(sid, 0), bits_per_prb)
            alloc.per_slice[sid] = min(need, len(cfg.policy.prb_set))

    pool = grid_size - static_reserved

    edf_ids = sorted(sid for sid, (cfg, _) in by_id.items() if isinstance(cfg.policy, Edf))
    if edf_ids:
        if edf_queues is None:
            raise ConfigurationError("EDF slices configured but no edf_queues supplied")
        merged: dict[int, Sequence[tuple[int, int]]] = {}
        ue_slice: dict[int, int] = {}
        for sid in edf_ids:
            for ue_id, q in (edf_queues.get(sid) or {}).items():
                merged[ue_id] = q
                ue_slice[ue_id] = sid
        grants = edf_schedule(merged, pool, bits_per_prb)
        for sid in edf_ids:
            alloc.per_slice[sid] = 0
        for ue_id, g in grants.items():
            alloc.per_ue[ue_id] = g
            alloc.per_slice[ue_slice[ue_id]] += g
        pool -= sum(grants.values())

    nvs_ids = sorted(
        sid
        for sid, (cfg, _) in by_id.items()
        if isinstance(cfg.policy, (NvsRate, NvsCapacity))
    )
    if nvs_ids and pool > 0:
        kinds, reserves, refs, emas, max_prbs = [], [], [], [], []
        for sid in nvs_ids:
            cfg, st = by_id[sid]
            pol = cfg.policy
            if isinstance(pol, NvsRate):
                kinds.append(0)
                reserves.append(pol.min_rate_mbps)
                refs.append(pol.ref_rate_mbps)
                emas.append(st.ema_rate_mbps)
            else:
                kinds.append(1)
                reserves.append(pol.share)
                refs.append(1.0)
                emas.append(st.ema_prb_share)
            max_prbs.append(prbs_for_bytes(demands.get(sid, 0), bits_per_prb))
        granted = kernels.nvs_grants(
            kinds,
            reserves,
            refs,
            emas,
            max_prbs,
            pool,
            grid_size,
            alpha,
            bits_per_prb / (1000.0 * tti_ms),
            quantum,
            NVS_EPSILON,
        )
        for sid, g in zip(nvs_ids, granted):
            alloc.per_slice[sid] = g
    else:
        for sid in nvs_ids:
            alloc.per_slice[sid] = 0

    assert alloc.total() <= grid_size
    return alloc


def expand_prb_ranges(ranges: Iterable[Sequence[int]]) -> frozenset[int]:
    """Expand inclusive [lo, hi] index ranges into an explicit PRB set."""
    out: set[int] = set()
    for pair in ranges:
        lo, hi = int(pair[0]), int(pair[1])
        if hi < lo:
            raise ConfigurationError(f"bad PRB range [{lo}, {hi}]")
        out.update(range(lo, hi + 1))
    return frozenset(out)
