"""Scenario loading, validation, and the run loop that wires simulator,
detector, and controller together over encoded control frames.

Configs are JSON documents (see docs/config.md). A run writes three
artifacts into the output directory: metrics.csv (one row per TTI per UE),
summary.csv (per-phase medians/means), and events.log (every control
message with its TTI).
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from sliceguard.controller import SlaPolicy
from sliceguard.detect import AnomalyDetector, PacketFeatures, TreeEnsembleModel
from sliceguard.errors import ConfigurationError, ProtocolError
from sliceguard.protocol import AnomalyReportMsg, ControlMessage, encode_frame, type_tag
from sliceguard.sched import (
    Edf,
    NvsCapacity,
    NvsRate,
    SliceConfig,
    Static,
    expand_prb_ranges,
    validate_slice_configs,
)
from sliceguard.sim import (
    CbrSource,
    LinkModel,
    PoissonSource,
    RanSim,
    ReplaySource,
    UeContext,
)
from sliceguard.transport import InprocControllerLink, SocketControllerLink

BUNDLED_PREFIX = "bundled:"


def bundled_scenario_path(name: str) -> Path:
    return Path(str(resources.files("sliceguard").joinpath("assets", "scenarios", name)))


def _read_trace(ref: str, base_dir: Path) -> list[PacketFeatures]:
    if ref.startswith(BUNDLED_PREFIX):
        text = (
            resources.files("sliceguard")
            .joinpath("assets", ref[len(BUNDLED_PREFIX) :])
            .read_text("utf-8")
        )
        rows = list(csv.DictReader(text.splitlines()))
    else:
        with open(base_dir / ref, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    return [
        PacketFeatures(
            protocol_type=r["protocol_type"],
            service=r["service"],
            flag=r["flag"],
            src_bytes=int(r["src_bytes"]),
            dst_bytes=int(r["dst_bytes"]),
        )
        for r in rows
    ]


def _parse_policy(sid: int, body: dict, problems: list[str]):
    kind = body.get("kind")
    try:
        if kind == "static":
            if "prb_ranges" in body:
                return Static(prb_set=expand_prb_ranges(body["prb_ranges"]))
            return Static(prb_set=frozenset(int(i) for i in body["prbs"]))
        if kind == "nvs_rate":
            return NvsRate(float(body["min_rate_mbps"]), float(body["ref_rate_mbps"]))
        if kind == "nvs_capacity":
            return NvsCapacity(float(body["share"]))
        if kind == "edf":
            return Edf(float(body["deadline_ms"]))
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"slices[{sid}].policy: {exc}")
        return None
    problems.append(f"slices[{sid}].policy.kind: unknown kind {kind!r}")
    return None


@dataclass
class Phase:
    name: str
    start_tti: int


@dataclass
class ScenarioConfig:
    name: str
    seed: int
    horizon_ttis: int
    grid_size: int
    link: LinkModel
    phases: list[Phase]
    slices: list[SliceConfig]
    ue_specs: list[dict]
    detector: dict
    controller: dict
    probes: dict
    load_proxy: dict
    ema_alpha: float
    quantum_prbs: int
    queue_bound_bytes: int
    base_dir: Path
    raw: dict = field(repr=False, default_factory=dict)

    def phase_of(self, tti: int) -> str:
        name = self.phases[0].name
        for ph in self.phases:
            if tti >= ph.start_tti:
                name = ph.name
        return name


def load_config(path: str | Path) -> tuple[ScenarioConfig | None, list[str]]:
    """Parse and validate; returns (config or None, list of violations)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        return None, [f"config is not valid JSON: {exc}"]

    problems: list[str] = []
    base_dir = path.parent

    def req(key, kind, default=None):
        if key not in raw:
            if default is not None:
                return default
            problems.append(f"missing required field {key!r}")
            return None
        value = raw[key]
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            problems.append(f"{key}: expected {kind.__name__}, got {type(value).__name__}")
            return None
        return value

    name = req("name", str, default=path.stem)
    seed = req("seed", int, default=0)
    horizon = req("horizon_ttis", int)
    grid_size = req("grid_size", int, default=106)
    if horizon is not None and horizon < 1:
        problems.append("horizon_ttis: must be >= 1")
    if grid_size is not None and grid_size < 1:
        problems.append("grid_size: must be >= 1")

    link_raw = raw.get("link", {})
    try:
        link = LinkModel(
            bits_per_prb_per_tti=int(link_raw.get("bits_per_prb_per_tti", 1132)),
            tti_ms=float(link_raw.get("tti_ms", 1.0)),
            base_rtt_ms=float(link_raw.get("base_rtt_ms", 10.0)),
        )
    except (ConfigurationError, TypeError, ValueError) as exc:
        problems.append(f"link: {exc}")
        link = LinkModel()

    phases = []
    for i, ph in enumerate(raw.get("phases", [{"name": "baseline", "start_tti": 0}])):
        try:
            phases.append(Phase(name=str(ph["name"]), start_tti=int(ph["start_tti"])))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"phases[{i}]: {exc}")
    if phases:
        if phases[0].start_tti != 0:
            problems.append("phases[0].start_tti: first phase must start at TTI 0")
        for a, b in zip(phases, phases[1:]):
            if b.start_tti <= a.start_tti:
                problems.append(f"phase {b.name!r}: start_tti must increase")

    slices: list[SliceConfig] = []
    for i, s in enumerate(raw.get("slices", [])):
        try:
            sid = int(s["slice_id"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"slices[{i}].slice_id: missing or not an integer")
            continue
        policy = _parse_policy(sid, s.get("policy", {}), problems)
        if policy is not None:
            slices.append(SliceConfig(slice_id=sid, policy=policy))
    if not slices:
        problems.append("slices: at least one slice required")
    if grid_size:
        problems.extend(validate_slice_configs(slices, grid_size))

    slice_ids = {s.slice_id for s in slices}
    ue_specs = []
    seen_ues = set()
    for i, u in enumerate(raw.get("ues", [])):
        try:
            uid, usid = int(u["ue_id"]), int(u["slice_id"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"ues[{i}]: ue_id and slice_id are required integers")
            continue
        if uid in seen_ues:
            problems.append(f"ues[{i}]: duplicate ue_id {uid}")
        seen_ues.add(uid)
        if usid not in slice_ids:
            problems.append(f"ues[{i}] (ue {uid}): references missing slice {usid}")
        for j, src in enumerate(u.get("sources", [])):
            kind = src.get("kind")
            if kind not in ("cbr", "poisson", "replay"):
                problems.append(f"ues[{i}].sources[{j}].kind: unknown kind {kind!r}")
            elif kind in ("cbr", "poisson") and float(src.get("mbps", -1)) < 0:
                problems.append(f"ues[{i}].sources[{j}].mbps: must be >= 0")
            elif kind == "replay":
                if float(src.get("records_per_second", 2000.0)) < 0:
                    problems.append(f"ues[{i}].sources[{j}].records_per_second: must be >= 0")
                try:
                    if not _read_trace(src.get("trace", ""), base_dir):
                        problems.append(f"ues[{i}].sources[{j}].trace: trace is empty")
                except (OSError, KeyError, ValueError) as exc:
                    problems.append(f"ues[{i}].sources[{j}].trace: {exc}")
        ue_specs.append(u)
    if not ue_specs:
        problems.append("ues: at least one UE required")

    detector = dict(raw.get("detector", {"enabled": False}))
    if detector.get("enabled"):
        model_ref = detector.get("model", "bundled")
        if model_ref != "bundled" and not (base_dir / model_ref).exists():
            problems.append(f"detector.model: file {model_ref!r} not found")
    controller = dict(raw.get("controller", {"enabled": False}))
    min_cap = float(controller.get("min_cap", 0.05))
    if controller.get("enabled") and not 0.0 < min_cap < 1.0:
        problems.append(f"controller.min_cap: {min_cap} not in (0, 1)")

    cfg = ScenarioConfig(
        name=name or path.stem,
        seed=seed if seed is not None else 0,
        horizon_ttis=horizon or 1,
        grid_size=grid_size or 106,
        link=link,
        phases=phases or [Phase("baseline", 0)],
        slices=slices,
        ue_specs=ue_specs,
        detector=detector,
        controller=controller,
        probes=dict(raw.get("probes", {})),
        load_proxy=dict(raw.get("load_proxy", {})),
        ema_alpha=float(raw.get("ema_alpha", 0.01)),
        quantum_prbs=int(raw.get("quantum_prbs", 1)),
        queue_bound_bytes=int(raw.get("queue_bound_bytes", 5_000_000)),
        base_dir=base_dir,
        raw=raw,
    )
    return (cfg if not problems else None), problems


def _build_sources(spec: dict, base_dir: Path) -> list:
    out = []
    for src in spec.get("sources", []):
        kind = src["kind"]
        common = {
            "start_tti": int(src.get("start_tti", 0)),
            "end_tti": int(src["end_tti"]) if src.get("end_tti") is not None else None,
        }
        if kind == "cbr":
            feats = src.get("features")
            out.append(
                CbrSource(
                    mbps=float(src["mbps"]),
                    packet_bytes=int(src.get("packet_bytes", 1500)),
                    features=PacketFeatures(**feats) if feats else None,
                    **common,
                )
            )
        elif kind == "poisson":
            out.append(
                PoissonSource(
                    mbps=float(src["mbps"]),
                    mean_pkt_bytes=int(src.get("mean_pkt_bytes", 1500)),
                    **common,
                )
            )
        elif kind == "replay":
            out.append(
                ReplaySource(
                    records=_read_trace(src["trace"], base_dir),
                    records_per_second=float(src.get("records_per_second", 2000.0)),
                    min_payload=int(src.get("min_payload", 64)),
                    **common,
                )
            )
    return out


def build_sim(cfg: ScenarioConfig) -> RanSim:
    ues = [
        UeContext(
            ue_id=int(u["ue_id"]),
            slice_id=int(u["slice_id"]),
            sources=_build_sources(u, cfg.base_dir),
            queue_bound=int(u.get("queue_bound_bytes", cfg.queue_bound_bytes)),
        )
        for u in cfg.ue_specs
    ]
    return RanSim(
        slices=cfg.slices,
        ues=ues,
        link=cfg.link,
        grid_size=cfg.grid_size,
        seed=cfg.seed,
        ema_alpha=cfg.ema_alpha,
        probe_interval=int(cfg.probes.get("interval_ttis", 100)),
        probe_bytes=int(cfg.probes.get("probe_bytes", 32)),
        proxy_window=int(cfg.load_proxy.get("window_ttis", 1000)),
        proxy_capacity=int(cfg.load_proxy.get("capacity_packets", 20_000)),
        proxy_kappa=float(cfg.load_proxy.get("kappa", 10.0)),
        quantum=cfg.quantum_prbs,
    )


def _load_model(cfg: ScenarioConfig) -> TreeEnsembleModel:
    ref = cfg.detector.get("model", "bundled")
    if ref == "bundled":
        return TreeEnsembleModel.load_bundled()
    return TreeEnsembleModel.load(cfg.base_dir / ref)


class ScenarioRunner:
    def __init__(self, cfg: ScenarioConfig, mode: str = "inproc", out_dir: str | Path = "out"):
        if mode not in ("inproc", "sockets"):
            raise ConfigurationError(f"unknown mode {mode!r}")
        self.cfg = cfg
        self.mode = mode
        self.out_dir = Path(out_dir)
        self.sim = build_sim(cfg)
        self.detectors: dict[int, AnomalyDetector] = {}
        self.model = _load_model(cfg) if cfg.detector.get("enabled") else None
        self.link = None
        if cfg.controller.get("enabled"):
            policy = SlaPolicy(
                slice_configs=tuple(cfg.slices),
                ue_slices=tuple((int(u["ue_id"]), int(u["slice_id"])) for u in cfg.ue_specs),
                min_cap=float(cfg.controller.get("min_cap", 0.05)),
                release_after=int(cfg.controller.get("release_after", 1)),
                full_window_packets=int(cfg.controller.get("full_window_packets", 40)),
                sla_enforcement=bool(cfg.controller.get("sla_enforcement", False)),
            )
            cls = InprocControllerLink if mode == "inproc" else SocketControllerLink
            self.link = cls(policy)
        self.indication_interval = int(cfg.controller.get("indication_interval_ttis", 100))

    def _detector_for(self, slice_id: int) -> AnomalyDetector:
        det = self.detectors.get(slice_id)
        if det is None:
            det = self.detectors[slice_id] = AnomalyDetector(
                self.model,
                report_every=int(self.cfg.detector.get("report_every", 10)),
                window_size=int(self.cfg.detector.get("window_size", 40)),
            )
        return det

    def run(self) -> dict:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = self.out_dir / "metrics.csv"
        events_path = self.out_dir / "events.log"
        summary_path = self.out_dir / "summary.csv"
        rows_by_phase: dict[tuple[str, int], dict] = {}

        with open(metrics_path, "w", newline="", encoding="utf-8") as mfh, open(
            events_path, "w", encoding="utf-8"
        ) as efh:
            writer = csv.writer(mfh)
            writer.writerow(
                [
                    "tti",
                    "ue_id",
                    "throughput_mbps",
                    "rtt_ms_or_timeout",
                    "load_proxy_pct",
                    "anomaly_score",
                    "rrc_state",
                    "phase",
                ]
            )

            def log_event(tti: int, direction: str, msg: ControlMessage):
                body = json.dumps(
                    json.loads(encode_frame(msg)[4:].decode("utf-8")), sort_keys=True
                )
                efh.write(f"tti={tti:06d} {direction} {type_tag(msg)} {body}\n")

            try:
                if self.link is not None:
                    plan = self.link.start()
                    for msg in plan:
                        log_event(0, "ctl->ran", msg)
                        self.sim.apply_command(msg)
                    self.sim.note_control_messages(len(plan))
                self._loop(writer, log_event, rows_by_phase)
            except ProtocolError:
                mfh.flush()
                efh.flush()
                raise
            finally:
                if self.link is not None:
                    self.link.close()

        self._write_summary(summary_path, rows_by_phase)
        return {
            "metrics": metrics_path,
            "summary": summary_path,
            "events": events_path,
            "conservation_ok": self.sim.conservation_ok(),
        }

    def _loop(self, writer, log_event, rows_by_phase):
        cfg = self.cfg
        for t in range(cfg.horizon_ttis):
            delta = self.sim.step()
            reports = []
            if self.model is not None:
                for slice_id, ue_id, feats in delta.tapped:
                    report = self._detector_for(slice_id).observe(ue_id, feats, delta.tti)
                    if report is not None:
                        self.sim.ues[ue_id].anomaly_score = report.window_score
                        reports.append(report)
            sent = 0
            commands: list[ControlMessage] = []
            if self.link is not None:
                for report in reports:
                    msg = AnomalyReportMsg(
                        ue_id=report.ue_id,
                        window_score=report.window_score,
                        packets_seen=report.packets_seen,
                        timestamp_tti=report.timestamp_tti,
                    )
                    log_event(delta.tti, "det->ctl", msg)
                    sent += 1
                    for cmd in self.link.send_report(msg):
                        log_event(delta.tti, "ctl->ran", cmd)
                        commands.append(cmd)
                if self.indication_interval > 0 and (t + 1) % self.indication_interval == 0:
                    ind = self.sim.build_indication()
                    log_event(delta.tti, "ran->ctl", ind)
                    sent += 1
                    for cmd in self.link.send_indication(ind):
                        log_event(delta.tti, "ctl->ran", cmd)
                        commands.append(cmd)
                for cmd in commands:
                    self.sim.apply_command(cmd)
                self.sim.note_control_messages(sent + len(commands))

            phase = cfg.phase_of(delta.tti)
            rtt_by_ue: dict[int, float | None] = {}
            for ue_id, value in delta.rtt_samples:
                rtt_by_ue[ue_id] = value
            for ue_id in sorted(self.sim.ues):
                ue = self.sim.ues[ue_id]
                tput = delta.delivered_bytes.get(ue_id, 0) * 8.0 / (cfg.link.tti_ms * 1000.0)
                if ue_id in rtt_by_ue:
                    rtt_field = "timeout" if rtt_by_ue[ue_id] is None else f"{rtt_by_ue[ue_id]:.3f}"
                else:
                    rtt_field = ""
                writer.writerow(
                    [
                        delta.tti,
                        ue_id,
                        f"{tput:.6f}",
                        rtt_field,
                        f"{delta.load_proxy_pct:.4f}",
                        f"{ue.anomaly_score:.6f}",
                        ue.rrc_state.value,
                        phase,
                    ]
                )
                acc = rows_by_phase.setdefault(
                    (phase, ue_id),
                    {"tput": [], "rtt": [], "timeouts": 0, "proxy": [], "score": 0.0},
                )
                acc["tput"].append(tput)
                if ue_id in rtt_by_ue:
                    if rtt_by_ue[ue_id] is None:
                        acc["timeouts"] += 1
                    else:
                        acc["rtt"].append(rtt_by_ue[ue_id])
                acc["proxy"].append(delta.load_proxy_pct)
                acc["score"] = max(acc["score"], ue.anomaly_score)

    def _write_summary(self, path: Path, rows_by_phase):
        phase_order = {ph.name: i for i, ph in enumerate(self.cfg.phases)}
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "phase",
                    "ue_id",
                    "mean_throughput_mbps",
                    "median_throughput_mbps",
                    "median_rtt_ms",
                    "rtt_timeouts",
                    "mean_load_proxy_pct",
                    "max_anomaly_score",
                    "final_rrc_state",
                ]
            )
            for (phase, ue_id) in sorted(
                rows_by_phase, key=lambda k: (phase_order.get(k[0], 99), k[1])
            ):
                acc = rows_by_phase[(phase, ue_id)]
                rtt_median = f"{statistics.median(acc['rtt']):.3f}" if acc["rtt"] else ""
                writer.writerow(
                    [
                        phase,
                        ue_id,
                        f"{statistics.mean(acc['tput']):.6f}",
                        f"{statistics.median(acc['tput']):.6f}",
                        rtt_median,
                        acc["timeouts"],
                        f"{statistics.mean(acc['proxy']):.4f}",
                        f"{acc['score']:.6f}",
                        self.sim.ues[ue_id].rrc_state.value,
                    ]
                )


def run_scenario(
    config_path: str | Path, mode: str = "inproc", out_dir: str | Path = "out", seed: int | None = None
) -> dict:
    cfg, problems = load_config(config_path)
    if problems:
        raise ConfigurationError("; ".join(problems))
    if seed is not None:
        cfg.seed = seed
    runner = ScenarioRunner(cfg, mode=mode, out_dir=out_dir)
    return runner.run()
