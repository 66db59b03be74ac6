"""End-to-end scenario orchestration and result emission.

A run executes the mission timeline on one event queue: launch, formation
(30 s), transit at cruise speed, deployment (30 s), then data-collection
sessions separated by repositioning hops, and the return leg. Periodic
traffic rides role-resolved boundary ticks so that leadership changes take
effect mid-stream: every 10 s each live worker beacons its status to the
acting leader, who aggregates and flushes to the ground station every 30 s;
in flight the leader broadcasts a waypoint update every 0.2 s and every
worker acknowledges it. Escalated cases file a 500-byte report and, when
enabled, a bidirectional video call relayed through the leader.

A watchdog run by the backup probes the leader's last activity and triggers
a hard handover after the detection timeout; predicted failures trigger a
soft handover directly. Results serialize to a fixed-column CSV and a plain
text report; identical (config, seed) pairs produce byte-identical files.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from . import energy as energy_mod
from . import failure as failure_mod
from .config import ConfigError, ScenarioConfig, parse_config, to_dict
from .netsim import (
    BEST_EFFORT,
    CONTROL,
    VIDEO,
    EventQueue,
    Metrics,
    MetricsRecord,
    Packet,
    build_wlan_link,
    build_wimax_link,
    max_simultaneous_calls,
    metrics_snapshot,
)
from .protocol import (
    ACK_LEN,
    CASE_REPORT_LEN,
    HEADER_LEN,
    LD_STATUS_PERIOD_US,
    MOVE_TO_WAYPOINT_LEN,
    MOVE_TO_WAYPOINT_PERIOD_US,
    SD_STATUS_PERIOD_US,
    STATUS_SD_LEN,
    MessageKind,
    VideoCallSpec,
    fragment_payload,
    status_report_ld_length,
)
from .swarm import (
    MissionPlan,
    Phase,
    PhaseEvent,
    Role,
    classify_case,
    escalates,
    formation_positions,
    advance_kinematics,
    init_swarm,
    transition_phase,
)

WATCHDOG_MARGIN_US = 2_000
CALL_STAGGER_US = 10_000
BEACON_STAGGER_US = 1_000
ACK_STAGGER_US = 200
DMC = 0


@dataclass
class RunResult:
    config: dict
    seed: int
    metrics: MetricsRecord
    energy: dict[int, dict[str, float]]
    phase_trace: list[str]
    deviations: list[str]
    aborted: bool
    collected_targets: list[int]
    pending_targets: list[int]
    recovery_times_s: list[float]
    sd_reports_delivered: int
    sd_reports_lost: int
    case_counts: dict[str, int]
    calls_started: int


def _target_grid(m: int, center: tuple[float, float], pitch: float = 24.0):
    cols = math.isqrt(m)
    if cols * cols < m:
        cols += 1
    cx, cy = center
    out = []
    for k in range(m):
        r, c = divmod(k, cols)
        out.append((cx + (c - (cols - 1) / 2.0) * pitch,
                    cy + (r - (m // cols) / 2.0) * pitch))
    return tuple(out)


class _Mission:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.q = EventQueue()
        self.metrics = Metrics(measure_from_us=int(cfg.measure_from_s * 1e6))
        self.wlan = build_wlan_link(self.q, cfg.wlan, self.metrics, "wlan")
        self.wimax_ul = build_wimax_link(self.q, cfg.wimax, self.metrics, "wimax_ul")
        self.wimax_dl = build_wimax_link(self.q, cfg.wimax, self.metrics, "wimax_dl")
        self.rng = random.Random(cfg.seed)
        self.horizon = int(cfg.duration_s * 1e6)

        m = cfg.mission
        dmc = (0.0, m.span_m / 2.0)
        center = (min(m.transit_distance_m, m.span_m), m.span_m / 2.0)
        n_targets = cfg.n_sds if m.n_targets is None else m.n_targets
        plan = MissionPlan(
            dmc_position=dmc,
            target_positions=_target_grid(max(n_targets, 1), center),
            formation=m.formation,
            spacing_m=m.spacing_m,
            speed_kmh=m.speed_kmh,
            session_duration_s=m.session_duration_s,
            n_sessions=m.n_sessions,
            reposition_time_s=m.reposition_s,
            span_m=m.span_m,
        )
        self.state = init_swarm(plan, cfg.n_sds, cfg.resolved_backup_id())
        self.n_targets = n_targets
        self.mission_phase = Phase.CONFIGURED
        self.trace: list[Phase] = [Phase.CONFIGURED]
        self.mission_over = False

        self.reports_delivered = 0
        self.reports_lost_no_leader = 0
        self.case_counts: dict[str, int] = {}
        self.calls_started = 0
        self.active_calls = 0
        self.leader_killed_at: int | None = None
        self.handover_pending = False
        self.warned_no_sds = False
        self.airborne_us: dict[int, int] = {d: 0 for d in self.state.drones}
        self.alive_us: dict[int, int] = {d: 0 for d in self.state.drones}
        self.video_us: dict[int, int] = {d: 0 for d in self.state.drones}

        # battery drain per airborne second, from the derated budget per role
        manifest = energy_mod.DEFAULT_MANIFEST
        spec = energy_mod.DEFAULT_SPEC
        self.drain_pct_per_s = {}
        for role in ("ld", "sd"):
            pct = energy_mod.payload_ratio(manifest.total_for(role), spec.base_weight_g)
            budget_s = energy_mod.derate_flight_time(spec.base_flight_min, pct) * 60.0
            self.drain_pct_per_s[role] = 100.0 / budget_s

        if cfg.video.enabled and cfg.video.max_calls is None:
            call = VideoCallSpec(cfg.video.bandwidth_mbps * 1e6,
                                 cfg.video.frame_rate, cfg.video.call_duration_s)
            self.max_calls = max_simultaneous_calls(cfg.wlan, cfg.wimax, call)
        else:
            self.max_calls = cfg.video.max_calls or 0

        self._build_timeline()

    # -- timeline ---------------------------------------------------------

    def _build_timeline(self) -> None:
        cfg = self.cfg
        m = cfg.mission
        speed = self.state.plan.speed_ms
        transit_us = int(round(m.transit_distance_m / speed * 1e6))
        form_end = int(m.formation_time_s * 1e6)
        area_at = form_end + transit_us
        collect_start = area_at + int(m.deploy_time_s * 1e6)
        session_us = int(m.session_duration_s * 1e6)
        reposition_us = int(m.reposition_s * 1e6)

        self.flight_windows: list[tuple[int, int]] = [(0, collect_start)]
        self.collection_windows: list[tuple[int, int]] = []
        sessions = []
        t = collect_start
        for i in range(m.n_sessions):
            start, end = t, t + session_us
            sessions.append((start, end))
            self.collection_windows.append((start, end))
            if i < m.n_sessions - 1:
                self.flight_windows.append((end, end + reposition_us))
                t = end + reposition_us
            else:
                t = end
        mission_end = t
        land_at = mission_end + transit_us
        self.flight_windows.append((mission_end, land_at))

        H = self.horizon
        ev = self._at

        ev(0, lambda: self._mission_transition(PhaseEvent.LAUNCH_COMMAND))
        ev(form_end, lambda: self._mission_transition(PhaseEvent.FORMATION_FORMED))
        ev(form_end, lambda: self._mission_transition(PhaseEvent.TRANSIT_STARTED))
        ev(area_at, lambda: self._mission_transition(PhaseEvent.AREA_REACHED))
        ev(collect_start, lambda: self._mission_transition(PhaseEvent.DEPLOYMENT_COMPLETE))

        for i, (start, end) in enumerate(sessions):
            ev(start, lambda i=i: self._start_session(i))
            classify_at = start + 60_000_000
            if classify_at < end:
                ev(classify_at, lambda i=i, t0=classify_at: self._classify_session(i, t0))
            last = i == m.n_sessions - 1
            if last:
                ev(end, self._finish_session)
                ev(end, lambda: self._mission_transition(
                    PhaseEvent.DATA_SUFFICIENT_CONFIRMATION))
            else:
                ev(end, self._finish_session)
                ev(end, lambda: self._mission_transition(PhaseEvent.SESSION_COMPLETE))
                ev(end + reposition_us, lambda: self._mission_transition(
                    PhaseEvent.REPOSITION_COMPLETE))
        ev(land_at, lambda: self._mission_transition(PhaseEvent.LANDED_AT_BASE))

        # periodic traffic, telemetry, and watchdog ticks; per-drone send
        # slots are staggered so synchronized reports do not collide in the
        # transmit queue (deterministic stand-in for channel-access backoff)
        drone_ids = sorted(self.state.drones)
        for t in range(SD_STATUS_PERIOD_US, H + 1, SD_STATUS_PERIOD_US):
            self.q.schedule(t, lambda t=t: self._status_tick(t))
            for d in drone_ids:
                slot = t + d * BEACON_STAGGER_US
                if slot <= H:
                    self.q.schedule(slot, lambda t=slot, d=d: self._send_beacon(t, d))
        for t in range(LD_STATUS_PERIOD_US, H + 1, LD_STATUS_PERIOD_US):
            self.q.schedule(t, lambda t=t: self._flush_tick(t))
        for a, b in self.flight_windows:
            for t in range(a + MOVE_TO_WAYPOINT_PERIOD_US, min(b, H) + 1,
                           MOVE_TO_WAYPOINT_PERIOD_US):
                self.q.schedule(t, lambda t=t: self._broadcast_tick(t))
                probe = t + WATCHDOG_MARGIN_US
                if probe <= H:
                    self.q.schedule(probe, lambda t=probe: self._watchdog(t, "flight"))
        for a, b in self.collection_windows:
            for t in range(a + LD_STATUS_PERIOD_US, min(b, H) + 1, LD_STATUS_PERIOD_US):
                probe = t + WATCHDOG_MARGIN_US
                if probe <= H:
                    self.q.schedule(probe, lambda t=probe: self._watchdog(t, "collection"))

        for f in self.cfg.failures:
            if f.at_us <= H:
                self.q.schedule(f.at_us, lambda f=f: self._apply_failure(f))

    def _at(self, t: int, fn) -> None:
        if t <= self.horizon:
            self.q.schedule(t, fn)

    # -- mission phases ---------------------------------------------------

    def _mission_transition(self, event: PhaseEvent) -> None:
        if self.state.aborted or self.mission_over:
            return
        self.mission_phase = transition_phase(self.mission_phase, event)
        self.trace.append(self.mission_phase)
        if self.mission_phase is Phase.LANDED:
            self.mission_over = True
        self._sync_drone_phases()
        self._update_waypoints()

    def _sync_drone_phases(self) -> None:
        for d in self.state.drones.values():
            if not d.alive or d.phase in (Phase.FAILED, Phase.ISOLATED, Phase.LANDED):
                continue
            if d.phase is Phase.RETURNING and self.mission_phase not in (
                    Phase.RETURNING, Phase.LANDED):
                continue  # individual maintenance return in progress
            d.phase = self.mission_phase

    def _update_waypoints(self) -> None:
        state = self.state
        plan = state.plan
        center = plan.target_positions[0] if plan.target_positions else plan.dmc_position
        leader = state.leader()
        if self.mission_phase in (Phase.IN_FORMATION, Phase.TRANSIT, Phase.DEPLOYING):
            leader.waypoint = center
            sds = state.alive_sds()
            slots = formation_positions(plan.formation, max(len(sds), 1),
                                        plan.spacing_m, center)
            for d, slot in zip(sds, slots):
                d.waypoint = slot
        elif self.mission_phase in (Phase.COLLECTING, Phase.REPORTING):
            for sd_id, target in state.assignments.items():
                if target < len(plan.target_positions):
                    state.drones[sd_id].waypoint = plan.target_positions[target]
        elif self.mission_phase in (Phase.RETURNING, Phase.LANDED):
            for d in state.drones.values():
                d.waypoint = plan.dmc_position
                if self.mission_phase is Phase.LANDED and d.alive:
                    d.position = plan.dmc_position

    # -- sessions ---------------------------------------------------------

    def _start_session(self, index: int) -> None:
        state = self.state
        if state.aborted:
            return
        targets = list(range(self.n_targets)) + state.pending_targets
        state.pending_targets = []
        available = [d for d in state.alive_sds() if d.phase is not Phase.RETURNING]
        if len(targets) > len(available):
            overflow = targets[len(available):]
            targets = targets[:len(available)]
            state.pending_targets.extend(overflow)
            state.deviations.append(
                f"session {index}: {len(overflow)} targets deferred; "
                f"only {len(available)} SDs available"
            )
        for d in available:
            d.assigned_target = None
        state.assignments = {}
        for d, target in zip(available, targets):
            d.assigned_target = target
            state.assignments[d.id] = target
        self._update_waypoints()

    def _classify_session(self, index: int, now: int) -> None:
        state = self.state
        if state.aborted:
            return
        cfg = self.cfg
        callers: list[int] = []
        for sd_id in sorted(state.assignments):
            drone = state.drones[sd_id]
            if not drone.alive:
                continue
            draw = self.rng.random()
            case = classify_case(draw, cfg.infection_rate)
            self.case_counts[case.value] = self.case_counts.get(case.value, 0) + 1
            if escalates(case):
                self._send_case_report(sd_id, now)
                callers.append(sd_id)
        if cfg.video.enabled:
            forced = [d.id for d in state.alive_sds()][:cfg.video.forced_calls]
            for sd_id in forced:
                if sd_id not in callers:
                    callers.append(sd_id)
            for k, sd_id in enumerate(callers):
                if self.active_calls >= self.max_calls:
                    state.deviations.append(
                        f"session {index}: call from SD {sd_id} rejected; "
                        f"{self.max_calls} calls already active"
                    )
                    continue
                self.active_calls += 1
                self.calls_started += 1
                self._start_call(sd_id, now + (k + 1) * CALL_STAGGER_US)

    def _finish_session(self) -> None:
        state = self.state
        if state.aborted:
            return
        for sd_id, target in sorted(state.assignments.items()):
            d = state.drones[sd_id]
            if d.alive and d.phase not in (Phase.RETURNING, Phase.FAILED, Phase.ISOLATED):
                state.collected.append(target)
        state.assignments = {}
        for d in state.drones.values():
            d.assigned_target = None

    # -- traffic ----------------------------------------------------------

    def _leader_alive(self) -> bool:
        return self.state.leader().alive and not self.state.aborted

    def _mark_leader_activity(self) -> None:
        self.state.leader().telemetry.last_heard = self.q.now

    def _beacon_allowed(self, d) -> bool:
        return (d.alive and d.role is Role.SLAVE
                and d.phase not in (Phase.ISOLATED, Phase.FAILED, Phase.LANDED))

    def _status_tick(self, now: int) -> None:
        if self.state.aborted or self.mission_over:
            return
        self._update_telemetry(now)
        self._check_leader_prediction(now)
        advance_kinematics(self.state, SD_STATUS_PERIOD_US, self.rng,
                           self.cfg.mission.position_noise_m)

    def _send_beacon(self, now: int, drone_id: int) -> None:
        if self.state.aborted or self.mission_over:
            return
        d = self.state.drones[drone_id]
        if not self._beacon_allowed(d):
            return
        self.state.seq.next_for(d.id, MessageKind.STATUS_REPORT_SD)
        pkt = Packet(now, HEADER_LEN + STATUS_SD_LEN, CONTROL, "sd_status",
                     src=d.id, dst=self.state.leader_id)
        self.wlan.send(pkt, self._on_status_delivered)

    def _on_status_delivered(self, pkt: Packet) -> None:
        state = self.state
        leader = state.leader()
        if not leader.alive:
            state.lost_reports += 1
            self.reports_lost_no_leader += 1
            return
        state.aggregation_buffer.append((pkt.src, pkt.created_at))
        if self.cfg.profile == 2:
            self._mark_leader_activity()
            ack = Packet(self.q.now, HEADER_LEN + ACK_LEN, CONTROL, "status_ack",
                         src=state.leader_id, dst=pkt.src)
            self.wlan.send(ack)

    def _flush_tick(self, now: int) -> None:
        state = self.state
        if state.aborted or self.mission_over or not self._leader_alive():
            return
        n = len(state.alive_sds())
        if n == 0:
            if not self.warned_no_sds:
                state.deviations.append(f"t={now}us leader has no SDs to aggregate")
                self.warned_no_sds = True
            return
        batch = list(state.aggregation_buffer)
        state.aggregation_buffer.clear()
        self._mark_leader_activity()
        state.seq.next_for(state.leader_id, MessageKind.STATUS_REPORT_LD)
        pkt = Packet(now, HEADER_LEN + status_report_ld_length(n), CONTROL,
                     "ld_status", src=state.leader_id, dst=DMC)
        self.wimax_ul.send(pkt, lambda p, batch=batch: self._on_flush_delivered(p, batch))

    def _on_flush_delivered(self, pkt: Packet, batch: list) -> None:
        self.reports_delivered += len(batch)
        if self.cfg.profile == 2:
            ack = Packet(self.q.now, HEADER_LEN + ACK_LEN, CONTROL, "status_ack",
                         src=DMC, dst=pkt.src)
            self.wimax_dl.send(ack)

    def _broadcast_tick(self, now: int) -> None:
        if self.state.aborted or self.mission_over or not self._leader_alive():
            return
        state = self.state
        self._mark_leader_activity()
        state.seq.next_for(state.leader_id, MessageKind.MOVE_TO_WAYPOINT)
        pkt = Packet(now, HEADER_LEN + MOVE_TO_WAYPOINT_LEN, CONTROL,
                     "move_to_waypoint", src=state.leader_id, dst=255)
        self.wlan.send(pkt, self._on_waypoint_delivered)

    def _on_waypoint_delivered(self, pkt: Packet) -> None:
        for d in self.state.alive_sds():
            if not self._beacon_allowed(d):
                continue
            self.q.schedule(self.q.now + d.id * ACK_STAGGER_US,
                            lambda d=d: self._send_flight_ack(d.id))

    def _send_flight_ack(self, drone_id: int) -> None:
        d = self.state.drones[drone_id]
        if not self._beacon_allowed(d):
            return
        ack = Packet(self.q.now, HEADER_LEN + ACK_LEN, CONTROL, "flight_ack",
                     src=d.id, dst=self.state.leader_id)
        self.wlan.send(ack)

    def _send_case_report(self, sd_id: int, now: int) -> None:
        pkt = Packet(now, HEADER_LEN + CASE_REPORT_LEN, BEST_EFFORT, "case_report",
                     src=sd_id, dst=DMC)
        self.wlan.send(pkt, self._relay_case_report)

    def _relay_case_report(self, pkt: Packet) -> None:
        if not self._leader_alive():
            return
        self._mark_leader_activity()
        relay = Packet(pkt.created_at, pkt.size_bytes, BEST_EFFORT, "case_report",
                       src=pkt.src, dst=DMC)
        self.wimax_ul.send(relay, self._ack_case_report)

    def _ack_case_report(self, pkt: Packet) -> None:
        ack = Packet(self.q.now, HEADER_LEN + ACK_LEN, CONTROL, "case_ack",
                     src=DMC, dst=pkt.src)
        self.wimax_dl.send(ack, self._relay_case_ack)

    def _relay_case_ack(self, pkt: Packet) -> None:
        if not self._leader_alive():
            return
        self._mark_leader_activity()
        relay = Packet(pkt.created_at, pkt.size_bytes, CONTROL, "case_ack",
                       src=self.state.leader_id, dst=pkt.dst)
        self.wlan.send(relay)

    # -- video ------------------------------------------------------------

    def _start_call(self, sd_id: int, start: int) -> None:
        cfg = self.cfg
        spec = VideoCallSpec(cfg.video.bandwidth_mbps * 1e6, cfg.video.frame_rate,
                             cfg.video.call_duration_s)
        dur_us = int(cfg.video.call_duration_s * 1e6)
        end = start + dur_us
        frame_gap = 1_000_000 // spec.frame_rate
        f = 0
        t = start
        while t < end and t <= self.horizon:
            self.q.schedule(t, lambda t=t, s=sd_id, sp=spec: self._video_frame(t, s, sp))
            f += 1
            t = start + f * frame_gap
        self._at(min(end, self.horizon), lambda: self._end_call(sd_id, start, min(end, self.horizon)))

    def _end_call(self, sd_id: int, start: int, end: int) -> None:
        self.active_calls = max(0, self.active_calls - 1)
        if sd_id in self.video_us:
            self.video_us[sd_id] += end - start

    def _video_frame(self, now: int, sd_id: int, spec: VideoCallSpec) -> None:
        state = self.state
        sd = state.drones.get(sd_id)
        if state.aborted or sd is None or not sd.alive:
            return
        for frag in fragment_payload(spec.frame_len, self.cfg.wlan.mtu):
            up = Packet(now, HEADER_LEN + frag, VIDEO, "video_up", src=sd_id, dst=DMC)
            self.wlan.send(up, self._relay_video_up)
        for frag in fragment_payload(spec.frame_len, self.cfg.wimax.mtu):
            down = Packet(now, HEADER_LEN + frag, VIDEO, "video_down", src=DMC, dst=sd_id)
            self.wimax_dl.send(down, self._relay_video_down)

    def _relay_video_up(self, pkt: Packet) -> None:
        if not self._leader_alive():
            return
        relay = Packet(pkt.created_at, pkt.size_bytes, VIDEO, "video_up",
                       src=pkt.src, dst=DMC)
        self.wimax_ul.send(relay)

    def _relay_video_down(self, pkt: Packet) -> None:
        if not self._leader_alive():
            return
        relay = Packet(pkt.created_at, pkt.size_bytes, VIDEO, "video_down",
                       src=self.state.leader_id, dst=pkt.dst)
        self.wlan.send(relay)

    # -- telemetry, prediction, failures ----------------------------------

    def _update_telemetry(self, now: int) -> None:
        for d in self.state.drones.values():
            if not d.alive:
                continue
            self.alive_us[d.id] += SD_STATUS_PERIOD_US
            if d.airborne:
                self.airborne_us[d.id] += SD_STATUS_PERIOD_US
                role = "ld" if d.role is Role.LEADER else "sd"
                drain = self.drain_pct_per_s[role] * (SD_STATUS_PERIOD_US / 1e6)
                d.telemetry.battery_pct = max(0.0, d.telemetry.battery_pct - drain)
            if d.phase is Phase.RETURNING and d.waypoint is not None:
                if d.position == d.waypoint:
                    d.phase = transition_phase(d.phase, PhaseEvent.LANDED_AT_BASE)

    def _check_leader_prediction(self, now: int) -> None:
        state = self.state
        leader = state.leader()
        if not leader.alive or state.aborted:
            return
        if failure_mod.predict_failure(leader.telemetry):
            if state.alive_sds():
                failure_mod.soft_handover(state, now)
                state.leader().telemetry.last_heard = now
                self._update_waypoints()

    def _watchdog(self, now: int, mode: str) -> None:
        state = self.state
        if state.aborted or self.mission_over or self.handover_pending:
            return
        detection = failure_mod.detect_ld_loss(state, now, mode)
        if detection is None:
            return
        self.handover_pending = True
        promote_at = now + failure_mod.PROMOTION_PROCESSING_US
        self.q.schedule(promote_at, lambda: self._complete_hard_handover(detection))

    def _complete_hard_handover(self, detection) -> None:
        state = self.state
        self.handover_pending = False
        if state.aborted or state.leader_id != detection.leader_id:
            return
        old = state.drones[detection.leader_id]
        failure_mod.hard_handover(state, detection, self.q.now,
                                  failed_at_us=self.leader_killed_at)
        if state.aborted:
            return
        state.leader().telemetry.last_heard = self.q.now
        if not old.alive:
            failure_mod.isolate_drone(state, old.id)
        self._update_waypoints()

    def _apply_failure(self, f) -> None:
        state = self.state
        if state.aborted or self.mission_over:
            return
        now = self.q.now
        if f.kind == failure_mod.FailureKind.LD_SUDDEN:
            target = state.drones.get(f.drone_id) if f.drone_id else state.leader()
            if target is None or not target.alive:
                return
            target.alive = False
            target.phase = transition_phase(target.phase, PhaseEvent.FAILURE_DETECTED)
            if target.id == state.leader_id:
                self.leader_killed_at = now
                if not state.alive_sds():
                    state.aborted = True
                    state.deviations.append(
                        f"t={now}us leader lost with no SD left; mission aborted")
        elif f.kind == failure_mod.FailureKind.LD_PREDICTED:
            leader = state.leader()
            if not leader.alive:
                return
            # overheating trips the prediction without driving the old
            # leader home, so it stays in the swarm as a power-saving SD;
            # the handover itself runs at the next status cycle, where the
            # leader evaluates its own telemetry
            leader.telemetry.temperature_c = (
                failure_mod.DEFAULT_THRESHOLDS.temperature_ceiling_c + 15.0)
        elif f.kind == failure_mod.FailureKind.SD_SUDDEN:
            sd = state.drones.get(f.drone_id)
            if sd is None or not sd.alive or sd.id == state.leader_id:
                return
            sd.alive = False
            sd.phase = transition_phase(sd.phase, PhaseEvent.FAILURE_DETECTED)
            failure_mod.isolate_drone(state, sd.id)
            failure_mod.reallocate_tasks(state, sd.id)

    # -- run --------------------------------------------------------------

    def run(self) -> RunResult:
        self.q.run_until(self.horizon)
        self.q.run_all()
        state = self.state
        record = metrics_snapshot(self.metrics, self.q.now,
                                  tuple(state.recovery_times_us))
        ledger = self._energy_ledger()
        return RunResult(
            config=to_dict(self.cfg),
            seed=self.cfg.seed,
            metrics=record,
            energy=ledger,
            phase_trace=[p.value for p in self.trace],
            deviations=list(state.deviations),
            aborted=state.aborted,
            collected_targets=sorted(state.collected),
            pending_targets=sorted(state.pending_targets),
            recovery_times_s=[t / 1e6 for t in state.recovery_times_us],
            sd_reports_delivered=self.reports_delivered,
            sd_reports_lost=state.lost_reports,
            case_counts=dict(sorted(self.case_counts.items())),
            calls_started=self.calls_started,
        )

    def _energy_ledger(self) -> dict[int, dict[str, float]]:
        manifest = energy_mod.DEFAULT_MANIFEST
        spec = energy_mod.DEFAULT_SPEC
        power = energy_mod.ComputeRadioPower(
            video_multiplier=self.cfg.energy.video_multiplier)
        ledger = {}
        for d in self.state.drones.values():
            role = "ld" if d.role is Role.LEADER else "sd"
            pct = energy_mod.payload_ratio(manifest.total_for(role), spec.base_weight_g)
            rotor = energy_mod.rotor_energy(self.airborne_us[d.id] / 6e7, spec, pct)
            compute = energy_mod.network_compute_energy(
                self.alive_us[d.id] / 1e6, role, power)
            extra = energy_mod.network_compute_energy(
                self.video_us[d.id] / 1e6, role, power, "video"
            ) - energy_mod.network_compute_energy(self.video_us[d.id] / 1e6, role, power)
            compute += extra
            ledger[d.id] = {
                "role": role,
                "rotor_wh": rotor,
                "compute_wh": compute,
                "total_wh": rotor + compute,
            }
        return ledger


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Execute one scenario deterministically."""
    return _Mission(cfg).run()


SWEEPABLE_AXES = (
    "n_sds", "duration_s", "infection_rate", "seed",
    "wlan.data_rate_mbps", "wlan.proc_rate_pps",
    "video.bandwidth_mbps", "video.forced_calls",
    "mission.n_sessions",
)


def sweep(base: ScenarioConfig, axis: str, values) -> list[RunResult]:
    """One run per value, seeds derived as base seed + index over the sorted
    values; results come back in value order."""
    if axis not in SWEEPABLE_AXES:
        raise ConfigError(f"axis {axis!r} is not sweepable; pick one of {SWEEPABLE_AXES}")
    results = []
    for i, value in enumerate(sorted(values)):
        d = to_dict(base)
        node = d
        *parents, leaf = axis.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = value
        if axis != "seed":
            d["seed"] = base.seed + i
        d["name"] = f"{base.name}-{axis.replace('.', '_')}-{value}"
        results.append(run_scenario(parse_config(d, name=d["name"])))
    return results


# -- emission --------------------------------------------------------------

CSV_HEADER = "run_id,seed,link,metric,class,value,unit"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_rows(result: RunResult) -> list[str]:
    rid = f"{result.config['name']}#{result.seed}"
    rows = []

    def row(link, metric, cls, value, unit):
        rows.append(f"{rid},{result.seed},{link},{metric},{cls},{_fmt(value)},{unit}")

    m = result.metrics
    for link, c in m.links.items():
        for key in ("offered_pkts", "delivered_pkts", "dropped_pkts"):
            row(link, key, "all", c[key], "packets")
        for key in ("offered_bits", "delivered_bits", "dropped_bits"):
            row(link, key, "all", c[key], "bits")
        row(link, "loss_ratio", "all", m.loss_ratio(link), "ratio")
        row(link, "throughput_bps", "all", m.throughput_bps(link), "bps")
    for (link, cls), stats in m.latency.items():
        row(link, "latency_p50", cls, stats.p50_us, "us")
        row(link, "latency_p95", cls, stats.p95_us, "us")
        row(link, "latency_p99", cls, stats.p99_us, "us")
        row(link, "latency_mean", cls, stats.mean_us, "us")
        row(link, "latency_samples", cls, stats.count, "samples")
    for i, r in enumerate(result.recovery_times_s):
        row("swarm", "recovery_time", f"sample{i}", r, "s")
    row("swarm", "sd_reports_delivered", "all", result.sd_reports_delivered, "reports")
    row("swarm", "sd_reports_lost", "all", result.sd_reports_lost, "reports")
    row("swarm", "collected_targets", "all", len(result.collected_targets), "targets")
    row("swarm", "calls_started", "all", result.calls_started, "calls")
    row("swarm", "aborted", "all", result.aborted, "flag")
    for drone_id, entry in sorted(result.energy.items()):
        for key in ("rotor_wh", "compute_wh", "total_wh"):
            row("energy", key, f"drone{drone_id}", entry[key], "wh")
    return rows


def emit_csv(results: list[RunResult], path: str | Path) -> Path:
    """Fixed-column metrics CSV; byte-identical across reruns."""
    if not results:
        raise ValueError("emit_csv needs at least one result")
    path = Path(path)
    lines = [CSV_HEADER]
    for result in results:
        lines.extend(_csv_rows(result))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def emit_report(results: list[RunResult], path: str | Path) -> Path:
    """Plain-text summary: per-run link metrics, failures, and the battery
    durability table."""
    if not results:
        raise ValueError("emit_report needs at least one result")
    path = Path(path)
    blocks = []
    for r in results:
        m = r.metrics
        lines = [
            f"run {r.config['name']} (seed {r.seed})"
            + (" [ABORTED]" if r.aborted else ""),
            f"  window: {m.window_us / 1e6:.1f} s",
        ]
        for link, c in m.links.items():
            lines.append(
                f"  {link}: offered {c['offered_pkts']} pkts, "
                f"loss {m.loss_ratio(link) * 100:.2f}%, "
                f"throughput {m.throughput_bps(link) / 1e3:.1f} kbps"
            )
        for (link, cls), stats in m.latency.items():
            lines.append(
                f"  {link}/{cls}: p50 {stats.p50_us} us, p95 {stats.p95_us} us, "
                f"mean {stats.mean_us:.0f} us over {stats.count} pkts"
            )
        if r.recovery_times_s:
            times = ", ".join(f"{t:.3f}" for t in r.recovery_times_s)
            lines.append(f"  recovery times: {times} s")
        lines.append(
            f"  reports delivered {r.sd_reports_delivered}, lost {r.sd_reports_lost}; "
            f"targets collected {len(r.collected_targets)}; calls {r.calls_started}"
        )
        for d in r.deviations:
            lines.append(f"  deviation: {d}")
        blocks.append("\n".join(lines))
    blocks.append("battery durability (defaults)\n"
                  + energy_mod.format_durability(energy_mod.durability_report()))
    path.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    return path


def emit_config_echo(result: RunResult, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result.config, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
