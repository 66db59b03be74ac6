"""Failure handling: prediction, leadership handover, task reallocation,
isolation, and return-to-base.

Two handover flavors exist. A soft handover runs while the leader is still
healthy enough to cooperate: the backup inherits the sequence counters and
the aggregation buffer, so nothing is lost. A hard handover follows an
unplanned leader loss detected by watchdog timeout: the in-flight aggregate
dies with the old leader and is charged to the loss metrics, and the
detection-to-promotion gap is recorded as the recovery time.
"""
from __future__ import annotations

from dataclasses import dataclass

from .protocol import SD_STATUS_PERIOD_US, MessageKind
from .swarm import (
    Drone,
    Phase,
    PhaseEvent,
    Role,
    SwarmState,
    SwarmError,
    transition_phase,
)

# Watchdog timeouts: three missed 0.2 s waypoint broadcasts in flight,
# two missed 30 s leader status periods while collecting.
FLIGHT_DETECTION_TIMEOUT_US = 600_000
COLLECTION_DETECTION_TIMEOUT_US = 60_000_000
# Simulated processing between detection and the backup assuming command.
PROMOTION_PROCESSING_US = 1_000


class FailureError(SwarmError):
    """Invalid failure-handling operation."""


class StaleTelemetryError(FailureError):
    """Prediction refused: telemetry older than one reporting period."""


@dataclass(frozen=True)
class PredictionThresholds:
    battery_floor_pct: float = 15.0
    temperature_ceiling_c: float = 60.0
    horizon_s: float = 60.0

    def __post_init__(self):
        if not 0.0 < self.battery_floor_pct < 100.0:
            raise FailureError("battery floor must lie strictly inside 0-100%")


DEFAULT_THRESHOLDS = PredictionThresholds()


class FailureKind:
    LD_SUDDEN = "ld_sudden"
    LD_PREDICTED = "ld_predicted"
    SD_SUDDEN = "sd_sudden"
    ALL = (LD_SUDDEN, LD_PREDICTED, SD_SUDDEN)


@dataclass(frozen=True)
class FailureEvent:
    kind: str
    drone_id: int | None  # None: whichever drone leads at fire time
    at_us: int

    def __post_init__(self):
        if self.kind not in FailureKind.ALL:
            raise FailureError(f"unknown failure kind {self.kind!r}")
        if self.at_us < 0:
            raise FailureError("failure time must be non-negative")


@dataclass(frozen=True)
class DetectionRecord:
    leader_id: int
    detected_at_us: int
    last_heard_us: int
    mode: str  # 'flight' or 'collection'


def predict_failure(
    telemetry,
    thresholds: PredictionThresholds = DEFAULT_THRESHOLDS,
    now_us: int | None = None,
    reporting_period_us: int = SD_STATUS_PERIOD_US,
) -> bool:
    """True iff battery or temperature crossed its threshold.

    Refuses stale input: the reading must be at most one reporting period
    old at ``now_us`` (defaults to the reading's own timestamp).
    """
    now = telemetry.last_heard if now_us is None else now_us
    if now - telemetry.last_heard > reporting_period_us:
        raise StaleTelemetryError(
            f"telemetry is {(now - telemetry.last_heard) / 1e6:.1f} s old, "
            f"limit {reporting_period_us / 1e6:.1f} s"
        )
    return (
        telemetry.battery_pct < thresholds.battery_floor_pct
        or telemetry.temperature_c > thresholds.temperature_ceiling_c
    )


def _promotion_candidate(state: SwarmState) -> tuple[Drone | None, bool]:
    """The designated backup if usable, else the lowest-id alive SD.

    Returns (candidate, fell_back).
    """
    if state.backup_id is not None:
        backup = state.drones.get(state.backup_id)
        if backup is not None and backup.alive and backup.phase is not Phase.ISOLATED:
            return backup, False
    sds = state.alive_sds()
    return (sds[0] if sds else None), True


def _reassign_target(state: SwarmState, target: int) -> None:
    """Keep an orphaned target covered: idle SD first, else next session."""
    idle = [
        d for d in state.alive_sds()
        if d.assigned_target is None and d.phase is not Phase.RETURNING
    ]
    if idle:
        idle[0].assigned_target = target
        state.assignments[idle[0].id] = target
    else:
        state.pending_targets.append(target)


def _promote(state: SwarmState, new_leader: Drone, carry_streams: bool) -> None:
    old_id = state.leader_id
    new_leader.role = Role.LEADER
    state.leader_id = new_leader.id
    orphaned = state.assignments.pop(new_leader.id, None)
    new_leader.assigned_target = None
    if new_leader.id == state.backup_id:
        state.backup_id = None  # slot consumed; next failure falls back
    if carry_streams:
        for kind in (MessageKind.STATUS_REPORT_LD, MessageKind.MOVE_TO_WAYPOINT):
            state.seq.transfer_stream(kind, old_id, new_leader.id)
    if orphaned is not None:
        _reassign_target(state, orphaned)


def soft_handover(
    state: SwarmState,
    now_us: int,
    thresholds: PredictionThresholds = DEFAULT_THRESHOLDS,
) -> SwarmState:
    """Proactive leadership transfer ahead of a predicted leader failure.

    The backup inherits sequence counters and the aggregation buffer, so no
    report is lost. The old leader demotes to an SD in power-saving mode and
    heads home if its battery is below the floor. Requires the prediction to
    actually hold; a dead backup falls back to the lowest-id alive SD and is
    recorded as a deviation.
    """
    old = state.leader()
    if not old.alive:
        raise FailureError("soft handover needs a live leader; use hard_handover")
    if not predict_failure(old.telemetry, thresholds, now_us):
        raise FailureError("soft handover without a failure prediction")
    candidate, fell_back = _promotion_candidate(state)
    if candidate is None:
        state.deviations.append(f"t={now_us}us soft handover found no SD to promote")
        return state
    if fell_back:
        state.deviations.append(
            f"t={now_us}us backup unavailable; promoted SD {candidate.id} instead"
        )
    _promote(state, candidate, carry_streams=True)
    old.role = Role.SLAVE
    old.power_saving = True
    if old.telemetry.battery_pct < thresholds.battery_floor_pct:
        old.phase = Phase.RETURNING
        old.waypoint = state.plan.dmc_position
    return state


def hard_handover(
    state: SwarmState,
    detection: DetectionRecord,
    now_us: int,
    failed_at_us: int | None = None,
) -> SwarmState:
    """Takeover after an unplanned leader loss.

    The dead leader's buffered aggregate is charged to the loss counters,
    the backup (or fallback SD) assumes command, and the failure-to-command
    gap is recorded as a recovery-time sample.
    """
    old = state.drones[detection.leader_id]
    if old.alive and now_us - old.telemetry.last_heard <= _timeout_for(detection.mode):
        raise FailureError("hard handover requires a dead or long-unheard leader")
    state.lost_reports += len(state.aggregation_buffer)
    state.aggregation_buffer.clear()
    candidate, fell_back = _promotion_candidate(state)
    if candidate is None:
        state.aborted = True
        state.deviations.append(f"t={now_us}us no drone left to lead; mission aborted")
        return state
    if fell_back:
        state.deviations.append(
            f"t={now_us}us backup unavailable; promoted SD {candidate.id} instead"
        )
    _promote(state, candidate, carry_streams=False)
    if old.role is Role.LEADER:
        old.role = Role.SLAVE
    origin = detection.last_heard_us if failed_at_us is None else failed_at_us
    state.recovery_times_us.append(now_us - origin)
    return state


def _timeout_for(mode: str) -> int:
    if mode == "flight":
        return FLIGHT_DETECTION_TIMEOUT_US
    if mode == "collection":
        return COLLECTION_DETECTION_TIMEOUT_US
    raise FailureError(f"unknown detection mode {mode!r}")


def detect_ld_loss(state: SwarmState, now_us: int, mode: str) -> DetectionRecord | None:
    """Watchdog check run by the backup against the leader's last activity."""
    leader = state.leader()
    last = leader.telemetry.last_heard
    if now_us - last > _timeout_for(mode):
        return DetectionRecord(
            leader_id=leader.id, detected_at_us=now_us, last_heard_us=last, mode=mode
        )
    return None


def reallocate_tasks(state: SwarmState, failed_sd: int) -> SwarmState:
    """Move a failed SD's target to an idle alive SD, else queue it for the
    next session so coverage is preserved."""
    drone = state.drones[failed_sd]
    if drone.role is Role.LEADER:
        raise FailureError("reallocate_tasks applies to SDs; leaders hand over")
    target = state.assignments.pop(failed_sd, None)
    drone.assigned_target = None
    if target is not None:
        _reassign_target(state, target)
    return state


def isolate_drone(state: SwarmState, drone_id: int) -> SwarmState:
    """Cut a failed drone out of the network; idempotent."""
    drone = state.drones[drone_id]
    if drone.phase is Phase.ISOLATED:
        return state
    if drone_id == state.leader_id:
        raise FailureError("cannot isolate the acting leader; hand over first")
    if drone.alive and drone.phase is not Phase.FAILED:
        raise FailureError(f"drone {drone_id} is not failed; refusing to isolate")
    if drone.phase is not Phase.FAILED:
        drone.phase = transition_phase(drone.phase, PhaseEvent.FAILURE_DETECTED)
    drone.phase = transition_phase(drone.phase, PhaseEvent.ISOLATE)
    return state


def return_to_base(
    state: SwarmState, drone_id: int, min_battery_pct: float = 25.0
) -> SwarmState:
    """Send a struggling drone home for maintenance.

    Needs enough battery for the base leg (default: one quarter, the
    round-trip share of the flight budget); otherwise the drone lands in
    place as failed. A drone already landed at base stays put. This is a
    per-drone maintenance path orthogonal to the mission-level machine.
    """
    drone = state.drones[drone_id]
    if drone.phase is Phase.LANDED:
        return state
    if not drone.alive:
        raise FailureError(f"drone {drone_id} is not alive")
    if drone.telemetry.battery_pct >= min_battery_pct:
        drone.phase = Phase.RETURNING
        drone.waypoint = state.plan.dmc_position
        if drone.id in state.assignments:
            reallocate_tasks(state, drone.id)
    else:
        drone.phase = Phase.FAILED
        drone.alive = False
        state.deviations.append(
            f"drone {drone_id} battery {drone.telemetry.battery_pct:.0f}% "
            f"below the {min_battery_pct:.0f}% return margin; landed in place"
        )
    return state
