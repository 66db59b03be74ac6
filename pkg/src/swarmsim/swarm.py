"""Swarm state: operational phase machine, formation geometry, kinematics,
task assignment, and the stochastic case-classification stub.

One leader drone (LD) coordinates n slave drones (SDs) over a 2 km x 2 km
plane anchored at a ground station (the DMC). Drones fly at a fixed cruise
speed, land at assigned targets to collect data, and report through the
leader. A pre-designated backup SD takes over leadership on failure (see
the failure module).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

from .protocol import SequenceCounters

SPAN_M = 2000.0
LEADER_ID = 1  # initial leader; DMC is address 0, SDs are 2..n+1


class SwarmError(ValueError):
    """Invalid swarm construction or operation arguments."""


class PhaseError(SwarmError):
    """Illegal phase-machine transition."""


class Role(Enum):
    LEADER = "leader"
    SLAVE = "slave"


class Phase(Enum):
    POWERED_UP = "powered_up"
    CONNECTED = "connected"
    CONFIGURED = "configured"
    LAUNCHING = "launching"
    IN_FORMATION = "in_formation"
    TRANSIT = "transit"
    DEPLOYING = "deploying"
    COLLECTING = "collecting"
    REPORTING = "reporting"
    RETURNING = "returning"
    LANDED = "landed"
    FAILED = "failed"
    ISOLATED = "isolated"


# Phases in which a drone is airborne; everything else sits on the ground
# (collection happens landed, in power-saving mode).
AIRBORNE_PHASES = frozenset({
    Phase.LAUNCHING, Phase.IN_FORMATION, Phase.TRANSIT,
    Phase.DEPLOYING, Phase.REPORTING, Phase.RETURNING,
})


class PhaseEvent(Enum):
    CONNECTION_ESTABLISHED = "connection_established"
    CONFIGURATION_COMPLETE = "configuration_complete"
    LAUNCH_COMMAND = "launch_command"
    FORMATION_FORMED = "formation_formed"
    TRANSIT_STARTED = "transit_started"
    AREA_REACHED = "area_reached"
    DEPLOYMENT_COMPLETE = "deployment_complete"
    SESSION_COMPLETE = "session_complete"
    REPOSITION_COMPLETE = "reposition_complete"
    DATA_SUFFICIENT_CONFIRMATION = "data_sufficient_confirmation"
    LANDED_AT_BASE = "landed_at_base"
    FAILURE_DETECTED = "failure_detected"
    ISOLATE = "isolate"


_EDGES: dict[tuple[Phase, PhaseEvent], Phase] = {
    (Phase.POWERED_UP, PhaseEvent.CONNECTION_ESTABLISHED): Phase.CONNECTED,
    (Phase.CONNECTED, PhaseEvent.CONFIGURATION_COMPLETE): Phase.CONFIGURED,
    (Phase.CONFIGURED, PhaseEvent.LAUNCH_COMMAND): Phase.LAUNCHING,
    (Phase.LAUNCHING, PhaseEvent.FORMATION_FORMED): Phase.IN_FORMATION,
    (Phase.IN_FORMATION, PhaseEvent.TRANSIT_STARTED): Phase.TRANSIT,
    (Phase.TRANSIT, PhaseEvent.AREA_REACHED): Phase.DEPLOYING,
    (Phase.DEPLOYING, PhaseEvent.DEPLOYMENT_COMPLETE): Phase.COLLECTING,
    (Phase.COLLECTING, PhaseEvent.SESSION_COMPLETE): Phase.REPORTING,
    (Phase.REPORTING, PhaseEvent.REPOSITION_COMPLETE): Phase.COLLECTING,
    (Phase.COLLECTING, PhaseEvent.DATA_SUFFICIENT_CONFIRMATION): Phase.RETURNING,
    (Phase.REPORTING, PhaseEvent.DATA_SUFFICIENT_CONFIRMATION): Phase.RETURNING,
    (Phase.RETURNING, PhaseEvent.LANDED_AT_BASE): Phase.LANDED,
    (Phase.FAILED, PhaseEvent.ISOLATE): Phase.ISOLATED,
}
# Any live phase can fail.
for _p in Phase:
    if _p not in (Phase.FAILED, Phase.ISOLATED):
        _EDGES[(_p, PhaseEvent.FAILURE_DETECTED)] = Phase.FAILED


def transition_phase(phase: Phase, event: PhaseEvent) -> Phase:
    """Apply exactly one edge of the phase machine."""
    try:
        return _EDGES[(phase, event)]
    except KeyError:
        raise PhaseError(
            f"illegal transition: event {event.name} in phase {phase.name}"
        ) from None


# Letters for the mission-level trace, checked against the canonical shape:
# configure, launch, form, transit, deploy, then collect/report cycles,
# return, land.
_TRACE_LETTER = {
    Phase.CONFIGURED: "C", Phase.LAUNCHING: "L", Phase.IN_FORMATION: "F",
    Phase.TRANSIT: "T", Phase.DEPLOYING: "D", Phase.COLLECTING: "G",
    Phase.REPORTING: "R", Phase.RETURNING: "B", Phase.LANDED: "N",
}
_TRACE_RE = re.compile(r"CLFTDG(RG)*R?BN")


def validate_phase_trace(trace: list[Phase]) -> bool:
    """True iff a completed mission's phase sequence has the canonical shape."""
    letters = "".join(_TRACE_LETTER.get(p, "?") for p in trace)
    return _TRACE_RE.fullmatch(letters) is not None


@dataclass
class Telemetry:
    battery_pct: float = 100.0
    temperature_c: float = 25.0
    last_heard: int = 0  # microseconds

    def __post_init__(self):
        if not 0.0 <= self.battery_pct <= 100.0:
            raise SwarmError(f"battery_pct={self.battery_pct} outside 0-100")


@dataclass
class Drone:
    id: int
    role: Role
    position: tuple[float, float] = (0.0, 0.0)
    phase: Phase = Phase.CONFIGURED
    assigned_target: int | None = None
    alive: bool = True
    telemetry: Telemetry = field(default_factory=Telemetry)
    waypoint: tuple[float, float] | None = None
    power_saving: bool = False

    @property
    def airborne(self) -> bool:
        return self.alive and self.phase in AIRBORNE_PHASES


class CaseClass(Enum):
    HEALTHY = "healthy"
    SUSPICIOUS = "suspicious"
    INFECTED = "infected"
    EMERGENCY = "emergency"


@dataclass(frozen=True)
class MissionPlan:
    dmc_position: tuple[float, float] = (0.0, SPAN_M / 2)
    target_positions: tuple[tuple[float, float], ...] = ()
    formation: str = "linear"
    spacing_m: float = 12.0
    speed_kmh: float = 12.0
    session_duration_s: float = 1800.0
    n_sessions: int = 1
    reposition_time_s: float = 60.0
    span_m: float = SPAN_M

    def __post_init__(self):
        if self.spacing_m <= 0 or self.speed_kmh <= 0:
            raise SwarmError("spacing and speed must be positive")
        if self.session_duration_s <= 0:
            raise SwarmError("session duration must be positive")

    @property
    def speed_ms(self) -> float:
        return self.speed_kmh * 1000.0 / 3600.0


@dataclass
class SwarmState:
    plan: MissionPlan
    drones: dict[int, Drone]
    leader_id: int
    backup_id: int | None
    seq: SequenceCounters = field(default_factory=SequenceCounters)
    # SD status reports held by the acting leader between flushes; carried
    # across a soft handover, lost on a hard one.
    aggregation_buffer: list = field(default_factory=list)
    assignments: dict[int, int] = field(default_factory=dict)  # sd id -> target
    pending_targets: list[int] = field(default_factory=list)
    collected: list[int] = field(default_factory=list)
    deviations: list[str] = field(default_factory=list)
    recovery_times_us: list[int] = field(default_factory=list)
    lost_reports: int = 0
    aborted: bool = False

    def leader(self) -> Drone:
        return self.drones[self.leader_id]

    def alive_drones(self) -> list[Drone]:
        return [d for d in self.drones.values() if d.alive]

    def alive_sds(self) -> list[Drone]:
        return sorted(
            (d for d in self.drones.values()
             if d.alive and d.role is Role.SLAVE and d.phase is not Phase.ISOLATED),
            key=lambda d: d.id,
        )


def init_swarm(plan: MissionPlan, n: int, backup_id: int) -> SwarmState:
    """Build a configured swarm: leader id 1, SDs ids 2..n+1."""
    if n < 1:
        raise SwarmError("swarm needs at least one SD")
    sd_ids = range(LEADER_ID + 1, LEADER_ID + 1 + n)
    if backup_id not in sd_ids:
        raise SwarmError(
            f"backup_id={backup_id} must name an SD (ids {sd_ids.start}..{sd_ids.stop - 1})"
        )
    drones = {LEADER_ID: Drone(LEADER_ID, Role.LEADER, plan.dmc_position)}
    for i in sd_ids:
        drones[i] = Drone(i, Role.SLAVE, plan.dmc_position)
    return SwarmState(plan=plan, drones=drones, leader_id=LEADER_ID, backup_id=backup_id)


def formation_positions(
    formation: str,
    n: int,
    spacing: float,
    leader_pos: tuple[float, float],
    heading: tuple[float, float] = (1.0, 0.0),
) -> list[tuple[float, float]]:
    """Slot positions for n SDs relative to the leader.

    linear: one row a single spacing behind the leader, slots fanned out
    laterally (the center slot directly behind is used only for odd counts,
    keeping even counts symmetric about the axis).
    grid: ceil(sqrt(n)) columns at the same pitch, rows stacked behind.
    """
    if n < 1:
        raise SwarmError("formation needs at least one SD")
    if spacing <= 0:
        raise SwarmError("spacing must be positive")
    norm = math.hypot(*heading)
    if norm == 0:
        raise SwarmError("heading must be a nonzero vector")
    hx, hy = heading[0] / norm, heading[1] / norm
    px, py = -hy, hx  # lateral (perpendicular) unit vector
    lx, ly = leader_pos

    def slot(back: float, lateral: float) -> tuple[float, float]:
        return (lx - back * hx + lateral * px, ly - back * hy + lateral * py)

    if formation == "linear":
        if n % 2 == 1:
            laterals = [0.0] + [s * k * spacing for k in range(1, n // 2 + 1) for s in (1, -1)]
        else:
            laterals = [s * k * spacing for k in range(1, n // 2 + 1) for s in (1, -1)]
        return [slot(spacing, lat) for lat in laterals[:n]]
    if formation == "grid":
        cols = math.isqrt(n)
        if cols * cols < n:
            cols += 1
        out = []
        for k in range(n):
            r, c = divmod(k, cols)
            lateral = (c - (cols - 1) / 2.0) * spacing
            out.append(slot((r + 1) * spacing, lateral))
        return out
    raise SwarmError(f"unknown formation {formation!r}")


def advance_kinematics(state: SwarmState, dt_us: int, rng=None, noise_sigma_m: float = 0.0) -> SwarmState:
    """Move airborne drones toward their waypoints at cruise speed.

    Displacement per step is capped at speed * dt; landed, failed, and
    isolated drones hold position. Optional zero-mean Gaussian position
    noise stands in for environmental disturbance. Positions are clamped
    to the span area.
    """
    if dt_us <= 0:
        raise SwarmError("dt must be positive")
    step = state.plan.speed_ms * dt_us / 1e6
    span = state.plan.span_m
    for drone in state.drones.values():
        if not drone.airborne or drone.waypoint is None:
            continue
        x, y = drone.position
        wx, wy = drone.waypoint
        dist = math.hypot(wx - x, wy - y)
        if dist <= step or dist == 0.0:
            nx, ny = wx, wy
        else:
            f = step / dist
            nx, ny = x + (wx - x) * f, y + (wy - y) * f
        if noise_sigma_m > 0.0 and rng is not None:
            nx += rng.gauss(0.0, noise_sigma_m)
            ny += rng.gauss(0.0, noise_sigma_m)
        drone.position = (min(max(nx, 0.0), span), min(max(ny, 0.0), span))
    return state


def assign_targets(state: SwarmState, targets: list[int]) -> dict[int, int]:
    """Map each target to one alive SD, lowest ids first.

    SDs already holding a target keep it; a session must be split by the
    caller when targets outnumber alive SDs.
    """
    sds = [d for d in state.alive_sds() if d.phase is not Phase.RETURNING]
    if len(targets) > len(sds):
        raise SwarmError(
            f"{len(targets)} targets exceed {len(sds)} available SDs; split the session"
        )
    assignment = {}
    for sd, target in zip(sds, targets):
        assignment[sd.id] = target
        sd.assigned_target = target
    for sd in sds[len(targets):]:
        sd.assigned_target = None
    state.assignments = assignment
    return assignment


def classify_case(
    draw: float,
    infection_rate: float,
    escalation_split: float = 0.5,
    suspicious_share: float = 0.1,
) -> CaseClass:
    """Map a uniform draw to a case class.

    A fraction ``infection_rate`` of cases escalates (split between
    infected and emergency); the rest splits healthy vs suspicious.
    Escalations trigger a case report and, when enabled, a video call.
    """
    if not 0.0 <= infection_rate <= 1.0:
        raise SwarmError(f"infection_rate={infection_rate} outside [0, 1]")
    if not 0.0 <= draw < 1.0:
        raise SwarmError(f"draw={draw} outside [0, 1)")
    if draw < infection_rate * escalation_split:
        return CaseClass.INFECTED
    if draw < infection_rate:
        return CaseClass.EMERGENCY
    rest = draw - infection_rate
    if rest < (1.0 - infection_rate) * (1.0 - suspicious_share):
        return CaseClass.HEALTHY
    return CaseClass.SUSPICIOUS


def escalates(c: CaseClass) -> bool:
    return c in (CaseClass.INFECTED, CaseClass.EMERGENCY)
