"""Phase machine, formation geometry, kinematics, assignment, classification."""
import math

import pytest
from hypothesis import given, strategies as st

from swarmsim.swarm import (
    CaseClass,
    MissionPlan,
    Phase,
    PhaseError,
    PhaseEvent,
    Role,
    SwarmError,
    advance_kinematics,
    assign_targets,
    classify_case,
    escalates,
    formation_positions,
    init_swarm,
    transition_phase,
    validate_phase_trace,
)


class TestPhaseMachine:
    def test_launch_command_from_configured(self):
        assert transition_phase(Phase.CONFIGURED, PhaseEvent.LAUNCH_COMMAND) is Phase.LAUNCHING

    def test_data_sufficient_ends_collection(self):
        assert transition_phase(
            Phase.COLLECTING, PhaseEvent.DATA_SUFFICIENT_CONFIRMATION
        ) is Phase.RETURNING

    def test_illegal_edge_rejected(self):
        with pytest.raises(PhaseError):
            transition_phase(Phase.LANDED, PhaseEvent.DATA_SUFFICIENT_CONFIRMATION)

    def test_any_live_phase_can_fail(self):
        for phase in Phase:
            if phase in (Phase.FAILED, Phase.ISOLATED):
                continue
            assert transition_phase(phase, PhaseEvent.FAILURE_DETECTED) is Phase.FAILED

    def test_failed_then_isolated(self):
        assert transition_phase(Phase.FAILED, PhaseEvent.ISOLATE) is Phase.ISOLATED

    def test_single_session_trace_valid(self):
        trace = [Phase.CONFIGURED, Phase.LAUNCHING, Phase.IN_FORMATION,
                 Phase.TRANSIT, Phase.DEPLOYING, Phase.COLLECTING,
                 Phase.RETURNING, Phase.LANDED]
        assert validate_phase_trace(trace)

    def test_multi_session_trace_valid(self):
        trace = [Phase.CONFIGURED, Phase.LAUNCHING, Phase.IN_FORMATION,
                 Phase.TRANSIT, Phase.DEPLOYING,
                 Phase.COLLECTING, Phase.REPORTING,
                 Phase.COLLECTING, Phase.REPORTING,
                 Phase.COLLECTING, Phase.RETURNING, Phase.LANDED]
        assert validate_phase_trace(trace)

    def test_trace_missing_return_rejected(self):
        trace = [Phase.CONFIGURED, Phase.LAUNCHING, Phase.IN_FORMATION,
                 Phase.TRANSIT, Phase.DEPLOYING, Phase.COLLECTING, Phase.LANDED]
        assert not validate_phase_trace(trace)


class TestInitSwarm:
    def test_ten_sds_builds_eleven_drones(self):
        state = init_swarm(MissionPlan(), 10, backup_id=3)
        assert len(state.drones) == 11
        leaders = [d for d in state.drones.values() if d.role is Role.LEADER]
        assert [d.id for d in leaders] == [1]
        assert state.backup_id == 3

    def test_minimal_swarm(self):
        state = init_swarm(MissionPlan(), 1, backup_id=2)
        assert sorted(state.drones) == [1, 2]

    def test_backup_must_be_an_sd(self):
        with pytest.raises(SwarmError):
            init_swarm(MissionPlan(), 3, backup_id=1)

    def test_empty_swarm_rejected(self):
        with pytest.raises(SwarmError):
            init_swarm(MissionPlan(), 0, backup_id=2)


class TestFormationGeometry:
    def test_linear_pair_straddles_the_axis(self):
        slots = formation_positions("linear", 2, 12.0, (100.0, 100.0), heading=(1.0, 0.0))
        laterals = sorted(round(y - 100.0, 9) for _, y in slots)
        assert laterals == [-12.0, 12.0]
        assert all(x == 88.0 for x, _ in slots)

    def test_grid_of_four_is_2x2_at_pitch(self):
        slots = formation_positions("grid", 4, 12.0, (0.0, 0.0))
        dists = [math.dist(a, b) for i, a in enumerate(slots) for b in slots[i + 1:]]
        assert min(dists) == pytest.approx(12.0)

    def test_single_sd_sits_one_spacing_behind(self):
        (slot,) = formation_positions("linear", 1, 12.0, (50.0, 50.0), heading=(1.0, 0.0))
        assert slot == (38.0, 50.0)

    def test_unknown_formation_rejected(self):
        with pytest.raises(SwarmError):
            formation_positions("ring", 3, 12.0, (0.0, 0.0))

    @given(n=st.integers(1, 40), spacing=st.floats(1.0, 50.0))
    def test_slot_count_and_uniqueness(self, n, spacing):
        slots = formation_positions("grid", n, spacing, (1000.0, 1000.0))
        assert len(slots) == n
        assert len({(round(x, 6), round(y, 6)) for x, y in slots}) == n


class TestKinematics:
    def _flying_state(self):
        state = init_swarm(MissionPlan(dmc_position=(0.0, 0.0)), 1, backup_id=2)
        for d in state.drones.values():
            d.phase = Phase.TRANSIT
        return state

    def test_cruise_speed_covers_1km_in_300s(self):
        state = self._flying_state()
        ld = state.drones[1]
        ld.position = (0.0, 0.0)
        ld.waypoint = (1000.0, 0.0)
        advance_kinematics(state, 300_000_000)
        assert ld.position[0] == pytest.approx(1000.0)

    def test_zero_dt_rejected(self):
        with pytest.raises(SwarmError):
            advance_kinematics(self._flying_state(), 0)

    def test_landed_drone_holds_position(self):
        state = self._flying_state()
        sd = state.drones[2]
        sd.phase = Phase.LANDED
        sd.position = (5.0, 5.0)
        sd.waypoint = (500.0, 500.0)
        advance_kinematics(state, 60_000_000)
        assert sd.position == (5.0, 5.0)

    @given(dt_s=st.integers(1, 600))
    def test_step_never_exceeds_speed_times_dt(self, dt_s):
        state = self._flying_state()
        ld = state.drones[1]
        ld.position = (0.0, 0.0)
        ld.waypoint = (2000.0, 2000.0)
        advance_kinematics(state, dt_s * 1_000_000)
        moved = math.dist((0.0, 0.0), ld.position)
        assert moved <= state.plan.speed_ms * dt_s * (1 + 1e-9)


class TestAssignment:
    def _collecting_state(self, n):
        state = init_swarm(MissionPlan(), n, backup_id=3 if n >= 2 else 2)
        for d in state.drones.values():
            d.phase = Phase.COLLECTING
        return state

    def test_equal_counts_give_a_bijection(self):
        state = self._collecting_state(10)
        assignment = assign_targets(state, list(range(10)))
        assert sorted(assignment) == list(range(2, 12))
        assert sorted(assignment.values()) == list(range(10))

    def test_surplus_sds_lowest_ids_win(self):
        state = self._collecting_state(10)
        assignment = assign_targets(state, [7, 8, 9])
        assert assignment == {2: 7, 3: 8, 4: 9}
        assert all(state.drones[i].assigned_target is None for i in range(5, 12))

    def test_too_many_targets_rejected(self):
        state = self._collecting_state(2)
        with pytest.raises(SwarmError):
            assign_targets(state, [1, 2, 3])


class TestCaseClassification:
    def test_zero_rate_never_escalates(self):
        for draw in (0.0, 0.3, 0.89, 0.95, 0.999):
            c = classify_case(draw, 0.0)
            assert c in (CaseClass.HEALTHY, CaseClass.SUSPICIOUS)
            assert not escalates(c)

    def test_unit_rate_always_escalates(self):
        for draw in (0.0, 0.49, 0.5, 0.999):
            c = classify_case(draw, 1.0)
            assert c in (CaseClass.INFECTED, CaseClass.EMERGENCY)
            assert escalates(c)

    def test_escalation_splits_infected_then_emergency(self):
        assert classify_case(0.01, 0.1) is CaseClass.INFECTED
        assert classify_case(0.07, 0.1) is CaseClass.EMERGENCY
        assert classify_case(0.5, 0.1) is CaseClass.HEALTHY
        assert classify_case(0.999, 0.1) is CaseClass.SUSPICIOUS

    def test_default_rate_escalates_cases_at_that_rate(self):
        # 10 SDs classifying once per session at rate 0.025 averages
        # 0.25 escalations per session (about one per four sessions).
        rate = 0.025
        n = 100_000
        hits = sum(escalates(classify_case((i + 0.5) / n, rate)) for i in range(n))
        assert hits / n == pytest.approx(rate, rel=0.01)

    def test_out_of_range_arguments_rejected(self):
        with pytest.raises(SwarmError):
            classify_case(1.0, 0.5)
        with pytest.raises(SwarmError):
            classify_case(0.5, 1.5)

    @given(draw=st.floats(0.0, 0.999999), rate=st.floats(0.0, 1.0))
    def test_classification_is_total_and_consistent(self, draw, rate):
        c = classify_case(draw, rate)
        assert escalates(c) == (draw < rate)
