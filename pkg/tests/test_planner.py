import numpy as np
import pytest

from coverops.core import AgentPayload
from coverops.errors import InvariantViolation, PlannerContractViolation
from coverops.graph import EnvironmentGraph, build_grid
from coverops.likelihood import AgentTimingView, LikelihoodSchedule
from coverops.planner import (GreedyErgodicPlanner, MotionState, ProhibitionBlindPlanner,
                              RandomAdmissiblePlanner, advance_motion, make_planner,
                              on_communication, reference_planner_next)

from conftest import path_graph


class NeverAsked:
    def next_move(self, *args):
        raise AssertionError("planner consulted during a retreat")


class Stay:
    def next_move(self, *args):
        return None


def uniform(n):
    return LikelihoodSchedule.static(np.full(n, 1.0 / n))


def view(region, recent=(), tau=-1.0, omega=0.0):
    return AgentTimingView(frozenset(region), frozenset(recent), tau, omega)


class TestReferencePlanner:
    def test_single_admissible_neighbour(self, abc):
        m = MotionState.start(0, 0, 1.0, 3)
        assert reference_planner_next(abc, view({0, 1}), m, uniform(3), 0.0) == 1

    def test_singleton_active_region_stays(self, abc):
        m = MotionState.start(0, 1, 1.0, 3)
        assert reference_planner_next(abc, view({1}), m, uniform(3), 0.0) is None

    def test_prohibited_neighbour_is_skipped(self, abc):
        m = MotionState.start(0, 1, 1.0, 3)
        v = view({0, 1, 2}, recent={0, 2}, tau=5.0)
        assert reference_planner_next(abc, v, m, uniform(3), 1.0) is None
        assert reference_planner_next(abc, v, m, uniform(3), 5.0) == 0

    def test_tie_goes_to_lower_id(self, abc):
        m = MotionState.start(0, 1, 1.0, 3)
        assert reference_planner_next(abc, view({0, 1, 2}), m, uniform(3), 0.0) == 0

    def test_prefers_likely_and_unvisited(self, abc):
        phi = LikelihoodSchedule.static([0.2, 0.2, 0.6])
        m = MotionState.start(0, 1, 1.0, 3)
        assert reference_planner_next(abc, view({0, 1, 2}), m, phi, 0.0) == 2
        m.visit_counts[2] = 5
        assert reference_planner_next(abc, view({0, 1, 2}), m, phi, 0.0) == 0

    def test_make_planner(self):
        rng = np.random.default_rng(0)
        assert isinstance(make_planner("greedy-ergodic", rng), GreedyErgodicPlanner)
        assert isinstance(make_planner("random-admissible", rng), RandomAdmissiblePlanner)
        with pytest.raises(ValueError):
            make_planner("smc", rng)

    def test_random_planner_stays_admissible(self):
        g = build_grid(4, 4)
        v = view(range(8), recent={4, 5}, tau=100.0)
        planner = RandomAdmissiblePlanner(np.random.default_rng(3))
        m = MotionState.start(0, 0, 1.0, 16)
        step = advance_motion(g, m, v, uniform(16), planner, 0.0, 50.0)
        assert {r.vertex for r in step.records} <= set(range(8)) - {4, 5}


class TestAdvanceMotion:
    def test_stay_gives_one_record(self, abc):
        m = MotionState.start(0, 1, 1.0, 3)
        step = advance_motion(abc, m, view({0, 1, 2}), uniform(3), Stay(), 2.0, 7.5)
        assert [(r.vertex, r.enter, r.exit, r.in_transit) for r in step.records] == \
            [(1, 2.0, 7.5, False)]

    def test_traversal_time_is_weight_over_speed(self, abc):
        m = MotionState.start(0, 0, 2.0, 3)
        step = advance_motion(abc, m, view({0, 1}), uniform(3), GreedyErgodicPlanner(), 0.0, 0.5)
        assert step.arrivals == [(0.5, 1)]
        assert m.current_vertex == 1 and m.transit is None
        assert m.visit_counts[1] == 1

    def test_transit_spanning_horizon(self):
        g = EnvironmentGraph(2, ((0, 1, 3.0),))
        m = MotionState.start(0, 0, 1.0, 2)
        step = advance_motion(g, m, view({0, 1}), uniform(2), GreedyErgodicPlanner(), 0.0, 1.0)
        assert m.transit.arrive - m.transit.depart == 3.0
        assert {(r.vertex, r.in_transit) for r in step.records} == {(0, True), (1, True)}
        step = advance_motion(g, m, view({0, 1}), uniform(2), GreedyErgodicPlanner(), 1.0, 3.0)
        assert step.arrivals == [(3.0, 1)] and m.transit is None

    def test_no_decision_at_horizon(self, abc):
        m = MotionState.start(0, 0, 1.0, 3)
        advance_motion(abc, m, view({0, 1, 2}), uniform(3), GreedyErgodicPlanner(), 0.0, 1.0)
        assert m.current_vertex == 1 and m.transit is None

    def test_retreat_ignores_planner(self):
        g = path_graph([1, 1, 1, 1])
        m = MotionState.start(0, 0, 1.0, 5)
        m.mode, m.retreat_path = "retreat", [0, 1, 2]
        step = advance_motion(g, m, view({2, 3}), uniform(5), NeverAsked(), 0.0, 2.0)
        assert step.arrivals == [(1.0, 1), (2.0, 2)]
        assert m.mode == "normal" and m.retreat_path == []

    def test_contract_violation(self, abc):
        m = MotionState.start(0, 1, 1.0, 3)
        v = view({1, 2})
        with pytest.raises(PlannerContractViolation) as exc:
            advance_motion(abc, m, v, uniform(3), ProhibitionBlindPlanner(), 0.0, 1.0)
        assert exc.value.clause == "agent-motion"

    def test_contract_check_can_be_disabled(self, abc):
        m = MotionState.start(0, 1, 1.0, 3)
        advance_motion(abc, m, view({1, 2}), uniform(3), ProhibitionBlindPlanner(), 0.0, 1.0,
                       check_contract=False)
        assert m.current_vertex == 0

    def test_non_adjacent_target(self):
        class Teleport:
            def next_move(self, *args):
                return 2

        g = path_graph([1, 1])
        m = MotionState.start(0, 0, 1.0, 3)
        with pytest.raises(PlannerContractViolation):
            advance_motion(g, m, view({0, 1, 2}), uniform(3), Teleport(), 0.0, 1.0)

    def test_backwards_horizon(self, abc):
        with pytest.raises(ValueError):
            advance_motion(abc, MotionState.start(0, 0, 1.0, 3), view({0}), uniform(3), Stay(),
                           2.0, 1.0)


def payload(region, recent=(), tau=0.0, omega=0.0, gen=None):
    region = frozenset(region)
    return AgentPayload(region, gen if gen is not None else min(region), frozenset(recent),
                        tau, omega)


class TestOnCommunication:
    def test_location_kept(self):
        g = path_graph([1, 1, 1])
        m = MotionState.start(0, 1, 1.0, 4)
        on_communication(g, m, frozenset({0, 1, 2}), payload({0, 1}), 3.0)
        assert m.mode == "normal" and m.retreat_path == []

    def test_location_removed_starts_retreat(self):
        g = path_graph([1, 1, 1, 1])
        m = MotionState.start(0, 3, 1.0, 5)
        on_communication(g, m, frozenset({0, 1, 2, 3}), payload({0, 1}), 3.0)
        assert m.mode == "retreat" and m.retreat_path == [3, 2, 1]

    def test_no_path_is_a_protocol_violation(self):
        g = path_graph([1, 1, 1])
        m = MotionState.start(0, 3, 1.0, 4)
        with pytest.raises(InvariantViolation):
            on_communication(g, m, frozenset({0, 3}), payload({0}), 1.0)

    def test_mid_transit_is_handled_on_arrival(self):
        g = path_graph([1, 1, 1, 1])
        m = MotionState.start(0, 2, 1.0, 5)
        advance_motion(g, m, view({2, 3}), uniform(5), GreedyErgodicPlanner(), 0.0, 0.5)
        assert m.transit is not None and m.transit.to == 3
        pay = payload({0, 1})
        on_communication(g, m, frozenset({0, 1, 2, 3}), pay, 0.5)
        assert m.mode == "normal" and m.pending_region is not None
        step = advance_motion(g, m, pay.view(), uniform(5), NeverAsked(), 0.5, 3.0)
        assert [v for _, v in step.arrivals] == [3, 2, 1]
        assert m.mode == "normal" and m.current_vertex == 1
