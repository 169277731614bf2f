import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coverops.errors import LikelihoodError
from coverops.graph import build_grid
from coverops.likelihood import (AgentTimingView, LikelihoodSchedule, active_region,
                                 gaussian_masses, global_mass, local_mass, prohibited_region,
                                 random_gaussian_schedule)


def two_phase():
    a = np.array([0.7, 0.1, 0.1, 0.1])
    b = np.array([0.1, 0.1, 0.1, 0.7])
    return LikelihoodSchedule(((0.0, a), (2000.0, b)))


class TestSchedule:
    def test_uniform(self):
        s = LikelihoodSchedule.static(np.full(4, 0.25))
        assert all(global_mass(s, k, t) == 0.25 for k in range(4) for t in (0, 3.5, 1e6))

    def test_switch_is_right_continuous(self):
        s = two_phase()
        assert global_mass(s, 0, 1999.999) == 0.7
        assert global_mass(s, 0, 2000.0) == 0.1
        assert global_mass(s, 3, 2000.0) == 0.7
        assert s.switch_times == [2000.0]
        assert not s.is_static

    @pytest.mark.parametrize("segments", [
        (),
        ((1.0, [1.0]),),
        ((0.0, [0.5, 0.5]), (0.0, [0.5, 0.5])),
        ((0.0, [0.5, 0.5]), (3.0, [1.0])),
        ((0.0, [0.6, 0.6]),),
        ((0.0, [1.5, -0.5]),),
        ((0.0, [np.nan, 1.0]),),
    ])
    def test_rejects_malformed(self, segments):
        with pytest.raises(LikelihoodError):
            LikelihoodSchedule(segments)

    def test_normalization_tolerance(self):
        LikelihoodSchedule.static([0.5, 0.5 + 5e-10])
        with pytest.raises(LikelihoodError):
            LikelihoodSchedule.static([0.5, 0.5 + 5e-9])

    def test_negative_time_and_bad_vertex(self):
        s = two_phase()
        with pytest.raises(LikelihoodError):
            s.masses_at(-1.0)
        with pytest.raises(LikelihoodError):
            global_mass(s, 4, 0.0)

    def test_masses_are_read_only(self):
        s = two_phase()
        with pytest.raises(ValueError):
            s.masses_at(0.0)[0] = 1.0


class TestLocalMass:
    view = AgentTimingView(frozenset({0, 1, 2}), frozenset({2}), tau=7.0, omega=4.0)

    def test_outside_region(self):
        assert local_mass(self.view, two_phase(), 3, 5.0) == 0.0

    def test_gated_vertex(self):
        assert local_mass(self.view, two_phase(), 2, 10.0) == 0.0

    def test_gate_opens_at_closed_boundary(self):
        assert local_mass(self.view, two_phase(), 2, 11.0) == 0.1

    def test_retained_vertex_follows_global(self):
        assert local_mass(self.view, two_phase(), 0, 10.0) == 0.7
        assert local_mass(self.view, two_phase(), 0, 2500.0) == 0.1

    def test_frozen_mode_uses_last_contact(self):
        view = AgentTimingView(frozenset({0, 1}), frozenset(), tau=0.0, omega=1500.0)
        assert local_mass(view, two_phase(), 0, 2500.0, "frozen") == 0.7
        assert local_mass(view, two_phase(), 0, 2500.0, "instantaneous") == 0.1

    def test_unknown_mode(self):
        with pytest.raises(LikelihoodError):
            local_mass(self.view, two_phase(), 0, 10.0, "lagged")

    def test_recent_must_be_inside_region(self):
        with pytest.raises(LikelihoodError):
            AgentTimingView(frozenset({0}), frozenset({1}))


class TestProhibitedRegion:
    def test_initial_negative_tau(self):
        view = AgentTimingView(frozenset({0, 1}), frozenset({1}), tau=-2.0, omega=0.0)
        assert prohibited_region(view, 0.0) == frozenset()

    def test_gate_example(self):
        view = AgentTimingView(frozenset({1, 2, 3}), frozenset({3}), tau=7.0, omega=4.0)
        assert prohibited_region(view, 10.0) == {3}
        assert prohibited_region(view, 11.5) == frozenset()
        assert active_region(view, 10.0) == {1, 2}
        assert active_region(view, 11.5) == {1, 2, 3}

    def test_nothing_recent(self):
        view = AgentTimingView(frozenset({0, 1}), frozenset(), tau=50.0, omega=0.0)
        assert prohibited_region(view, 1.0) == frozenset()

    @given(st.sets(st.integers(0, 9), min_size=1), st.data(),
           st.floats(-5, 20), st.floats(0, 20))
    def test_gate_properties(self, region, data, tau, omega):
        recent = data.draw(st.sets(st.sampled_from(sorted(region))))
        view = AgentTimingView(frozenset(region), frozenset(recent), tau, omega)
        s = LikelihoodSchedule.static(np.full(10, 0.1))
        times = sorted(data.draw(st.lists(st.floats(0, 60), min_size=2, max_size=5)))
        prev = None
        for t in times:
            proh = prohibited_region(view, t)
            assert proh <= view.recently_added
            # support of the local likelihood lies in the active region
            support = {k for k in range(10) if local_mass(view, s, k, t) > 0}
            assert support == active_region(view, t)
            assert all(local_mass(view, s, k, t) == 0 for k in proh)
            if prev is not None:
                assert proh <= prev
            prev = proh


class TestGaussian:
    def test_normalized_and_peaked(self):
        g = build_grid(20, 20, 5.0)
        m = gaussian_masses(g.centers(), (0.0, 0.0), 30.0)
        assert m.sum() == pytest.approx(1.0, abs=1e-12)
        assert m.argmax() == 0 and m.argmin() == 399

    def test_rejects_bad_sigma(self):
        with pytest.raises(LikelihoodError):
            gaussian_masses(np.zeros((2, 2)), (0, 0), 0.0)

    def test_random_schedule(self):
        g = build_grid(5, 5, 1.0)
        rng = np.random.default_rng(4)
        s = random_gaussian_schedule(g.centers(), 12, 1000.0, 1.5, rng)
        assert len(s.switch_times) == 12
        assert all(0 < t < 1000 for t in s.switch_times)
        again = random_gaussian_schedule(g.centers(), 12, 1000.0, 1.5, np.random.default_rng(4))
        assert again.switch_times == s.switch_times
