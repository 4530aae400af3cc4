#!/usr/bin/env pytest -v
"""
    robolead.tests.test_controller
    ~~~~~~~~~~~~~~

    Tests for the carefulness dynamics, target geometry, phases and treatment modes.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
import logging
import pytest
import numpy as np

from robolead.errors import InvalidParameterError
from robolead.model import Vec2, Pose, ArenaSpec
from robolead.params import Params, ControllerParams, ReferenceDistribution
from robolead.controller import (Phase, Competent, Fixed, Random, Inverse, Controller, Observation,
                                 MotionCommand, make_mode, update_carefulness, side_indicator,
                                 approach_target, speed_factor, phase_transition, lead_next_target,
                                 nearest_corner, milling_target, deficit_weights, expected_durations,
                                 duration_shape,
                                 sample_random_bin,
                                 mode_carefulness, TICK, APPROACH_START, FIXED_CAREFULNESS)
from robolead.metrics import ScoreState
from robolead.utils import STATS


logging.basicConfig(level=logging.INFO, format='%(asctime)s %(levelname)s: %(message)s',
                    datefmt='%b %d %H:%M:%S')
logger = logging.getLogger(__name__)


@pytest.fixture(scope='module')
def cp():
    return ControllerParams()


@pytest.fixture(scope='module')
def arena():
    return ArenaSpec()


def angle_between(u, v):
    return math.degrees(math.acos(max(-1.0, min(1.0, u.dot(v) / (u.norm() * v.norm())))))


class TestCarefulness(object):
    def test_integrator(self, cp):
        assert update_carefulness(0.5, 1.0, cp) == pytest.approx(0.5375)
        assert update_carefulness(0.5, 0.5, cp) == 0.5

    def test_leaky(self, cp):
        assert update_carefulness(0.5, 0.5, cp, law='leaky', dt=0.04) == pytest.approx(0.4625)

    def test_inverse_sign(self, cp):
        assert update_carefulness(0.5, 1.0, cp, sign=-1) == pytest.approx(0.4625)

    def test_unknown_law(self, cp):
        with pytest.raises(InvalidParameterError):
            update_carefulness(0.5, 0.5, cp, law='proportional')

    @pytest.mark.parametrize('avoidance,bound', [(1.0, 1.0), (0.0, 0.0)])
    def test_saturation_in_14_steps(self, cp, avoidance, bound):
        a, steps = 0.5, 0
        values = []
        while a != bound:
            a = update_carefulness(a, avoidance, cp)
            values.append(a)
            steps += 1
        assert 13 <= steps <= 15
        # monotone trajectory
        assert values == sorted(values, reverse=(bound == 0.0))

    @pytest.mark.parametrize('law', ['integrator', 'leaky'])
    def test_bounded(self, cp, law):
        rng = np.random.default_rng(5)
        a = 0.5
        for e in rng.random(3000):
            a = update_carefulness(a, e, cp, law=law)
            assert 0.0 <= a <= 1.0


class TestGeometry(object):
    def test_side_indicator(self):
        fish = Pose(Vec2(0, 0), math.pi / 2)
        assert side_indicator(fish, Vec2(-1, 0)) == 1
        assert side_indicator(fish, Vec2(1, 0)) == -1
        assert side_indicator(fish, Vec2(0, 5), previous=-1) == -1
        assert side_indicator(fish, Vec2(0, 5), previous=1) == 1

    def test_side_indicator_rounding(self):
        for heading, robot in ((math.pi / 2, Vec2(0, 5)), (math.pi / 4, Vec2(30, 30)),
                               (-3 * math.pi / 4, Vec2(-7, -7)), (math.pi / 3, Vec2(50, 50 * math.sqrt(3)))):
            fish = Pose(Vec2(0, 0), heading)
            assert side_indicator(fish, robot, previous=-1) == -1
            assert side_indicator(fish, robot, previous=1) == 1
        fish = Pose(Vec2(0, 0), math.pi / 4)
        assert side_indicator(fish, Vec2(30, 30.001)) == 1
        assert side_indicator(fish, Vec2(30.001, 30), previous=1) == -1

    def test_approach_target_examples(self, cp):
        robot = Vec2(0, 0)
        fish = Pose(Vec2(10, 0), math.pi / 2)
        target = approach_target(robot, fish, 0.0, cp)
        assert target.x == pytest.approx(4.0)
        assert target.y == pytest.approx(0.0, abs=1e-12)
        target = approach_target(robot, fish, 1.0, cp)
        assert target.x == pytest.approx(0.0, abs=1e-12)
        assert target.y == pytest.approx(4.0)

    def test_fixed_mode_angle(self, cp):
        robot = Vec2(0, 0)
        fish = Pose(Vec2(10, 0), math.pi / 2)
        target = approach_target(robot, fish, FIXED_CAREFULNESS, cp)
        assert abs(angle_between(target - robot, Vec2(4, 0)) - 47.52) <= 0.1

    @pytest.mark.parametrize('a', np.linspace(0.0, 1.0, 11))
    def test_angle_is_90a(self, cp, a):
        robot = Vec2(30, 40)
        fish = Pose(Vec2(45, 52), -0.3)
        g = fish.position + (robot - fish.position).unit() * cp.approach_offset
        target = approach_target(robot, fish, a, cp)
        assert angle_between(target - robot, g - robot) == pytest.approx(90.0 * a, abs=1e-5)
        assert (target - robot).norm() == pytest.approx((g - robot).norm())

    def test_careful_target_perpendicular(self, cp):
        robot = Vec2(20, 20)
        fish = Pose(Vec2(30, 35), 2.0)
        g = fish.position + (robot - fish.position).unit() * cp.approach_offset
        target = approach_target(robot, fish, 1.0, cp)
        assert abs((target - robot).dot(g - robot)) < 1e-9

    def test_reckless_target_on_segment(self, cp):
        robot = Vec2(20, 20)
        fish = Pose(Vec2(30, 35), 2.0)
        target = approach_target(robot, fish, 0.0, cp)
        assert abs((target - robot).cross(fish.position - robot)) < 1e-9
        assert (target - robot).norm() < (fish.position - robot).norm()

    def test_target_clamped(self, cp, arena):
        target = approach_target(Vec2(1, 1), Pose(Vec2(1, 20), 0.0), 1.0, cp, arena)
        assert arena.contains(target)


class TestSpeed(object):
    def test_speed_factor(self, cp):
        assert speed_factor(0.0, Phase.APPROACH, cp) == pytest.approx(1.2)
        assert speed_factor(0.0, Phase.APPROACH, cp) * cp.speed_unit == pytest.approx(30.0)
        assert speed_factor(1.0, Phase.APPROACH, cp) == pytest.approx(0.2)
        assert speed_factor(0.3, Phase.LEAD, cp) == 0.8717
        assert speed_factor(0.3, Phase.MILLING, cp) == pytest.approx(8.0 / 25.0)

    def test_fixed_mode_speed(self, cp):
        assert speed_factor(FIXED_CAREFULNESS, Phase.APPROACH, cp) * cp.speed_unit == pytest.approx(16.8)


class TestPhases(object):
    def run(self, phase, dist, steps, cp, dt=0.04):
        comfort = apart = 0.0
        for i in range(steps):
            new, comfort, apart = phase_transition(phase, comfort, apart, dist, dt, cp)
            if new is not phase:
                return new, i + 1
        return phase, steps

    def test_comfort_dwell(self, cp):
        assert self.run(Phase.APPROACH, 10.0, 100, cp) == (Phase.LEAD, 50)

    def test_lead_tolerance(self, cp):
        assert self.run(Phase.LEAD, 30.0, 100, cp) == (Phase.APPROACH, 25)

    def test_too_close_holds_approach(self, cp):
        assert self.run(Phase.APPROACH, 5.0, 500, cp) == (Phase.APPROACH, 500)

    def test_too_close_pauses_timer(self, cp):
        _, comfort, _ = phase_transition(Phase.APPROACH, 1.0, 0.0, 5.0, 0.04, cp)
        assert comfort == 1.0
        _, comfort, _ = phase_transition(Phase.APPROACH, 1.0, 0.0, 20.0, 0.04, cp)
        assert comfort == 0.0

    def test_lead_timer_reset(self, cp):
        _, _, apart = phase_transition(Phase.LEAD, 0.0, 0.5, 20.0, 0.04, cp)
        assert apart == 0.0

    def test_milling_untouched(self, cp):
        assert phase_transition(Phase.MILLING, 0.0, 0.0, 1.0, 0.04, cp) == (Phase.MILLING, 0.0, 0.0)


class TestLead(object):
    def test_burst(self, cp, arena):
        assert lead_next_target(Vec2(50, 10), 3, cp, arena) == (Vec2(65, 10), 3)

    def test_corner_itself(self, cp, arena):
        assert lead_next_target(Vec2(80, 10), 3, cp, arena) == (Vec2(90, 10), 3)

    def test_corner_advance(self, cp, arena):
        target, index = lead_next_target(Vec2(88, 10), 3, cp, arena)
        assert index == 0
        assert target == Vec2(73, 10)

    def test_nearest_corner(self, arena):
        assert nearest_corner(Vec2(80, 85), arena) == 2


class TestMilling(object):
    def test_origin_and_period(self, cp, arena):
        start = milling_target(0.0, cp, arena)
        assert start == Vec2(60, 34)
        period = 2 * math.pi * cp.milling_radius / cp.milling_speed
        again = milling_target(period, cp, arena)
        assert again.x == pytest.approx(start.x)
        assert again.y == pytest.approx(start.y)

    def test_inside_arena(self, cp, arena):
        center = arena.door + Vec2(0, cp.milling_offset)
        for t in np.linspace(0, 20, 101):
            p = milling_target(t, cp, arena)
            assert arena.contains(p)
            assert (p - center).norm() == pytest.approx(cp.milling_radius)


class TestModes(object):
    def state(self, mode, **changes):
        state = Controller(Params()).initial_state(mode)
        return state._replace(phase=Phase.APPROACH, **changes)

    def test_make_mode(self):
        assert make_mode('competent') == Competent()
        assert make_mode('fixed', carefulness=0.3) == Fixed(0.3)
        assert make_mode('inverse') == Inverse()
        assert make_mode('random').reference == ReferenceDistribution()
        assert Competent() != Inverse()
        with pytest.raises(InvalidParameterError):
            make_mode('greedy')
        with pytest.raises(InvalidParameterError):
            Fixed(1.5)

    def test_fixed_constant(self, cp):
        state = self.state(Fixed(), scores=ScoreState(1.0, 0.5))
        for event in (TICK, APPROACH_START, TICK):
            state = mode_carefulness(state, event, cp)
            assert state.carefulness == 0.528

    def test_inverse(self, cp):
        state = self.state(Inverse(), scores=ScoreState(1.0, 0.5))
        assert mode_carefulness(state, TICK, cp).carefulness == pytest.approx(0.4625)
        competent = mode_carefulness(self.state(Competent(), scores=ScoreState(1.0, 0.5)), TICK, cp)
        assert competent.carefulness - 0.5 == pytest.approx(0.5 - 0.4625)

    def test_competent_ignores_approach_start(self, cp):
        state = self.state(Competent(), scores=ScoreState(1.0, 0.5))
        assert mode_carefulness(state, APPROACH_START, cp) == state

    def test_deficit_weights(self):
        ref = ReferenceDistribution()
        weights = deficit_weights(ref, (0.0,) * 10, 0.0, 0.04)
        assert weights[-1] == pytest.approx(0.328655 * 0.04)
        spent = (0.0,) * 9 + (10.0,)
        assert deficit_weights(ref, spent, 10.0, 0.04)[-1] == 0.0

    def test_random_samples_bin_center(self, cp):
        state = mode_carefulness(self.state(Random()), APPROACH_START, cp, rng=np.random.default_rng(1))
        assert state.random_bin is not None
        assert state.carefulness == pytest.approx(0.05 + 0.1 * state.random_bin)
        held = mode_carefulness(state, TICK, cp)
        assert held.carefulness == state.carefulness
        assert held.spent[state.random_bin] == pytest.approx(0.04)

    def test_random_fallback_logged(self):
        STATS.reset()
        ref = ReferenceDistribution((0.0,) * 9 + (1.0,))
        index = sample_random_bin(ref, (0.0,) * 9 + (100.0,), 1.0, 0.04, np.random.default_rng(0))
        assert index == 9
        assert STATS.data['random_fallbacks'] == 1

    def test_random_fidelity(self, cp):
        rng = np.random.default_rng(42)
        ref = ReferenceDistribution()
        state = self.state(Random(ref))
        values, weights = [], []
        for _ in range(400):
            state = mode_carefulness(state, APPROACH_START, cp, rng=rng)
            steps = int(rng.integers(25, 250))
            for _ in range(steps):
                state = mode_carefulness(state, TICK, cp)
            values.append(state.carefulness)
            weights.append(steps)
        observed = ReferenceDistribution.from_samples(values, weights)
        assert observed.total_variation(ref) < 0.1

    @pytest.mark.parametrize('length', [lambda b: 25 + 40 * b, lambda b: 400 - 35 * b],
                             ids=['careful_long', 'reckless_long'])
    def test_random_fidelity_uneven_phases(self, cp, length):
        rng = np.random.default_rng(3)
        ref = ReferenceDistribution()
        state = self.state(Random(ref))
        for _ in range(300):
            state = mode_carefulness(state, APPROACH_START, cp, rng=rng)
            for _ in range(length(state.random_bin)):
                state = mode_carefulness(state, TICK, cp)
        assert sum(state.phases) == 300
        observed = np.asarray(state.spent) / state.approach_time
        assert 0.5 * np.abs(observed - np.asarray(ref.frequencies)).sum() < 0.1

    def test_expected_durations(self):
        spent = (0.0,) * 8 + (2.0, 30.0)
        phases = (0,) * 8 + (1, 3)
        durations = expected_durations(spent, phases)
        assert durations[0] == pytest.approx(8.0)
        assert durations[8] == pytest.approx(5.0)
        assert durations[9] == pytest.approx(9.5)
        assert expected_durations((0.0,) * 10, (0,) * 10)[0] == pytest.approx(4.0)
        shaped = expected_durations((0.0,) * 10, (0,) * 10, shape=(1.0,) * 5 + (3.0,) * 5)
        assert shaped[0] == pytest.approx(2.0)
        assert shaped[9] == pytest.approx(6.0)

    def test_careful_bins_expected_longer(self, cp):
        shape = duration_shape(ReferenceDistribution(), cp)
        assert np.all(np.diff(shape) > 0)
        assert shape[-1] * speed_factor(0.95, Phase.APPROACH, cp) == pytest.approx(1.0)


class TestControllerStep(object):
    @pytest.fixture(scope='class')
    def controller(self):
        return Controller(Params())

    def test_milling(self, controller):
        state = controller.initial_state(Competent())
        robot = Pose(Vec2(60, 34), math.pi / 2)
        state, cmd = controller.step(state, Observation(robot, Vec2(50, 9.5), None, None, None), None)
        assert state.phase is Phase.MILLING
        assert cmd.target == Vec2(60, 34)
        assert cmd.speed_factor == pytest.approx(0.32)

    def test_approach_reckless(self, controller):
        rng = np.random.default_rng(0)
        state = controller.activate(controller.initial_state(Fixed(0.0)), rng)
        assert state.phase is Phase.APPROACH
        assert state.approach_index == 1
        obs = Observation(Pose(Vec2(0, 0), 0.0), Vec2(10, 0), None, None, None)
        state, cmd = controller.step(state, obs, rng)
        assert cmd.target.x == pytest.approx(4.0)
        assert cmd.target.y == pytest.approx(0.0, abs=1e-12)
        assert cmd.speed_factor == pytest.approx(1.2)

    def test_deterministic(self, controller):
        state = controller.activate(controller.initial_state(Competent()), np.random.default_rng(0))
        obs = Observation(Pose(Vec2(30, 30), 0.3), Vec2(40, 45), None, Vec2(40.2, 45.1), Vec2(29.8, 30))
        first = controller.step(state, obs, np.random.default_rng(9))
        second = controller.step(state, obs, np.random.default_rng(9))
        assert first == second
        assert isinstance(first[1], MotionCommand)

    def test_lead_entry_and_burst(self, controller):
        rng = np.random.default_rng(0)
        state = controller.activate(controller.initial_state(Competent()), rng)
        robot = Pose(Vec2(50, 60), 0.0)
        fish = Vec2(50, 50)
        for _ in range(50):
            state, cmd = controller.step(state, Observation(robot, fish, None, fish, robot.position), rng)
        assert state.phase is Phase.LEAD
        assert cmd.speed_factor == 0.8717
        assert state.corner_index == nearest_corner(robot.position, controller.arena)
        assert (cmd.target - robot.position).norm() == pytest.approx(15.0)

    def test_lead_never_entered_far(self, controller):
        rng = np.random.default_rng(0)
        state = controller.activate(controller.initial_state(Competent()), rng)
        robot = Pose(Vec2(50, 70), 0.0)
        fish = Vec2(50, 50)
        for _ in range(200):
            state, _ = controller.step(state, Observation(robot, fish, None, fish, robot.position), rng)
            assert state.phase is Phase.APPROACH
