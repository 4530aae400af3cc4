"""
    robolead.controller
    ~~~~~~~~~~~~~~

    Behavior policy of the robot: milling, approach and lead phases, carefulness dynamics,
    approach-target geometry, speed scaling and the four treatment modes.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
import logging
from collections import namedtuple
from dataclasses import dataclass, field
from typing import ClassVar
from enum import Enum
import numpy as np
from .errors import DegenerateGeometryError, InvalidParameterError
from .model import Vec2, Pose, clamp, rotate
from .params import ReferenceDistribution, N_BINS
from .metrics import (ScoreState, approach_distance, avoidance_event, follow_event,
                      update_avoidance_score, update_follow_score)
from .utils import STATS


LAWS = ('integrator', 'leaky')
MODES = ('competent', 'fixed', 'random', 'inverse')
FIXED_CAREFULNESS = 0.528
DEFAULT_PHASE_DURATION = 4.0

TICK = 'tick'
APPROACH_START = 'approach_start'


class Phase(Enum):
    MILLING = 'M'
    APPROACH = 'A'
    LEAD = 'L'


@dataclass(frozen=True)
class Competent:
    name: ClassVar[str] = 'competent'

@dataclass(frozen=True)
class Fixed:
    carefulness: float = FIXED_CAREFULNESS
    name: ClassVar[str] = 'fixed'

    def __post_init__(self):
        if not 0.0 <= self.carefulness <= 1.0:
            raise InvalidParameterError('fixed carefulness must lie in [0, 1], got {}'.format(self.carefulness))

@dataclass(frozen=True)
class Random:
    reference: ReferenceDistribution = field(default_factory=ReferenceDistribution)
    name: ClassVar[str] = 'random'

@dataclass(frozen=True)
class Inverse:
    name: ClassVar[str] = 'inverse'


def make_mode(name, reference=None, carefulness=FIXED_CAREFULNESS):
    """Mode instance from its command line name"""
    if name == 'competent':
        return Competent()
    if name == 'fixed':
        return Fixed(carefulness)
    if name == 'random':
        return Random(reference) if reference is not None else Random()
    if name == 'inverse':
        return Inverse()
    raise InvalidParameterError('unknown mode {!r}, choose from {}'.format(name, ', '.join(MODES)))


MotionCommand = namedtuple('MotionCommand', ['target', 'speed_factor'])

# fish_heading, fish_prev and robot_prev may be None
Observation = namedtuple('Observation', ['robot', 'fish', 'fish_heading', 'fish_prev', 'robot_prev'])

# spent and phases hold the approach time and the number of approach phases per reference bin
ControllerState = namedtuple('ControllerState', [
    'phase', 'carefulness', 'scores', 'mode', 'comfort_timer', 'apart_timer', 'corner_index',
    'approach_index', 'side', 'fish_heading', 'target', 'lead_target', 'milling_time', 'approach_time',
    'spent', 'phases', 'random_bin'],
    defaults=(0.0, 0.0, 0, 0, 1, None, None, None, 0.0, 0.0, (0.0,) * N_BINS, (0,) * N_BINS, None))


def update_carefulness(prev, avoidance, params, law='integrator', dt=0.04, sign=1):
    """One carefulness update from the current avoidance score.

    Parameters:
    ----------
    prev : {float}
        Previous carefulness in [0, 1]
    avoidance : {float}
        Current avoidance score in [0, 1]
    params : {ControllerParams}
        Provides eta and b_e
    law : {str}, optional
        'integrator' adds the drive term to the previous value, 'leaky' decays the previous value
        by (1 - eta) and scales the drive by dt (the default is 'integrator')
    dt : {float}, optional
        Time step in s, only used by the leaky law (the default is 0.04)
    sign : {int}, optional
        -1 flips the drive term (inverse mode) (the default is 1)

    Returns
    -------
    float
        New carefulness clamped to [0, 1]
    """

    drive = sign * params.eta * (avoidance - params.b_e)
    if law == 'integrator':
        value = prev + drive
    elif law == 'leaky':
        value = (1.0 - params.eta) * prev + drive * dt
    else:
        raise InvalidParameterError('unknown carefulness law {!r}'.format(law))
    return clamp(value, 0.0, 1.0)


def _position(p):
    return p.position if isinstance(p, Pose) else p


def side_indicator(fish, robot, previous=1):
    """+1 if the robot is left of the fish's heading, -1 if right, previous value on the line.

    Cross products within rounding noise of zero count as on the line.
    """
    offset = _position(robot) - fish.position
    cross = fish.direction().cross(offset)
    if abs(cross) <= 1e-9 * max(1.0, offset.norm()):
        return previous
    return 1 if cross > 0 else -1


def approach_target(robot, fish, carefulness, params, arena=None, side=None):
    """Target of the approach phase.

    A point approach_offset cm from the fish towards the robot is rotated about the robot by
    carefulness * 90 degrees, towards the fish's movement direction.

    Parameters:
    ----------
    robot : {Pose or Vec2}
        Robot pose or position
    fish : {Pose or Vec2}
        Fish pose or position
    carefulness : {float}
        Carefulness in [0, 1]
    params : {ControllerParams}
        Provides approach_offset
    arena : {ArenaSpec}, optional
        Arena to clamp the target into (the default is None, no clamping)
    side : {int}, optional
        Side indicator, computed from the fish pose if omitted (the default is None)

    Raises
    ------
    DegenerateGeometryError
        If robot and fish positions coincide

    Returns
    -------
    Vec2
        Approach target
    """

    r = _position(robot)
    f = _position(fish)
    if side is None:
        side = side_indicator(fish, r) if isinstance(fish, Pose) else 1
    g = f + (r - f).unit() * params.approach_offset
    target = rotate(g - r, carefulness * math.pi / 2.0 * side) + r
    return arena.clamp(target) if arena is not None else target


def speed_factor(carefulness, phase, params):
    if phase is Phase.APPROACH:
        return 1.0 - carefulness + params.base_speed_s_c
    if phase is Phase.LEAD:
        return params.lead_speed_factor
    return params.milling_speed / params.speed_unit


def phase_transition(phase, comfort_timer, apart_timer, fish_dist, dt, params):
    """Advances the approach/lead state machine by one step.

    In approach, time spent between d_close and d_comf accumulates, closer distances pause the
    timer and larger ones reset it; after comfort_dwell the robot leads. In lead, a fish farther than
    lead_follow_dist for lead_tolerance seconds sends the robot back to approach.

    Returns
    -------
    (Phase, float, float)
        New phase, comfort timer and apart timer
    """

    if phase is Phase.APPROACH:
        if params.d_close <= fish_dist <= params.d_comf:
            comfort_timer += dt
            if comfort_timer >= params.comfort_dwell - 1e-9:
                return Phase.LEAD, 0.0, 0.0
        elif fish_dist > params.d_comf:
            comfort_timer = 0.0
        return phase, comfort_timer, 0.0

    if phase is Phase.LEAD:
        if fish_dist > params.lead_follow_dist:
            apart_timer += dt
            if apart_timer >= params.lead_tolerance - 1e-9:
                return Phase.APPROACH, 0.0, 0.0
        else:
            apart_timer = 0.0
        return phase, 0.0, apart_timer

    return phase, comfort_timer, apart_timer


def nearest_corner(robot, arena):
    corners = arena.corners()
    return min(range(len(corners)), key=lambda i: (corners[i] - robot).norm())


def lead_next_target(robot, corner_index, params, arena):
    """Next burst target of the lead phase.

    Returns
    -------
    (Vec2, int)
        Target, either the current corner or a point lead_burst cm towards it, and the corner
        index, advanced clockwise when the robot reached the current corner
    """

    corners = arena.corners()
    corner = corners[corner_index]
    if (corner - robot).norm() <= params.corner_arrival:
        corner_index = (corner_index + 1) % len(corners)
        corner = corners[corner_index]
    to_corner = corner - robot
    if to_corner.norm() <= params.lead_burst:
        return corner, corner_index
    return robot + to_corner.unit() * params.lead_burst, corner_index


def milling_target(t, params, arena):
    """Point on the milling circle in front of the startbox door at time t"""
    radius = params.milling_radius
    center = arena.door + Vec2(0.0, params.milling_offset)
    omega = params.milling_speed / radius
    return arena.clamp(center + Vec2.polar(radius, omega * t))


def deficit_weights(reference, spent, approach_time, dt):
    """Time deficit per bin of the random mode: reference share of the time so far minus time spent"""
    ref = np.asarray(reference.frequencies)
    return np.maximum(0.0, ref * (approach_time + dt) - np.asarray(spent))


def duration_shape(reference, params):
    """Relative approach phase length per bin, inverse to the approach speed at the bin center"""
    return np.array([1.0 / speed_factor(c, Phase.APPROACH, params) for c in reference.bin_centers])


def expected_durations(spent, phases, shape=None, prior=DEFAULT_PHASE_DURATION):
    """Mean approach phase length per bin.

    Each bin's observed mean is shrunk by one phase towards shape times a common scale. The scale
    is fitted to all phases run so far, or set so the shape averages to prior before any phase.
    """
    spent = np.asarray(spent, dtype=float)
    phases = np.asarray(phases, dtype=float)
    shape = np.ones(len(spent)) if shape is None else np.asarray(shape, dtype=float)
    expected = (phases * shape).sum()
    scale = spent.sum() / expected if expected > 0 else prior / shape.mean()
    return (spent + np.maximum(scale * shape, 1e-3)) / (phases + 1.0)


def sample_random_bin(reference, spent, approach_time, dt, rng, phases=None, shape=None):
    """Bin of the next random-mode approach phase.

    Each bin is drawn in proportion to its time deficit divided by the length its approach phases
    usually take, so that the expected time added to a bin follows its deficit. Without any deficit
    left the reference itself is used the same way.

    Parameters:
    ----------
    reference : {ReferenceDistribution}
        Target distribution
    spent : {sequence of float}
        Approach time charged to each bin so far
    approach_time : {float}
        Total approach time so far
    dt : {float}
        Time step in s
    rng : {numpy.random.Generator}
        Controller random stream
    phases : {sequence of int}, optional
        Approach phases run with each bin so far (the default is None, no phases yet)
    shape : {sequence of float}, optional
        Relative phase length per bin before any phase was seen (the default is None, equal lengths)

    Returns
    -------
    int
        Bin index
    """

    logger = logging.getLogger(__name__)
    durations = expected_durations(spent, phases if phases is not None else (0,) * N_BINS, shape)
    weights = deficit_weights(reference, spent, approach_time, dt) / durations
    total = weights.sum()
    if not total > 0.0:
        logger.warning('Random mode deficit depleted, sampling from the reference distribution...')
        STATS.add('random_fallbacks')
        weights = np.asarray(reference.frequencies) / durations
        total = weights.sum()
    return int(rng.choice(N_BINS, p=weights / total))


def mode_carefulness(state, event, params, dt=0.04, rng=None, law='integrator'):
    """Carefulness of the next step according to the treatment mode.

    Competent and inverse modes integrate the avoidance score on every tick, the inverse mode with
    a flipped drive. The fixed mode is constant. The random mode samples a bin at every approach
    start, emits its center and charges approach time to it.

    Parameters:
    ----------
    state : {ControllerState}
        State holding the current carefulness, scores and mode
    event : {str}
        TICK or APPROACH_START
    params : {ControllerParams}
        Controller parameters
    dt : {float}, optional
        Time step in s (the default is 0.04)
    rng : {numpy.random.Generator}, optional
        Random stream, needed by the random mode at approach start (the default is None)
    law : {str}, optional
        Carefulness update law (the default is 'integrator')

    Returns
    -------
    ControllerState
        State with the new carefulness (and random mode bookkeeping)
    """

    mode = state.mode
    if isinstance(mode, Fixed):
        if state.carefulness == mode.carefulness:
            return state
        return state._replace(carefulness=mode.carefulness)

    if isinstance(mode, Random):
        if event == APPROACH_START:
            index = sample_random_bin(mode.reference, state.spent, state.approach_time, dt, rng, state.phases,
                                      duration_shape(mode.reference, params))
            phases = list(state.phases)
            phases[index] += 1
            return state._replace(random_bin=index, phases=tuple(phases),
                                  carefulness=float(mode.reference.bin_centers[index]))
        if state.phase is Phase.APPROACH and state.random_bin is not None:
            spent = list(state.spent)
            spent[state.random_bin] += dt
            return state._replace(spent=tuple(spent), approach_time=state.approach_time + dt)
        return state

    if event == APPROACH_START:
        return state
    sign = -1 if isinstance(mode, Inverse) else 1
    return state._replace(carefulness=update_carefulness(state.carefulness, state.scores.avoidance,
                                                         params, law=law, dt=dt, sign=sign))


class Controller(object):
    """Stepper for ControllerState, bound to one parameter set and update law.

    Parameters:
    ----------
    params : {Params}
        Full parameter set
    law : {str}, optional
        Carefulness update law (the default is 'integrator')
    """

    def __init__(self, params, law='integrator'):
        if law not in LAWS:
            raise InvalidParameterError('unknown carefulness law {!r}'.format(law))
        self.params = params
        self.cparams = params.controller
        self.arena = params.arena
        self.dt = params.timebase.dt
        self.law = law
        self.milling_factor = speed_factor(0.0, Phase.MILLING, self.cparams)

    def initial_state(self, mode):
        carefulness = mode.carefulness if isinstance(mode, Fixed) else self.cparams.carefulness_init
        return ControllerState(phase=Phase.MILLING, carefulness=carefulness,
                               scores=ScoreState(0.5, self.params.follow.follow_init), mode=mode)

    def activate(self, state, rng):
        """Milling to approach on the fish's release, scores and carefulness start afresh"""
        state = state._replace(phase=Phase.APPROACH, approach_index=1, comfort_timer=0.0, apart_timer=0.0,
                               scores=ScoreState(0.5, self.params.follow.follow_init), lead_target=None,
                               carefulness=self.initial_state(state.mode).carefulness)
        return mode_carefulness(state, APPROACH_START, self.cparams, self.dt, rng, self.law)

    def step(self, state, obs, rng):
        """One control step.

        Parameters:
        ----------
        state : {ControllerState}
            Current state
        obs : {Observation}
            Robot pose, fish position, optional fish heading and previous positions
        rng : {numpy.random.Generator}
            Controller random stream

        Returns
        -------
        (ControllerState, MotionCommand)
            New state and the motion command for this step
        """

        cp = self.cparams
        dt = self.dt
        robot = obs.robot.position

        if state.phase is Phase.MILLING:
            t = state.milling_time
            return (state._replace(milling_time=t + dt),
                    MotionCommand(milling_target(t, cp, self.arena), self.milling_factor))

        fish = obs.fish
        heading = state.fish_heading
        if obs.fish_heading is not None:
            heading = obs.fish_heading
        elif obs.fish_prev is not None and (fish.x != obs.fish_prev.x or fish.y != obs.fish_prev.y):
            heading = math.atan2(fish.y - obs.fish_prev.y, fish.x - obs.fish_prev.x)

        d_t = 0.0
        if obs.fish_prev is not None and obs.robot_prev is not None:
            try:
                d_t = approach_distance(obs.robot_prev, obs.fish_prev, fish, dt)
            except DegenerateGeometryError:
                d_t = 0.0
        dist = math.hypot(robot.x - fish.x, robot.y - fish.y)
        in_zone = dist <= cp.d_I
        scores = ScoreState(
            update_avoidance_score(state.scores.avoidance, avoidance_event(d_t, cp), in_zone, cp),
            update_follow_score(state.scores.follow, follow_event(d_t, cp), in_zone, self.params.follow))
        state = mode_carefulness(state._replace(scores=scores, fish_heading=heading), TICK, cp, dt, rng,
                                 self.law)

        phase, comfort, apart = phase_transition(state.phase, state.comfort_timer, state.apart_timer,
                                                 dist, dt, cp)
        if phase is not state.phase:
            if phase is Phase.LEAD:
                state = state._replace(phase=phase, corner_index=nearest_corner(robot, self.arena),
                                       lead_target=None)
            else:
                state = mode_carefulness(state._replace(phase=phase, approach_index=state.approach_index + 1),
                                         APPROACH_START, cp, dt, rng, self.law)

        if state.phase is Phase.APPROACH:
            side = state.side
            if heading is not None:
                side = side_indicator(Pose(fish, heading), robot, state.side)
            try:
                target = approach_target(robot, fish, state.carefulness, cp, self.arena, side)
            except DegenerateGeometryError:
                target = state.target if state.target is not None else robot
            state = state._replace(comfort_timer=comfort, apart_timer=apart, side=side, target=target)
        else:
            lead_target = state.lead_target
            corner_index = state.corner_index
            if lead_target is None or ((lead_target - robot).norm() <= cp.burst_arrival
                                       and dist <= cp.lead_follow_dist):
                lead_target, corner_index = lead_next_target(robot, corner_index, cp, self.arena)
            state = state._replace(comfort_timer=comfort, apart_timer=apart, lead_target=lead_target,
                                   corner_index=corner_index, target=lead_target)

        return state, MotionCommand(state.target, speed_factor(state.carefulness, state.phase, cp))
