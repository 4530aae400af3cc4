"""
    robolead.fish
    ~~~~~~~~~~~~~~

    Simulated fish closing the control loop: a stochastic guppy that retreats from threats above its
    tolerance and startles more often the faster and more directly the robot closes in, a scripted
    fish and a replay fish.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field, fields, asdict
import numpy as np
from scipy.special import expit
from .errors import InvalidParameterError, TrialEndError
from .model import Vec2, Pose, clamp
from .kinematics import advance_point, reflect_velocity


CALM = 'calm'
STARTLED = 'startled'
FOLLOWING = 'following'
HELD = 'held'

PERSONALITY_FIELDS = ('boldness', 'startle_gain', 'preferred_dist', 'cruise_speed', 'burst_speed',
                      'social_range', 'follow_tendency', 'exit_tendency')

MAX_FISH_SPEED = 40.0


@dataclass(frozen=True)
class GuppyPersonality:
    boldness: float = 0.5
    startle_gain: float = 0.4
    preferred_dist: float = 6.0
    cruise_speed: float = 5.0
    burst_speed: float = 30.0
    social_range: float = 50.0
    follow_tendency: float = 0.5
    exit_tendency: float = 0.1

    def __post_init__(self):
        for name in ('boldness', 'follow_tendency', 'exit_tendency'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidParameterError('{:s} must lie in [0, 1]'.format(name))
        if self.startle_gain < 0:
            raise InvalidParameterError('startle_gain must be nonnegative')
        if not (self.preferred_dist > 0 and self.social_range > 0):
            raise InvalidParameterError('preferred_dist and social_range must be positive')
        if not 0.0 < self.cruise_speed < self.burst_speed <= MAX_FISH_SPEED:
            raise InvalidParameterError('need 0 < cruise_speed < burst_speed <= {:.0f} cm/s, got {} and {}'
                                        .format(MAX_FISH_SPEED, self.cruise_speed, self.burst_speed))


@dataclass(frozen=True)
class FishTuning:
    """Frozen constants of the stochastic guppy, shared by the whole population.

    A robot's threat is its speed times the squared directness of its heading towards the fish.
    Each fish tolerates threats up to tolerance_base + tolerance_boldness * boldness, shrunk by
    exp(-tolerance_fear * fear). Above that the calm fish turns and swims away, faster the further
    the threat exceeds its tolerance.
    """
    decision_interval: float = 0.5
    heading_noise: float = 1.0
    startle_offset: float = 2.0
    boldness_offset: float = 4.0
    fear_gain: float = 1.0
    fear_decay: float = 20.0
    fear_follow: float = 1.0
    startle_duration: float = 1.0
    attraction: float = 1.0
    follow_gain: float = 1.5
    follow_quit: float = 0.1
    tolerance_base: float = 2.0
    tolerance_boldness: float = 10.0
    tolerance_fear: float = 0.3
    exceedance_scale: float = 5.0
    wary_turn: float = 2.0
    wary_boost: float = 1.0
    fear_rate: float = 1.0
    startle_fear: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InvalidParameterError('fish tuning {:s} must be nonnegative'.format(f.name))
        if not (self.decision_interval > 0 and self.fear_decay > 0 and self.startle_duration > 0
                and self.exceedance_scale > 0):
            raise InvalidParameterError('decision_interval, fear_decay, startle_duration and exceedance_scale '
                                        'must be positive')


DEFAULT_PERSONALITY_DISTRIBUTIONS = {
    'boldness': {'dist': 'uniform', 'low': 0.0, 'high': 1.0},
    'startle_gain': {'dist': 'uniform', 'low': 0.3, 'high': 0.5},
    'preferred_dist': {'dist': 'uniform', 'low': 4.0, 'high': 8.0},
    'cruise_speed': {'dist': 'uniform', 'low': 3.0, 'high': 7.0},
    'burst_speed': {'dist': 'uniform', 'low': 25.0, 'high': 35.0},
    'social_range': {'dist': 'uniform', 'low': 40.0, 'high': 60.0},
    'follow_tendency': {'dist': 'uniform', 'low': 0.2, 'high': 0.9},
    'exit_tendency': {'dist': 'uniform', 'low': 0.02, 'high': 0.2},
}


@dataclass(frozen=True)
class Population:
    """Personality distributions per field plus the shared tuning constants"""
    personality: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PERSONALITY_DISTRIBUTIONS.items()})
    tuning: FishTuning = field(default_factory=FishTuning)

    def __post_init__(self):
        unknown = set(self.personality) - set(PERSONALITY_FIELDS)
        if unknown:
            raise InvalidParameterError('unknown personality fields {}'.format(sorted(unknown)))
        merged = {k: dict(v) for k, v in DEFAULT_PERSONALITY_DISTRIBUTIONS.items()}
        merged.update(self.personality)
        for name, spec in merged.items():
            _check_distribution(name, spec)
        object.__setattr__(self, 'personality', merged)

    def to_dict(self):
        return {'personality': {k: dict(self.personality[k]) for k in PERSONALITY_FIELDS},
                'tuning': asdict(self.tuning)}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {'personality', 'tuning', 'version'}
        if unknown:
            raise InvalidParameterError('unknown population sections {}'.format(sorted(unknown)))
        tuning = data.get('tuning', {}) or {}
        known = {f.name for f in fields(FishTuning)}
        if set(tuning) - known:
            raise InvalidParameterError('unknown fish tuning keys {}'.format(sorted(set(tuning) - known)))
        return cls(personality=dict(data.get('personality', {}) or {}),
                   tuning=FishTuning(**{k: float(v) for k, v in tuning.items()}))


def _check_distribution(name, spec):
    dist = spec.get('dist')
    if dist == 'uniform':
        if not ('low' in spec and 'high' in spec and spec['low'] <= spec['high']):
            raise InvalidParameterError('{:s}: uniform needs low <= high'.format(name))
    elif dist == 'constant':
        if 'value' not in spec:
            raise InvalidParameterError('{:s}: constant needs a value'.format(name))
    elif dist == 'normal':
        if not ('mean' in spec and spec.get('sd', -1) >= 0):
            raise InvalidParameterError('{:s}: normal needs mean and sd >= 0'.format(name))
    else:
        raise InvalidParameterError('{:s}: unknown distribution {!r}'.format(name, dist))


def _draw(rng, spec):
    dist = spec['dist']
    if dist == 'uniform':
        return float(rng.uniform(spec['low'], spec['high']))
    if dist == 'constant':
        # keep the stream position independent of the distribution kind
        rng.uniform()
        return float(spec['value'])
    value = float(rng.normal(spec['mean'], spec['sd']))
    return clamp(value, spec.get('low', -math.inf), spec.get('high', math.inf))


def sample_personality(rng, population=None):
    """Draws one personality, fields in a fixed order so a seed always yields the same fish.

    Parameters:
    ----------
    rng : {numpy.random.Generator}
        Personality stream of the trial
    population : {Population}, optional
        Distributions per field (the default is None, the frozen default population)

    Raises
    ------
    InvalidParameterError
        If the draw violates the personality invariants

    Returns
    -------
    GuppyPersonality
        Sampled personality
    """

    population = population or Population()
    values = {name: _draw(rng, population.personality[name]) for name in PERSONALITY_FIELDS}
    return GuppyPersonality(**values)


def startle_probability(closing_speed, directness, personality, tuning=None, fear=0.0):
    """Probability of a startle within one decision interval.

    Logistic in the product of closing speed and directness, shifted by an offset that grows
    without bound as boldness approaches 1, and raised by accumulated fear.
    """

    tuning = tuning or FishTuning()
    b = personality.boldness
    if b >= 1.0:
        return 0.0
    offset = tuning.startle_offset + tuning.boldness_offset * b / (1.0 - b)
    x = personality.startle_gain * closing_speed * directness - offset + tuning.fear_gain * fear
    return float(expit(x))


def threat_exceedance(threat, personality, tuning=None, fear=0.0):
    """How far a threat exceeds the fish's fear-shrunk tolerance, in [0, 1]"""
    tuning = tuning or FishTuning()
    tolerance = ((tuning.tolerance_base + tuning.tolerance_boldness * personality.boldness)
                 * math.exp(-tuning.tolerance_fear * fear))
    return clamp((threat - tolerance) / tuning.exceedance_scale, 0.0, 1.0)


FishState = namedtuple('FishState', ['pose', 'mode', 'timer', 'speed', 'fear', 'clock', 'tick', 'in_box',
                                     'exiting'],
                       defaults=(CALM, 0.0, 0.0, 0.0, 0.0, 0, True, False))

FishWorld = namedtuple('FishWorld', ['robot', 'robot_speed', 'robot_phase'])


def _social_terms(pos, world):
    """Distance, closing speed and directness of the robot towards the fish"""
    robot = world.robot
    dx = pos.x - robot.position.x
    dy = pos.y - robot.position.y
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return dist, world.robot_speed, 1.0
    cosine = (math.cos(robot.heading) * dx + math.sin(robot.heading) * dy) / dist
    directness = max(cosine, 0.0)
    return dist, world.robot_speed * directness, directness


def stochastic_guppy_step(state, world, personality, dt, rng, arena, tuning=None):
    """Advances the stochastic guppy by one step.

    Inside the startbox the fish idles until it decides to head for the door. Outside, every
    decision interval it may startle (burst away from the robot for an exponential time, adding
    fear), start following a leading robot or stop following. A calm fish facing a threat above its
    tolerance turns away and speeds up while fear builds. Otherwise it cruises with heading noise
    and a pull towards a robot farther than the preferred distance, weaker the more afraid it is.
    Fish reflect at the walls.

    Parameters:
    ----------
    state : {FishState}
        Current state
    world : {FishWorld}
        Robot pose, forward speed and phase code
    personality : {GuppyPersonality}
        Personality of this fish
    dt : {float}
        Time step in s
    rng : {numpy.random.Generator}
        Fish stream of the trial
    arena : {ArenaSpec}
        Arena geometry
    tuning : {FishTuning}, optional
        Shared constants (the default is None, the frozen defaults)

    Returns
    -------
    FishState
        New state
    """

    tuning = tuning or FishTuning()
    p = personality
    pos = state.pose.position
    heading = state.pose.heading
    fear = state.fear * math.exp(-dt / tuning.fear_decay)
    clock = state.clock - dt
    decide = clock <= 0.0
    if decide:
        clock += tuning.decision_interval
    noise = rng.normal()
    u_event, u_follow = (rng.random(), rng.random()) if decide else (1.0, 1.0)

    if state.in_box:
        exiting = state.exiting or (decide and u_event < p.exit_tendency)
        if exiting:
            goal = arena.door + Vec2(0.0, 2.0 * arena.startbox_door_width)
            heading = (goal - pos).angle() if (goal - pos).norm() > 0 else math.pi / 2.0
            speed = p.cruise_speed
        else:
            heading += tuning.heading_noise * math.sqrt(dt) * noise
            speed = 0.3 * p.cruise_speed
        new = pos + Vec2.polar(speed * dt, heading)
        in_box = new.y <= arena.startbox_side or not exiting
        if not exiting:
            new = arena.clamp_startbox(new)
        return state._replace(pose=Pose(new, heading), speed=speed, fear=fear, clock=clock,
                              tick=state.tick + 1, in_box=in_box, exiting=exiting and in_box)

    mode, timer = state.mode, state.timer
    dist, closing, directness = _social_terms(pos, world)
    near = dist <= p.social_range
    leading = world.robot_phase == 'L'
    wary = threat_exceedance(closing * directness, p, tuning, fear) if near and mode != HELD else 0.0
    fear += tuning.fear_rate * wary * dt

    if mode == STARTLED:
        timer -= dt
        if timer <= 0.0:
            mode, timer = CALM, 0.0
    elif decide and mode != HELD:
        if near and u_event < startle_probability(closing, directness, p, tuning, fear):
            mode = STARTLED
            timer = float(rng.exponential(tuning.startle_duration))
            fear += tuning.startle_fear
        elif mode == FOLLOWING:
            if not leading or not near or wary > 0.0 or u_follow < tuning.follow_quit:
                mode = CALM
        elif leading and near and u_follow < p.follow_tendency * math.exp(-tuning.fear_follow * fear):
            mode = FOLLOWING

    to_robot = world.robot.position - pos
    if mode == HELD:
        speed = 0.0
    elif mode == STARTLED:
        heading = (-to_robot).angle() if dist > 0 else heading
        speed = p.burst_speed
    elif mode == FOLLOWING and dist > 0:
        heading = to_robot.angle()
        speed = clamp(tuning.follow_gain * (dist - p.preferred_dist), 0.5 * p.cruise_speed, p.burst_speed)
    else:
        heading += tuning.heading_noise * math.sqrt(dt) * noise
        if wary > 0.0 and dist > 0:
            blended = Vec2.polar(1.0, heading) - to_robot.unit() * (tuning.wary_turn * wary)
            if blended.norm() > 0:
                heading = blended.angle()
        elif near and dist > p.preferred_dist:
            pull = (tuning.attraction * p.follow_tendency * math.exp(-tuning.fear_follow * fear)
                    * min(1.0, (dist - p.preferred_dist) / p.social_range))
            blended = Vec2.polar(1.0, heading) + to_robot.unit() * pull
            if blended.norm() > 0:
                heading = blended.angle()
        speed = min(p.cruise_speed * (1.0 + tuning.wary_boost * wary), p.burst_speed)

    velocity = Vec2.polar(speed, heading)
    new = advance_point(pos, velocity, dt, arena)
    if new != pos + velocity * dt:
        velocity = reflect_velocity(new, velocity, arena)
        heading = velocity.angle()
    return state._replace(pose=Pose(new, heading), mode=mode, timer=timer, speed=speed, fear=fear,
                          clock=clock, tick=state.tick + 1)


ReplayTrack = namedtuple('ReplayTrack', ['xy', 'rate'])


def _heading_at(xy, j):
    n = len(xy)
    a, b = (j, j + 1) if j + 1 < n else (j - 1, j)
    if a < 0:
        return 0.0
    dx, dy = xy[b] - xy[a]
    return math.atan2(dy, dx) if (dx or dy) else 0.0


def replay_fish_step(track, index, rate=25.0):
    """Recorded fish pose at a simulation step.

    Tracks recorded at an integer multiple of the simulation rate are decimated, other rates are
    linearly interpolated.

    Parameters:
    ----------
    track : {ReplayTrack}
        Positions of shape (n, 2) and their sampling rate in Hz
    index : {int}
        Simulation step
    rate : {float}, optional
        Simulation rate in Hz (the default is 25)

    Raises
    ------
    TrialEndError
        If the step lies beyond the recording

    Returns
    -------
    Pose
        Recorded pose, heading from the local displacement
    """

    xy = np.asarray(track.xy, dtype=float)
    n = len(xy)
    ratio = track.rate / rate
    if float(ratio).is_integer():
        j = int(index * int(ratio))
        if j >= n:
            raise TrialEndError('step {:d} past recording of {:d} samples'.format(index, n))
        return Pose(Vec2(xy[j, 0], xy[j, 1]), _heading_at(xy, j))
    s = index * ratio
    if s > n - 1:
        raise TrialEndError('step {:d} past recording of {:d} samples'.format(index, n))
    grid = np.arange(n)
    x = float(np.interp(s, grid, xy[:, 0]))
    y = float(np.interp(s, grid, xy[:, 1]))
    return Pose(Vec2(x, y), _heading_at(xy, int(s)))


class FishModel(object):
    """Interface of the fish behind the loop"""
    name = 'fish'

    def reset(self, rng, arena):
        raise NotImplementedError

    def step(self, state, world, dt, rng, arena):
        raise NotImplementedError

    def force_release(self, state, arena, margin):
        """Places the fish just beyond the startbox door, heading into the arena"""
        spot = arena.door + Vec2(0.0, margin + 1.0)
        return state._replace(pose=Pose(spot, math.pi / 2.0), in_box=False, exiting=False)

    def describe(self):
        return {'model': self.name}


class StochasticGuppy(FishModel):
    name = 'guppy'

    def __init__(self, personality, tuning=None):
        self.personality = personality
        self.tuning = tuning or FishTuning()

    def reset(self, rng, arena):
        start = arena.startbox_center()
        return FishState(pose=Pose(start, math.pi / 2.0), clock=self.tuning.decision_interval)

    def step(self, state, world, dt, rng, arena):
        return stochastic_guppy_step(state, world, self.personality, dt, rng, arena, self.tuning)

    def describe(self):
        return {'model': self.name, 'personality': asdict(self.personality)}


class ScriptedFish(FishModel):
    """Fish following a fixed path, a function of time in s returning a Vec2.

    After a forced release the fish holds its place.
    """
    name = 'scripted'

    def __init__(self, path):
        self.path = path

    def reset(self, rng, arena):
        return FishState(pose=Pose(self.path(0.0), math.pi / 2.0), in_box=False)

    def step(self, state, world, dt, rng, arena):
        if state.mode == HELD:
            return state._replace(speed=0.0, tick=state.tick + 1)
        tick = state.tick + 1
        pos = self.path(tick * dt)
        delta = pos - state.pose.position
        heading = delta.angle() if delta.norm() > 0 else state.pose.heading
        return state._replace(pose=Pose(pos, heading), speed=delta.norm() / dt, tick=tick)

    def force_release(self, state, arena, margin):
        return super(ScriptedFish, self).force_release(state, arena, margin)._replace(mode=HELD)


class ReplayFish(FishModel):
    name = 'replay'

    def __init__(self, track, rate=25.0):
        self.track = track
        self.rate = rate

    def reset(self, rng, arena):
        return FishState(pose=replay_fish_step(self.track, 0, self.rate), in_box=False)

    def step(self, state, world, dt, rng, arena):
        if state.mode == HELD:
            return state._replace(speed=0.0, tick=state.tick + 1)
        tick = state.tick + 1
        pose = replay_fish_step(self.track, tick, self.rate)
        speed = (pose.position - state.pose.position).norm() / dt
        return state._replace(pose=pose, speed=speed, tick=tick)

    def force_release(self, state, arena, margin):
        return super(ReplayFish, self).force_release(state, arena, margin)._replace(mode=HELD)

    def describe(self):
        return {'model': self.name, 'rate': self.track.rate, 'samples': len(self.track.xy)}
