"""
    robolead.engine
    ~~~~~~~~~~~~~~

    Closed-loop trials, pretrials and experiments.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import os
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from .errors import InvalidParameterError, TrialEndError, UnknownExperimentError
from .model import Pose
from .params import Params, ReferenceDistribution
from .controller import (Controller, Observation, Phase, Competent, Fixed, Random, Inverse, LAWS,
                         make_mode, milling_target, speed_factor)
from .kinematics import advance_robot
from .fish import (FishModel, FishWorld, Population, ReplayFish, ReplayTrack, StochasticGuppy,
                   sample_personality)
from .metrics import trial_summary
from .records import (ARTIFACT_VERSION, ExperimentDataset, TrialRecord, make_row, read_track,
                      write_dataset, write_record)
from .utils import STATS, params_hash
from . import __version__


MAX_SEED = 2 ** 64 - 1
QUOTED_FIXED_SPEED = 19.0


def trial_streams(seed):
    """Splits a root seed into independent controller, fish and personality streams"""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def child_seeds(seed, n):
    """n 63-bit seeds derived from a root seed, stable for any n"""
    return [int(c.generate_state(1, dtype=np.uint64)[0]) >> 1 for c in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class TrialConfig:
    mode: object
    seed: int
    fish: object = 'guppy'
    duration: float = 600.0
    params: Params = field(default_factory=Params)
    law: str = 'integrator'
    exit_timeout: float = 180.0
    release_margin: float = 3.0
    population: Population = None

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidParameterError('duration must be positive, got {}'.format(self.duration))
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed <= MAX_SEED):
            raise InvalidParameterError('seed must be a 64-bit unsigned integer, got {!r}'.format(self.seed))
        if self.law not in LAWS:
            raise InvalidParameterError('unknown carefulness law {!r}'.format(self.law))
        if self.exit_timeout < 0 or self.release_margin < 0:
            raise InvalidParameterError('exit_timeout and release_margin must be nonnegative')
        if not (isinstance(self.fish, FishModel) or self.fish == 'guppy'
                or (isinstance(self.fish, str) and self.fish.startswith('replay:'))):
            raise InvalidParameterError('unknown fish model {!r}'.format(self.fish))

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return TrialConfig(**values)


def mode_manifest(mode):
    out = {'name': mode.name}
    if isinstance(mode, Fixed):
        out['carefulness'] = mode.carefulness
    elif isinstance(mode, Random):
        out['reference'] = list(mode.reference.frequencies)
    return out


def mode_from_manifest(data):
    if data['name'] == 'random' and data.get('reference') is not None:
        return Random(ReferenceDistribution(tuple(data['reference'])))
    return make_mode(data['name'], carefulness=data.get('carefulness', 0.528))


class ControlSession(object):
    """Controller state machine plus release detection and the previous-frame memory.

    One session drives one trial, in process or behind one bridge connection. Each observation of
    robot pose and fish position yields exactly one motion command.

    Parameters:
    ----------
    params : {Params}
        Parameter set
    mode : {object}
        Treatment mode
    rng : {numpy.random.Generator}
        Controller stream
    law : {str}, optional
        Carefulness update law (the default is 'integrator')
    release_margin : {float}, optional
        Distance in cm past the door that counts as leaving the startbox (the default is 3)
    exit_timeout : {float}, optional
        Milling time in s after which the controller activates regardless (the default is 180)
    """

    def __init__(self, params, mode, rng, law='integrator', release_margin=3.0, exit_timeout=180.0):
        self.params = params
        self.controller = Controller(params, law)
        self.rng = rng
        self.release_margin = release_margin
        self.timeout_steps = params.timebase.steps(exit_timeout)
        self.state = self.controller.initial_state(mode)
        self.milling_steps = 0
        self.forced = False
        self.prev_robot = None
        self.prev_fish = None

    @property
    def released(self):
        return self.state.phase is not Phase.MILLING

    @property
    def phase(self):
        return self.state.phase.value

    @property
    def carefulness(self):
        return self.state.carefulness

    @property
    def avoidance(self):
        return self.state.scores.avoidance

    @property
    def follow(self):
        return self.state.scores.follow

    @property
    def approach_index(self):
        return self.state.approach_index

    def observe(self, robot, fish, fish_heading=None):
        """Advances the controller with one frame and returns the MotionCommand"""
        if not self.released:
            outside = not self.params.arena.in_startbox(fish, self.release_margin)
            if outside or self.milling_steps >= self.timeout_steps:
                self.forced = not outside
                self.state = self.controller.activate(self.state, self.rng)
            else:
                self.milling_steps += 1
        obs = Observation(robot, fish, fish_heading, self.prev_fish, self.prev_robot)
        self.state, cmd = self.controller.step(self.state, obs, self.rng)
        self.prev_robot = robot.position
        self.prev_fish = fish
        return cmd


def build_fish(config, rng):
    """Fish model of a trial config, personalities drawn from the personality stream"""
    if isinstance(config.fish, FishModel):
        return config.fish
    if config.fish == 'guppy':
        population = config.population or Population()
        return StochasticGuppy(sample_personality(rng, population), population.tuning)
    track = read_track(config.fish.split(':', 1)[1])
    return ReplayFish(ReplayTrack(track.fish_xy, track.rate), config.params.timebase.rate)


def run_trial(config, session=None):
    """Runs one closed-loop trial.

    The fish starts in the startbox while the robot mills in front of the door. Once the fish is
    release_margin past the door (or the exit timeout forced it out) the controller activates and
    the loop runs for duration seconds.

    Parameters:
    ----------
    config : {TrialConfig}
        Trial configuration
    session : {ControlSession}, optional
        Session to drive the robot, e.g. a bridge client (the default is None, a local session)

    Returns
    -------
    TrialRecord
        Milling rows followed by duration * rate post-release rows
    """

    logger = logging.getLogger(__name__)

    params = config.params
    arena = params.arena
    timebase = params.timebase
    dt = timebase.dt
    crng, frng, prng = trial_streams(config.seed)
    fish_model = build_fish(config, prng)
    if session is None:
        session = ControlSession(params, config.mode, crng, config.law, config.release_margin,
                                 config.exit_timeout)
    timeout_steps = timebase.steps(config.exit_timeout)
    post_steps = timebase.steps(config.duration)
    cp = params.controller

    robot = Pose(milling_target(0.0, cp, arena), math.pi / 2.0)
    robot_speed = 0.0
    fish = fish_model.reset(frng, arena)

    logger.log(8, 'Running trial seed={:d} mode={:s}...'.format(config.seed, config.mode.name))
    rows = []
    release_step = None
    forced = False
    step = 0
    while True:
        if not session.released and session.milling_steps >= timeout_steps:
            logger.warning('Fish did not leave the startbox within {:.0f} s, forcing release...'
                           .format(config.exit_timeout))
            STATS.add('forced_releases')
            fish = fish_model.force_release(fish, arena, config.release_margin)
            forced = True
        cmd = session.observe(robot, fish.pose.position)
        if release_step is None and session.released:
            release_step = step
        rows.append(make_row(step, step * dt, fish.pose.position, robot.position, session.phase,
                             session.carefulness, session.avoidance, session.follow, robot_speed,
                             fish.speed, session.approach_index))
        step += 1
        if release_step is not None and step - release_step >= post_steps:
            break
        world = FishWorld(robot, robot_speed, session.phase)
        robot, robot_speed = advance_robot(robot, robot_speed, cmd, dt, params.motion, arena,
                                           cp.speed_unit, cp.max_speed)
        try:
            fish = fish_model.step(fish, world, dt, frng, arena)
        except TrialEndError as err:
            logger.warning('Replay ended early after {:d} steps: {}...'.format(step, err))
            break

    STATS.add('trials')
    STATS.add('steps', len(rows))
    manifest = {
        'artifact_version': ARTIFACT_VERSION,
        'version': __version__,
        'seed': int(config.seed),
        'mode': mode_manifest(config.mode),
        'law': config.law,
        'fish': fish_model.describe(),
        'duration': config.duration,
        'rate': timebase.rate,
        'exit_timeout': config.exit_timeout,
        'release_margin': config.release_margin,
        'params': params.to_dict(),
        'params_hash': params_hash(params),
        'release_step': release_step if release_step is not None else len(rows),
        'forced_release': forced,
    }
    if config.fish == 'guppy':
        manifest['population'] = (config.population or Population()).to_dict()
    elif isinstance(config.fish, str):
        manifest['fish']['source'] = config.fish
    return TrialRecord(rows, manifest)


def config_from_manifest(manifest):
    """TrialConfig that reproduces the trial a manifest describes"""
    population = manifest.get('population')
    fish = manifest.get('fish', {})
    return TrialConfig(mode=mode_from_manifest(manifest['mode']), seed=int(manifest['seed']),
                       fish=fish.get('source', 'guppy'), duration=float(manifest['duration']),
                       params=Params.from_dict(manifest['params']), law=manifest.get('law', 'integrator'),
                       exit_timeout=float(manifest.get('exit_timeout', 180.0)),
                       release_margin=float(manifest.get('release_margin', 3.0)),
                       population=Population.from_dict(population) if population else None)


def _carefulness_samples(config):
    record = run_trial(config)
    return [row.carefulness for row in record.post_release()]


def _map(function, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(function, items))
    return [function(item) for item in items]


def run_pretrials(n, template, jobs=1):
    """Competent-mode trials whose pooled carefulness values form a reference distribution.

    Parameters:
    ----------
    n : {int}
        Number of pretrials, at least 1
    template : {TrialConfig}
        Config whose seed is split into one seed per pretrial
    jobs : {int}, optional
        Worker processes (the default is 1)

    Returns
    -------
    ReferenceDistribution
        Normalized 10-bin histogram of all post-release carefulness values
    """

    logger = logging.getLogger(__name__)
    if n < 1:
        raise InvalidParameterError('need at least one pretrial, got {:d}'.format(n))
    logger.info('Running {:d} pretrials...'.format(n))
    configs = [template.replace(mode=Competent(), seed=s) for s in child_seeds(template.seed, n)]
    samples = [value for chunk in _map(_carefulness_samples, configs, jobs) for value in chunk]
    return ReferenceDistribution.from_samples(samples)


def control_mode(experiment_id, reference):
    if experiment_id == 1:
        return Fixed()
    if experiment_id == 2:
        return Random(reference)
    if experiment_id == 3:
        return Inverse()
    raise UnknownExperimentError('{!r}, choose 1 (fixed), 2 (random) or 3 (inverse)'.format(experiment_id))


def record_name(index, arm):
    return os.path.join('records', 'trial_{:04d}_{:s}.csv'.format(index, arm))


def _experiment_trial(job):
    """Runs, persists and summarizes one trial, returns (index, summary row, stats delta)"""
    logger = logging.getLogger(__name__)
    index, arm, config, out = job
    before = dict(STATS.data)
    try:
        record = run_trial(config)
        name = record_name(index, arm)
        if out:
            write_record(record, os.path.join(out, name))
        summary = trial_summary(record, config.params.follow)
    except Exception as err:
        logger.error('Error while running trial {:d} ({:s}): {}...'.format(index, arm, err))
        return index, None, {}
    row = {'trial': index, 'arm': arm, 'mode': config.mode.name, 'seed': config.seed, 'record': name}
    row.update(summary._asdict())
    delta = {k: v - before.get(k, 0) for k, v in STATS.data.items() if v != before.get(k, 0)}
    return index, row, delta


def run_experiment(experiment_id, n_per_arm, seed, template, out=None, jobs=1, reference=None):
    """Runs an experiment alternating competent and control trials.

    Parameters:
    ----------
    experiment_id : {int}
        1 (fixed control), 2 (random control) or 3 (inverse control)
    n_per_arm : {int}
        Trials per arm
    seed : {int}
        Root seed, split into one seed per trial
    template : {TrialConfig}
        Duration, parameters, law and population of every trial
    out : {str}, optional
        Directory for records, dataset.csv and experiment.json (the default is None, nothing written)
    jobs : {int}, optional
        Worker processes (the default is 1)
    reference : {ReferenceDistribution}, optional
        Reference of the random control (the default is None, the parameter set's reference)

    Raises
    ------
    UnknownExperimentError
        If the id is not 1, 2 or 3

    Returns
    -------
    ExperimentDataset
        One summary row per successful trial, in trial order
    """

    logger = logging.getLogger(__name__)

    control = control_mode(experiment_id, reference or template.params.reference)
    if n_per_arm < 1:
        raise InvalidParameterError('n_per_arm must be at least 1, got {:d}'.format(n_per_arm))
    if isinstance(control, Fixed):
        cp = template.params.controller
        logger.info('Fixed mode approach speed {:.1f} cm/s (quoted as {:.0f} cm/s)...'
                    .format(speed_factor(control.carefulness, Phase.APPROACH, cp) * cp.speed_unit,
                            QUOTED_FIXED_SPEED))

    arms = ('competent', control.name)
    modes = (Competent(), control)
    seeds = child_seeds(seed, 2 * n_per_arm)
    if out:
        os.makedirs(os.path.join(out, 'records'), exist_ok=True)
    jobs_list = [(i, arms[i % 2], template.replace(mode=modes[i % 2], seed=seeds[i]), out)
                 for i in range(2 * n_per_arm)]

    logger.info('Running experiment {:d} with {:d} trials per arm ({:s} vs {:s})...'
                .format(experiment_id, n_per_arm, arms[0], arms[1]))
    results = sorted(_map(_experiment_trial, jobs_list, jobs), key=lambda r: r[0])
    if jobs and jobs > 1:
        for _, _, delta in results:
            STATS.merge(delta)
    summaries = pd.DataFrame([row for _, row, _ in results if row is not None])

    meta = {
        'artifact_version': ARTIFACT_VERSION,
        'version': __version__,
        'experiment_id': experiment_id,
        'n_per_arm': n_per_arm,
        'seed': int(seed),
        'arms': list(arms),
        'control': {'name': control.name, **({'carefulness': control.carefulness} if isinstance(control, Fixed)
                                             else {})},
        'law': template.law,
        'duration': template.duration,
        'exit_timeout': template.exit_timeout,
        'release_margin': template.release_margin,
        'params': template.params.to_dict(),
        'params_hash': params_hash(template.params),
        'population': (template.population or Population()).to_dict(),
    }
    if isinstance(control, Random):
        meta['control']['reference'] = list(control.reference.frequencies)
    dataset = ExperimentDataset(experiment_id, summaries, meta, out)
    if out:
        write_dataset(dataset, out)
    return dataset
