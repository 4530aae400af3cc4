"""
    robolead.metrics
    ~~~~~~~~~~~~~~

    Approach distance, avoidance and follow scores, follow episodes and per-trial summaries.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
from collections import namedtuple
import numpy as np
from .errors import DegenerateGeometryError, InvalidInputError
from .model import clip_normalize, clamp


ScoreState = namedtuple('ScoreState', ['avoidance', 'follow'])

FollowEpisode = namedtuple('FollowEpisode', ['start_step', 'end_step', 'duration'])

TrialSummary = namedtuple('TrialSummary', [
    'mean_follow_duration', 'total_follow_duration', 'episode_count', 'approach_count',
    'mean_avoidance', 'mean_carefulness', 'mean_robot_speed', 'mean_fish_speed',
    'mean_approach_duration', 'release_step'])

ScoreSeries = namedtuple('ScoreSeries', ['approach_distance', 'distance', 'in_zone', 'avoidance_event',
                                         'avoidance_score', 'follow_event', 'follow_score'])


def approach_distance(robot_prev, fish_prev, fish_cur, dt):
    """Fish displacement projected onto the unit vector from fish to robot, as a speed.

    Parameters:
    ----------
    robot_prev : {Vec2}
        Robot position at the previous step
    fish_prev : {Vec2}
        Fish position at the previous step
    fish_cur : {Vec2}
        Fish position at the current step
    dt : {float}
        Time step in s

    Raises
    ------
    DegenerateGeometryError
        If robot and fish shared their previous position

    Returns
    -------
    float
        Approach speed in cm/s, positive towards the robot
    """

    rx = robot_prev.x - fish_prev.x
    ry = robot_prev.y - fish_prev.y
    n = math.hypot(rx, ry)
    if n == 0.0:
        raise DegenerateGeometryError('robot and fish at the same position')
    return ((fish_cur.x - fish_prev.x) * rx + (fish_cur.y - fish_prev.y) * ry) / n / dt


def avoidance_event(d_t, params):
    if d_t >= 0.0:
        return 0.0
    return clip_normalize(-d_t, params.v_s, params.v_p)


def follow_event(d_t, params):
    if d_t <= 0.0:
        return 0.0
    return clip_normalize(d_t, params.v_s, params.v_p)


def update_avoidance_score(prev, e_t, in_zone, params):
    """Exponential avoidance score, input gated by the interaction zone, clamped to [0, 1]"""
    gate = 1.0 if in_zone else 0.0
    return clamp(params.beta * gate * params.s_e * e_t + (1.0 - params.beta) * prev, 0.0, 1.0)


def update_follow_score(prev, o_t, in_zone, params):
    """Exponential follow score with the correction term 1 + exp(-o/3), clamped to [0, 1]"""
    gate = 1.0 if in_zone else 0.0
    c_o = 1.0 + math.exp(-o_t / 3.0)
    return clamp(params.beta_o * gate * params.s_o * c_o * o_t + (1.0 - params.beta_o) * prev, 0.0, 1.0)


def true_runs(mask):
    """(start, end) pairs of the true-runs of a boolean array, end exclusive"""
    padded = np.concatenate(([0], np.asarray(mask, dtype=np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return edges[0::2], edges[1::2]


def extract_follow_episodes(follow_series, lead_mask, params, dt=0.04):
    """Binarizes the follow score into follow episodes.

    Samples count as following while the robot leads and the score exceeds the threshold.
    Gaps shorter than max_gap_steps between two runs are bridged, then runs shorter than
    min_len_steps are dropped (closing followed by opening, done on run lengths).

    Parameters:
    ----------
    follow_series : {sequence of float}
        Follow score per step
    lead_mask : {sequence of bool}
        True where the robot is in lead phase
    params : {FollowParams}
        Threshold and step limits
    dt : {float}, optional
        Time step in s (the default is 0.04)

    Raises
    ------
    InvalidInputError
        If the series lengths differ

    Returns
    -------
    list of FollowEpisode
        Episodes in chronological order
    """

    follow_series = np.asarray(follow_series, dtype=float)
    lead_mask = np.asarray(lead_mask, dtype=bool)
    if follow_series.shape != lead_mask.shape:
        raise InvalidInputError('follow series has {:d} samples, lead mask {:d}'
                                .format(follow_series.size, lead_mask.size))

    starts, ends = true_runs((follow_series > params.threshold) & lead_mask)
    if starts.size == 0:
        return []

    # bridge interior gaps
    keep = np.concatenate(([True], (starts[1:] - ends[:-1]) >= params.max_gap_steps))
    merged_starts = starts[keep]
    merged_ends = np.append(ends[np.flatnonzero(keep[1:])], ends[-1])

    episodes = []
    for start, end in zip(merged_starts, merged_ends):
        if end - start >= params.min_len_steps:
            episodes.append(FollowEpisode(int(start), int(end), float((end - start) * dt)))
    return episodes


def approach_phases(phases):
    """Step intervals of consecutive approach phases.

    Parameters:
    ----------
    phases : {sequence of str}
        Phase code per step ('M', 'A' or 'L')

    Returns
    -------
    list of (int, int)
        (start, end) of each approach phase, end exclusive, index i is approach i+1
    """

    starts, ends = true_runs(np.asarray(phases) == 'A')
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


def score_trajectory(fish_xy, robot_xy, params, follow_params, dt=0.04):
    """Recomputes approach distances, events and scores for any two-agent track.

    Parameters:
    ----------
    fish_xy, robot_xy : {array of shape (n, 2)}
        Positions per step in cm
    params : {ControllerParams}
        Clip bounds, zone and avoidance smoothing
    follow_params : {FollowParams}
        Follow smoothing
    dt : {float}, optional
        Time step in s (the default is 0.04)

    Returns
    -------
    ScoreSeries
        Arrays of length n; the first step has d_t = 0 and initial scores
    """

    fish_xy = np.asarray(fish_xy, dtype=float)
    robot_xy = np.asarray(robot_xy, dtype=float)
    if fish_xy.shape != robot_xy.shape or fish_xy.ndim != 2 or fish_xy.shape[1] != 2:
        raise InvalidInputError('fish and robot tracks need matching (n, 2) shapes')
    n = fish_xy.shape[0]

    rho = robot_xy[:-1] - fish_xy[:-1]
    phi = fish_xy[1:] - fish_xy[:-1]
    norm = np.hypot(rho[:, 0], rho[:, 1])
    d_t = np.zeros(n)
    valid = norm > 0.0
    d_t[1:][valid] = (phi[valid] * rho[valid]).sum(axis=1) / norm[valid] / dt
    distance = np.hypot(*(robot_xy - fish_xy).T)
    in_zone = distance <= params.d_I

    e = np.array([avoidance_event(d, params) for d in d_t])
    o = np.array([follow_event(d, params) for d in d_t])
    avoid = np.empty(n)
    follow = np.empty(n)
    a_bar, o_bar = 0.5, follow_params.follow_init
    for i in range(n):
        if i > 0:
            a_bar = update_avoidance_score(a_bar, e[i], in_zone[i], params)
            o_bar = update_follow_score(o_bar, o[i], in_zone[i], follow_params)
        avoid[i] = a_bar
        follow[i] = o_bar
    return ScoreSeries(d_t, distance, in_zone, e, avoid, o, follow)


def trial_summary(record, follow_params):
    """Per-trial measures of leadership performance.

    Only rows after the fish's release are considered. Speeds are averaged over approach-phase
    rows, the avoidance score and carefulness over all post-release rows.

    Parameters:
    ----------
    record : {TrialRecord}
        Recorded trial
    follow_params : {FollowParams}
        Episode extraction parameters

    Raises
    ------
    InvalidInputError
        If the record holds no post-release rows

    Returns
    -------
    TrialSummary
        Summary of the trial
    """

    release = record.release_step
    rows = record.rows[release:]
    if not rows:
        raise InvalidInputError('record holds no post-release rows')
    dt = record.dt

    phases = np.array([row.phase for row in rows])
    follow = np.array([row.follow_score for row in rows])
    episodes = extract_follow_episodes(follow, phases == 'L', follow_params, dt=dt)
    total = sum(ep.duration for ep in episodes)
    mean = total / len(episodes) if episodes else 0.0

    approaches = approach_phases(phases)
    approach = phases == 'A'
    if approach.any():
        robot_speed = float(np.mean([row.robot_speed for row in rows if row.phase == 'A']))
        fish_speed = float(np.mean([row.fish_speed for row in rows if row.phase == 'A']))
    else:
        robot_speed = fish_speed = 0.0
    approach_duration = (float(np.mean([(e - s) * dt for s, e in approaches])) if approaches else 0.0)

    return TrialSummary(
        mean_follow_duration=float(mean),
        total_follow_duration=float(total),
        episode_count=len(episodes),
        approach_count=len(approaches),
        mean_avoidance=float(np.mean([row.avoid_score for row in rows])),
        mean_carefulness=float(np.mean([row.carefulness for row in rows])),
        mean_robot_speed=robot_speed,
        mean_fish_speed=fish_speed,
        mean_approach_duration=approach_duration,
        release_step=release)
