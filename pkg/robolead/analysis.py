"""
    robolead.analysis
    ~~~~~~~~~~~~~~

    Analysis suite of an experiment dataset: one plot-ready CSV per analysis plus a markdown report
    with the arm comparisons.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import os
import logging
from collections import namedtuple
import numpy as np
import pandas as pd
from .errors import InvalidInputError, RecordParseError
from .params import Params, ReferenceDistribution
from .metrics import extract_follow_episodes, approach_phases, score_trajectory, true_runs
from .records import read_record
from .stats import mann_whitney_u, unpaired_t, linear_regression


MEASURES = (
    ('approach_count', 'Approach count'),
    ('total_follow_duration', 'Total follow duration (s)'),
    ('mean_follow_duration', 'Mean follow duration (s)'),
    ('mean_avoidance', 'Mean avoidance score'),
    ('mean_carefulness', 'Mean carefulness'),
    ('mean_robot_speed', 'Mean robot speed in approach (cm/s)'),
    ('mean_fish_speed', 'Mean fish speed in approach (cm/s)'),
    ('mean_approach_duration', 'Mean approach duration (s)'),
)

ANALYSES = ('summary', 'follow_vs_distance', 'episode_start_times', 'speed_vs_carefulness',
            'accidental_competence', 'cumulative_projection', 'avoidance_over_time', 'efficiency',
            'follow_durations', 'per_approach_follow')

DISTANCE_BIN = 2.0
START_BIN = 30.0
TIME_BIN = 10.0
PROJECTION_EVERY = 1.0
EFFICIENCY_STEP = 10.0

AnalysisBundle = namedtuple('AnalysisBundle', ['tables', 'tests', 'regressions', 'warnings', 'report'])

TrialView = namedtuple('TrialView', ['trial', 'arm', 'dt', 'phase', 'follow', 'avoid', 'carefulness',
                                     'robot_speed', 'distance', 'd_t', 'episodes', 'approaches', 'leads'])


def trial_view(trial, arm, record, params):
    """Post-release series of one record plus its episodes and phase intervals"""
    rows = record.post_release()
    dt = record.dt
    fish = np.array([(r.fish_x, r.fish_y) for r in rows])
    robot = np.array([(r.robot_x, r.robot_y) for r in rows])
    phase = np.array([r.phase for r in rows])
    follow = np.array([r.follow_score for r in rows])
    series = score_trajectory(fish, robot, params.controller, params.follow, dt)
    starts, ends = true_runs(phase == 'L')
    return TrialView(trial, arm, dt, phase, follow, np.array([r.avoid_score for r in rows]),
                     np.array([r.carefulness for r in rows]), np.array([r.robot_speed for r in rows]),
                     series.distance, series.approach_distance,
                     extract_follow_episodes(follow, phase == 'L', params.follow, dt),
                     approach_phases(phase), list(zip(starts.tolist(), ends.tolist())))


def _overlap(episodes, start, end):
    return sum(max(0, min(ep.end_step, end) - max(ep.start_step, start)) for ep in episodes)


def approach_follow(view):
    """Follow time (s) in the lead phase right after each approach phase, by approach index"""
    lead_by_start = dict(view.leads)
    out = []
    for i, (start, end) in enumerate(view.approaches):
        lead_end = lead_by_start.get(end)
        steps = _overlap(view.episodes, end, lead_end) if lead_end is not None else 0
        out.append((i + 1, start, end, steps * view.dt))
    return out


def follow_vs_distance(views):
    frames = []
    for v in views:
        lead = v.phase == 'L'
        bins = np.floor(v.distance[lead] / DISTANCE_BIN) * DISTANCE_BIN
        frames.append(pd.DataFrame({'arm': v.arm, 'distance_cm': bins, 'follow_score': v.follow[lead]}))
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=['arm', 'distance_cm', 'follow_score'])
    return (frame.groupby(['arm', 'distance_cm'])['follow_score'].agg(['mean', 'count'])
            .reset_index().rename(columns={'mean': 'mean_follow_score', 'count': 'samples'}))


def episode_start_times(views):
    records = [(v.arm, np.floor(ep.start_step * v.dt / START_BIN) * START_BIN)
               for v in views for ep in v.episodes]
    frame = pd.DataFrame(records, columns=['arm', 'start_bin_s'])
    return frame.groupby(['arm', 'start_bin_s']).size().reset_index(name='episodes')


def speed_vs_carefulness(views):
    frames = []
    for v in views:
        approach = v.phase == 'A'
        index = ReferenceDistribution.bin_index(v.carefulness[approach])
        frames.append(pd.DataFrame({'arm': v.arm, 'carefulness_bin': index / 10.0,
                                    'robot_speed': v.robot_speed[approach]}))
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=['arm', 'carefulness_bin', 'robot_speed'])
    return (frame.groupby(['arm', 'carefulness_bin'])['robot_speed'].agg(['mean', 'count'])
            .reset_index().rename(columns={'mean': 'mean_robot_speed', 'count': 'samples'}))


def accidental_competence(views):
    """Per approach phase: carefulness change, raw avoidance trend and the ensuing follow time"""
    rows = []
    for v in views:
        raw = np.maximum(-v.d_t, 0.0)
        previous = None
        for index, start, end, follow in approach_follow(v):
            a = float(v.carefulness[start])
            if previous is not None and end - start >= 2:
                t = np.arange(end - start) * v.dt
                slope = float(np.polyfit(t, raw[start:end], 1)[0])
                rows.append((v.arm, v.trial, index, a - previous, slope, follow))
            previous = a
    return pd.DataFrame(rows, columns=['arm', 'trial', 'approach_idx', 'delta_a', 'delta_q',
                                       'follow_duration'])


def cumulative_projection(views):
    rows = []
    for v in views:
        cumulative = np.cumsum(v.d_t * v.dt)
        if cumulative.size == 0:
            continue
        every = max(int(round(PROJECTION_EVERY / v.dt)), 1)
        picks = list(range(0, cumulative.size, every))
        if picks[-1] != cumulative.size - 1:
            picks.append(cumulative.size - 1)
        rows.extend((v.arm, v.trial, i * v.dt, float(cumulative[i])) for i in picks)
    return pd.DataFrame(rows, columns=['arm', 'trial', 'time_s', 'cumulative_projection'])


def avoidance_over_time(views):
    """Mean avoidance score per time bin across trials with a one standard error band"""
    rows = []
    for v in views:
        bins = np.floor(np.arange(v.avoid.size) * v.dt / TIME_BIN) * TIME_BIN
        per_bin = pd.Series(v.avoid).groupby(bins).mean()
        rows.extend((v.arm, v.trial, float(b), float(m)) for b, m in per_bin.items())
    frame = pd.DataFrame(rows, columns=['arm', 'trial', 'time_s', 'avoidance'])
    grouped = frame.groupby(['arm', 'time_s'])['avoidance']
    out = grouped.agg(['mean', 'count']).reset_index()
    out['se'] = grouped.std(ddof=1).fillna(0.0).to_numpy() / np.sqrt(out['count'].to_numpy())
    out['lower'] = out['mean'] - out['se']
    out['upper'] = out['mean'] + out['se']
    return out.rename(columns={'mean': 'mean_avoidance', 'count': 'trials'})


def efficiency(views):
    """Approaches needed until the accumulated follow time reaches each threshold"""
    per_trial = []
    for v in views:
        follow = [f for _, _, _, f in approach_follow(v)]
        per_trial.append((v.arm, np.cumsum(follow) if follow else np.zeros(0)))
    top = max([c[-1] for _, c in per_trial if c.size] + [0.0])
    thresholds = np.arange(EFFICIENCY_STEP, top + EFFICIENCY_STEP, EFFICIENCY_STEP)
    rows = []
    for arm in sorted({arm for arm, _ in per_trial}):
        for tau in thresholds:
            needed = [int(np.argmax(c >= tau)) + 1 for a, c in per_trial if a == arm and c.size and c[-1] >= tau]
            rows.append((arm, float(tau), float(np.mean(needed)) if needed else np.nan, len(needed)))
    return pd.DataFrame(rows, columns=['arm', 'threshold_s', 'mean_approaches', 'trials_reaching'])


def per_approach_follow(views):
    rows = [(v.arm, index, follow) for v in views for index, _, _, follow in approach_follow(v)]
    frame = pd.DataFrame(rows, columns=['arm', 'approach_idx', 'follow_duration'])
    return (frame.groupby(['arm', 'approach_idx'])['follow_duration'].agg(['mean', 'count'])
            .reset_index().rename(columns={'mean': 'mean_follow_duration', 'count': 'phases'}))


def summary_tests(dataset, arms):
    rows, tests = [], {}
    first, second = (dataset.arm(arms[0]), dataset.arm(arms[1])) if len(arms) == 2 else (None, None)
    for column, label in MEASURES:
        row = {'measure': column}
        for arm in arms:
            values = dataset.arm(arm)[column]
            row[arm] = '{:.3f} [{:.3f} {:.3f}]'.format(values.median(), values.min(), values.max())
        if first is not None and len(first) and len(second):
            result = mann_whitney_u(first[column], second[column])
            tests[column] = result
            row.update({'U': result.statistic, 'p': result.p_value, 'CLES': result.cles})
        rows.append(row)
    return pd.DataFrame(rows), tests


def _regressions(tables, warn):
    out = {}
    for arm, frame in tables['efficiency'].dropna().groupby('arm'):
        try:
            out['efficiency_' + arm] = linear_regression(frame['threshold_s'], frame['mean_approaches'])
        except InvalidInputError as err:
            warn('Efficiency regression of {:s} skipped: {}'.format(arm, err))
    acc = tables['accidental_competence']
    for arm, frame in acc.groupby('arm'):
        try:
            out['accidental_competence_' + arm] = linear_regression(frame['delta_a'] * frame['delta_q'],
                                                                    frame['follow_duration'])
        except InvalidInputError as err:
            warn('Accidental competence regression of {:s} skipped: {}'.format(arm, err))
    return out


def _markdown(frame):
    columns = list(frame.columns)
    lines = ['| ' + ' | '.join(columns) + ' |', '|' + '---|' * len(columns)]
    for values in frame.itertuples(index=False):
        lines.append('| ' + ' | '.join(_cell(v) for v in values) + ' |')
    return '\n'.join(lines)


def _cell(value):
    if isinstance(value, float):
        return '{:.4g}'.format(value)
    return str(value)


def track_metrics(track, params):
    """Scores and follow episodes of a foreign two-agent track.

    Parameters:
    ----------
    track : {Track}
        Positions, optional phase column and sampling rate
    params : {Params}
        Clip bounds, zone, smoothing and episode limits

    Returns
    -------
    (pandas.DataFrame, pandas.DataFrame)
        Per-step scores and the follow episodes; without a phase column every step counts as leading
    """

    dt = 1.0 / track.rate
    series = score_trajectory(track.fish_xy, track.robot_xy, params.controller, params.follow, dt)
    lead = (np.asarray(track.phase) == 'L') if track.phase is not None else np.ones(len(track.time_s), bool)
    scores = pd.DataFrame({
        'time_s': track.time_s,
        'distance': series.distance,
        'in_zone': series.in_zone.astype(int),
        'approach_distance': series.approach_distance,
        'avoidance_event': series.avoidance_event,
        'avoidance_score': series.avoidance_score,
        'follow_event': series.follow_event,
        'follow_score': series.follow_score,
    })
    episodes = extract_follow_episodes(series.follow_score, lead, params.follow, dt)
    frame = pd.DataFrame([(ep.start_step, ep.end_step, track.time_s[ep.start_step], ep.duration)
                          for ep in episodes], columns=['start_step', 'end_step', 'start_s', 'duration_s'])
    return scores, frame


def read_body_sizes(path):
    frame = pd.read_csv(path)
    if not {'arm', 'size_mm'} <= set(frame.columns):
        raise InvalidInputError('{:s} needs columns arm and size_mm'.format(path))
    return frame


def analysis_suite(dataset, out_dir, body_sizes=None):
    """Runs every analysis of an experiment dataset and writes the bundle.

    Parameters:
    ----------
    dataset : {ExperimentDataset}
        Summaries and record locations of an experiment
    out_dir : {str}
        Directory for <analysis>.csv files and report.md
    body_sizes : {pandas.DataFrame}, optional
        Columns arm and size_mm for the body-size comparison (the default is None, skipped)

    Returns
    -------
    AnalysisBundle
        Tables, tests, regressions, warnings and the report path
    """

    logger = logging.getLogger(__name__)
    warnings = []

    def warn(message):
        logger.warning(message + '...')
        warnings.append(message)

    params = Params.from_dict(dataset.meta['params']) if dataset.meta.get('params') else Params()
    arms = [arm for arm in dataset.arms if len(dataset.arm(arm))]
    for arm in dataset.arms:
        if arm not in arms:
            warn('Arm {:s} holds no trials'.format(arm))
    if len(arms) < 2:
        warn('Arm comparison needs two arms with trials, tests skipped')

    views = []
    for _, row in dataset.summaries.iterrows():
        path = dataset.record_path(row)
        try:
            record = read_record(path)
        except (OSError, RecordParseError) as err:
            warn('Record of trial {} skipped: {}'.format(row['trial'], err))
            continue
        logger.debug('Analyzing {:s}...'.format(path))
        views.append(trial_view(int(row['trial']), row['arm'], record, params))

    summary, tests = summary_tests(dataset, arms)
    follow_cols = ['trial', 'arm', 'mean_follow_duration', 'total_follow_duration']
    tables = {
        'summary': summary,
        'follow_vs_distance': follow_vs_distance(views),
        'episode_start_times': episode_start_times(views),
        'speed_vs_carefulness': speed_vs_carefulness(views),
        'accidental_competence': accidental_competence(views),
        'cumulative_projection': cumulative_projection(views),
        'avoidance_over_time': avoidance_over_time(views),
        'efficiency': efficiency(views),
        'follow_durations': dataset.summaries[follow_cols] if len(dataset.summaries) else pd.DataFrame(columns=follow_cols),
        'per_approach_follow': per_approach_follow(views),
    }
    regressions = _regressions(tables, warn)

    if body_sizes is not None and len(arms) == 2:
        try:
            tests['body_size'] = unpaired_t(body_sizes.loc[body_sizes['arm'] == arms[0], 'size_mm'],
                                            body_sizes.loc[body_sizes['arm'] == arms[1], 'size_mm'])
        except InvalidInputError as err:
            warn('Body size comparison skipped: {}'.format(err))

    os.makedirs(out_dir, exist_ok=True)
    for name in ANALYSES:
        tables[name].to_csv(os.path.join(out_dir, name + '.csv'), index=False, float_format='%.6f',
                            lineterminator='\n')

    lines = ['# Experiment {} analysis'.format(dataset.experiment_id), '',
             'Arms: {:s}'.format(' vs '.join(arms) if arms else 'none'), '',
             '## Per-trial measures (median [min max], two-sided Mann-Whitney U)', '',
             _markdown(summary), '']
    if tests:
        lines += ['## Tests', '']
        lines += ['- {:s}: {:s}'.format(name, result.describe()) for name, result in tests.items()]
        lines.append('')
    if regressions:
        lines += ['## Regressions', '']
        lines += ['- {:s}: slope={:.4g} intercept={:.4g} R2={:.3f} (n={:d})'
                  .format(name, r.slope, r.intercept, r.r2, r.n) for name, r in sorted(regressions.items())]
        lines.append('')
    if warnings:
        lines += ['## Warnings', ''] + ['- ' + w for w in warnings] + ['']
    lines += ['## Files', ''] + ['- {:s}.csv'.format(name) for name in ANALYSES] + ['']
    report = os.path.join(out_dir, 'report.md')
    with open(report, 'w') as file:
        file.write('\n'.join(lines))
    logger.info('Wrote analysis bundle to {:s}...'.format(out_dir))
    return AnalysisBundle(tables, tests, regressions, warnings, report)
