"""
    robolead.records
    ~~~~~~~~~~~~~~

    Trial records: trajectory CSV plus JSON manifest, foreign two-agent tracks and the
    experiment dataset on disk.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import os
import csv
import json
import logging
from collections import namedtuple
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from .errors import RecordParseError, InvalidInputError


ARTIFACT_VERSION = 1

COLUMNS = ('step', 'time_s', 'fish_x', 'fish_y', 'robot_x', 'robot_y', 'phase', 'carefulness',
           'avoid_score', 'follow_score', 'robot_speed', 'fish_speed', 'approach_idx')
INT_COLUMNS = ('step', 'approach_idx')
FLOAT_COLUMNS = tuple(c for c in COLUMNS if c not in INT_COLUMNS + ('phase',))
PHASES = ('M', 'A', 'L')

TrialRow = namedtuple('TrialRow', COLUMNS)


def make_row(step, time_s, fish, robot, phase, carefulness, avoid, follow, robot_speed, fish_speed,
             approach_idx):
    """Row with every float rounded to the 6 decimals written to disk"""
    return TrialRow(step, round(time_s, 6), round(fish.x, 6), round(fish.y, 6), round(robot.x, 6),
                    round(robot.y, 6), phase, round(carefulness, 6), round(avoid, 6), round(follow, 6),
                    round(robot_speed, 6), round(fish_speed, 6), approach_idx)


class TrialRecord(object):
    """Per-step rows of one trial plus its manifest"""

    def __init__(self, rows, manifest):
        self.rows = list(rows)
        self.manifest = dict(manifest)

    def __eq__(self, other):
        return isinstance(other, TrialRecord) and self.rows == other.rows and self.manifest == other.manifest

    def __len__(self):
        return len(self.rows)

    @property
    def release_step(self):
        return int(self.manifest.get('release_step', 0))

    @property
    def rate(self):
        return float(self.manifest.get('rate', 25.0))

    @property
    def dt(self):
        return 1.0 / self.rate

    def column(self, name):
        values = [getattr(row, name) for row in self.rows]
        return np.array(values) if name == 'phase' else np.asarray(values, dtype=float)

    def post_release(self):
        return self.rows[self.release_step:]


def manifest_path(path):
    return os.path.splitext(path)[0] + '.json'


def write_manifest(path, manifest):
    with open(path, 'w') as file:
        file.write(json.dumps(manifest, sort_keys=True, indent=2) + '\n')


def write_record(record, path):
    """Writes the trajectory CSV to path and the manifest next to it (.json)"""
    logger = logging.getLogger(__name__)
    with open(path, 'w', newline='') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(COLUMNS)
        for row in record.rows:
            writer.writerow([_format(name, value) for name, value in zip(COLUMNS, row)])
    write_manifest(manifest_path(path), record.manifest)
    logger.debug('Wrote {:d} rows to {:s}...'.format(len(record.rows), path))


def _format(name, value):
    if name in INT_COLUMNS:
        return '{:d}'.format(value)
    if name == 'phase':
        return value
    return '{:.6f}'.format(value)


def _parse_row(path, lineno, fields):
    if len(fields) != len(COLUMNS):
        raise RecordParseError(path, lineno, 'expected {:d} fields, got {:d}'.format(len(COLUMNS), len(fields)))
    values = []
    for name, text in zip(COLUMNS, fields):
        try:
            if name in INT_COLUMNS:
                values.append(int(text))
            elif name == 'phase':
                if text not in PHASES:
                    raise ValueError('unknown phase {!r}'.format(text))
                values.append(text)
            else:
                values.append(float(text))
        except ValueError as err:
            raise RecordParseError(path, lineno, 'bad {:s}: {}'.format(name, err))
    return TrialRow(*values)


def read_record(path, resample=False):
    """Reads a trajectory CSV and its manifest.

    Parameters:
    ----------
    path : {str}
        Path to the trajectory CSV
    resample : {bool}, optional
        Accept tracks sampled at another rate and resample them to the manifest rate (the default
        is False)

    Raises
    ------
    RecordParseError
        If the file is malformed, names the line and the last good line

    Returns
    -------
    TrialRecord
        Parsed record
    """

    logger = logging.getLogger(__name__)

    rows = []
    with open(path, newline='') as file:
        reader = csv.reader(file)
        try:
            header = next(reader)
        except StopIteration:
            raise RecordParseError(path, 1, 'empty file')
        if tuple(header) != COLUMNS:
            raise RecordParseError(path, 1, 'unexpected header {}'.format(','.join(header)))
        for fields in reader:
            lineno = reader.line_num
            row = _parse_row(path, lineno, fields)
            if rows and row.step != rows[-1].step + 1:
                raise RecordParseError(path, lineno, 'step {:d} does not follow {:d}'.format(row.step, rows[-1].step))
            rows.append(row)
    if not rows:
        raise RecordParseError(path, 2, 'no data rows')

    mpath = manifest_path(path)
    manifest = {}
    if os.path.isfile(mpath):
        try:
            with open(mpath) as file:
                manifest = json.load(file)
        except ValueError as err:
            raise RecordParseError(mpath, getattr(err, 'lineno', 1), 'bad manifest: {}'.format(err))
    rate = float(manifest.get('rate', 25.0))

    native = _sample_rate(rows)
    if native is not None and abs(native - rate) > 1e-3 * rate:
        if not resample:
            raise RecordParseError(path, 3, 'sampled at {:.3f} Hz instead of {:.3f} Hz, resampling not '
                                            'requested'.format(native, rate))
        logger.info('Resampling {:s} from {:.3f} Hz to {:.3f} Hz...'.format(path, native, rate))
        rows = resample_rows(rows, native, rate)
        manifest = dict(manifest, resampled_from=native, rate=rate)
    return TrialRecord(rows, manifest)


def _sample_rate(rows):
    if len(rows) < 2:
        return None
    dt = float(np.median(np.diff([row.time_s for row in rows])))
    return 1.0 / dt if dt > 0 else None


def resample_rows(rows, native, rate):
    """Decimates integer rate ratios, interpolates float columns otherwise"""
    ratio = native / rate
    if abs(ratio - round(ratio)) < 1e-6 and round(ratio) >= 1:
        picked = rows[::int(round(ratio))]
        return [row._replace(step=i, time_s=round(i / rate, 6)) for i, row in enumerate(picked)]
    t0 = rows[0].time_s
    t_native = np.array([row.time_s for row in rows]) - t0
    n = int(np.floor(t_native[-1] * rate + 1e-9)) + 1
    t_new = np.arange(n) / rate
    out = []
    nearest = np.searchsorted(t_native, t_new, side='right') - 1
    columns = {name: np.interp(t_new, t_native, [getattr(row, name) for row in rows]) for name in FLOAT_COLUMNS}
    for i in range(n):
        src = rows[int(max(nearest[i], 0))]
        values = {name: round(float(columns[name][i]), 6) for name in FLOAT_COLUMNS}
        values['time_s'] = round(float(t_new[i]), 6)
        out.append(TrialRow(step=i, phase=src.phase, approach_idx=src.approach_idx, **values))
    return out


Track = namedtuple('Track', ['time_s', 'fish_xy', 'robot_xy', 'phase', 'rate'])


def read_track(path, rate=None):
    """Reads any two-agent track CSV with fish_x, fish_y, robot_x, robot_y columns.

    time_s and phase are optional; without time_s the rate must be given. Rows with missing
    positions raise an error naming the line.
    """

    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as err:
        raise RecordParseError(path, 1, str(err))
    missing = {'fish_x', 'fish_y', 'robot_x', 'robot_y'} - set(frame.columns)
    if missing:
        raise RecordParseError(path, 1, 'missing columns {}'.format(sorted(missing)))
    positions = frame[['fish_x', 'fish_y', 'robot_x', 'robot_y']]
    bad = positions.isna().any(axis=1).to_numpy()
    if bad.any():
        raise RecordParseError(path, int(np.flatnonzero(bad)[0]) + 2, 'missing position')
    if len(frame) < 2:
        raise InvalidInputError('track {:s} needs at least two samples'.format(path))

    if 'time_s' in frame.columns:
        time_s = frame['time_s'].to_numpy(dtype=float)
        track_rate = rate or 1.0 / float(np.median(np.diff(time_s)))
    elif rate:
        track_rate = float(rate)
        time_s = np.arange(len(frame)) / track_rate
    else:
        raise InvalidInputError('track {:s} has no time_s column, pass the sampling rate'.format(path))
    phase = frame['phase'].astype(str).to_numpy() if 'phase' in frame.columns else None
    return Track(time_s, positions[['fish_x', 'fish_y']].to_numpy(dtype=float),
                 positions[['robot_x', 'robot_y']].to_numpy(dtype=float), phase, track_rate)


@dataclass
class ExperimentDataset:
    """Per-trial summaries of one experiment, one row per trial in trial order"""
    experiment_id: int
    summaries: pd.DataFrame
    meta: dict = field(default_factory=dict)
    root: str = None

    @property
    def arms(self):
        return tuple(self.meta.get('arms') or pd.unique(self.summaries['arm']))

    def arm(self, label):
        return self.summaries[self.summaries['arm'] == label].reset_index(drop=True)

    def record_path(self, row):
        return os.path.join(self.root, row['record']) if self.root else row['record']


def write_dataset(dataset, out):
    logger = logging.getLogger(__name__)
    dataset.summaries.to_csv(os.path.join(out, 'dataset.csv'), index=False, float_format='%.6f',
                             lineterminator='\n')
    write_manifest(os.path.join(out, 'experiment.json'), dict(dataset.meta, experiment_id=dataset.experiment_id))
    logger.info('Wrote dataset with {:d} trials to {:s}...'.format(len(dataset.summaries), out))


def read_dataset(path):
    """Loads dataset.csv and experiment.json from an experiment directory

    Raises
    ------
    InvalidInputError
        If either file is missing
    """

    csv_path = os.path.join(path, 'dataset.csv')
    meta_path = os.path.join(path, 'experiment.json')
    if not (os.path.isfile(csv_path) and os.path.isfile(meta_path)):
        raise InvalidInputError('{:s} holds no dataset.csv and experiment.json'.format(path))
    with open(meta_path) as file:
        meta = json.load(file)
    summaries = pd.read_csv(csv_path)
    return ExperimentDataset(int(meta.get('experiment_id', 0)), summaries, meta, path)
