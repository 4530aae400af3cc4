"""
    robolead.params
    ~~~~~~~~~~~~~~

    Canonical parameter set of the controller and the follow metric, and the carefulness
    reference distribution.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
from dataclasses import dataclass, field, fields, asdict
import numpy as np
from .errors import InvalidParameterError
from .model import ArenaSpec, TimeBase
from .kinematics import RobotMotionParams


N_BINS = 10

# pretrial carefulness histogram of the competent robot, bins [0,.1], (.1,.2], ..., (.9,1]
REFERENCE_FREQUENCIES = (0.112739, 0.031610, 0.034126, 0.042342, 0.069718,
                         0.080316, 0.065151, 0.108997, 0.126346, 0.328655)


@dataclass(frozen=True)
class ControllerParams:
    v_s: float = 2.5
    v_p: float = 10.0
    d_I: float = 56.0
    beta: float = 0.0025
    s_e: float = 8.0
    b_e: float = 0.5
    eta: float = 0.075
    d_comf: float = 12.0
    d_close: float = 6.0
    comfort_dwell: float = 2.0
    lead_follow_dist: float = 28.0
    lead_tolerance: float = 1.0
    lead_burst: float = 15.0
    approach_offset: float = 6.0
    base_speed_s_c: float = 0.2
    speed_unit: float = 25.0
    max_speed: float = 30.0
    lead_speed_factor: float = 0.8717
    milling_diameter: float = 20.0
    milling_speed: float = 8.0
    carefulness_init: float = 0.5
    corner_arrival: float = 5.0
    burst_arrival: float = 2.0
    milling_offset: float = 15.0

    def __post_init__(self):
        if not self.v_s < self.v_p:
            raise InvalidParameterError('v_s must be below v_p')
        for name in ('d_I', 'd_comf', 'd_close', 'lead_follow_dist', 'lead_burst', 'approach_offset',
                     'milling_diameter', 'corner_arrival', 'burst_arrival', 'milling_offset'):
            if not getattr(self, name) > 0:
                raise InvalidParameterError('{:s} must be positive'.format(name))
        if not self.d_close < self.d_comf:
            raise InvalidParameterError('d_close must be below d_comf')
        if not 0.0 <= self.b_e <= 1.0:
            raise InvalidParameterError('b_e must lie in [0, 1]')
        if not (0.0 <= self.beta <= 1.0 and 0.0 <= self.eta <= 1.0):
            raise InvalidParameterError('smoothing factors must lie in [0, 1]')
        if not 0.0 <= self.carefulness_init <= 1.0:
            raise InvalidParameterError('carefulness_init must lie in [0, 1]')
        if not math.isclose(self.speed_unit * (1.0 + self.base_speed_s_c), self.max_speed,
                            rel_tol=0.0, abs_tol=1e-9):
            raise InvalidParameterError('speed_unit * (1 + base_speed_s_c) must equal max_speed')

    @property
    def milling_radius(self):
        return self.milling_diameter / 2.0


@dataclass(frozen=True)
class FollowParams:
    beta_o: float = 0.005
    s_o: float = 2.0
    threshold: float = 0.4
    min_len_steps: int = 200
    max_gap_steps: int = 200
    follow_init: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise InvalidParameterError('follow threshold must lie in (0, 1)')
        if not (self.min_len_steps > 0 and self.max_gap_steps > 0):
            raise InvalidParameterError('episode step limits must be positive')
        if not 0.0 <= self.follow_init <= 1.0:
            raise InvalidParameterError('follow_init must lie in [0, 1]')


@dataclass(frozen=True)
class ReferenceDistribution:
    """Normalized 10-bin histogram of carefulness values over [0, 1].

    The first bin is closed, the others are half-open on the left: [0, .1], (.1, .2], ...
    """
    frequencies: tuple = REFERENCE_FREQUENCIES

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, 'frequencies', freqs)
        if len(freqs) != N_BINS:
            raise InvalidParameterError('reference distribution needs {:d} bins, got {:d}'
                                        .format(N_BINS, len(freqs)))
        if any(f < 0 or not math.isfinite(f) for f in freqs):
            raise InvalidParameterError('reference frequencies must be nonnegative')
        if abs(sum(freqs) - 1.0) > 1e-9:
            raise InvalidParameterError('reference frequencies sum to {}, not 1'.format(sum(freqs)))

    @property
    def bin_edges(self):
        return np.linspace(0.0, 1.0, N_BINS + 1)

    @property
    def bin_centers(self):
        edges = self.bin_edges
        return (edges[:-1] + edges[1:]) / 2.0

    def mean(self):
        return float(np.dot(self.frequencies, self.bin_centers))

    @staticmethod
    def bin_index(values):
        """Bin index of each carefulness value, first bin closed, the others open on the left"""
        inner = np.linspace(0.0, 1.0, N_BINS + 1)[1:-1]
        return np.searchsorted(inner, np.asarray(values, dtype=float), side='left')

    @classmethod
    def from_samples(cls, values, weights=None):
        """Normalized histogram of carefulness samples (optionally time-weighted)"""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise InvalidParameterError('no carefulness samples')
        counts = np.bincount(cls.bin_index(values), weights=weights, minlength=N_BINS)
        total = counts.sum()
        if total <= 0:
            raise InvalidParameterError('carefulness samples carry no weight')
        return cls(tuple(float(c) / total for c in counts))

    def total_variation(self, other):
        return 0.5 * float(np.abs(np.subtract(self.frequencies, other.frequencies)).sum())


@dataclass(frozen=True)
class Params:
    """Everything a trial needs besides mode, fish and seed"""
    controller: ControllerParams = field(default_factory=ControllerParams)
    follow: FollowParams = field(default_factory=FollowParams)
    motion: RobotMotionParams = field(default_factory=RobotMotionParams)
    arena: ArenaSpec = field(default_factory=ArenaSpec)
    timebase: TimeBase = field(default_factory=TimeBase)
    reference: ReferenceDistribution = field(default_factory=ReferenceDistribution)

    SECTIONS = ('controller', 'follow', 'motion', 'arena', 'timebase')

    def to_dict(self):
        out = {name: asdict(getattr(self, name)) for name in self.SECTIONS}
        out['reference'] = list(self.reference.frequencies)
        return out

    @classmethod
    def from_dict(cls, data):
        """Builds Params from a (partial) dict, missing keys take their defaults.

        Raises
        ------
        InvalidParameterError
            On unknown sections/keys or invalid values
        """

        classes = {'controller': ControllerParams, 'follow': FollowParams,
                   'motion': RobotMotionParams, 'arena': ArenaSpec, 'timebase': TimeBase}
        unknown = set(data) - set(classes) - {'reference', 'version'}
        if unknown:
            raise InvalidParameterError('unknown parameter sections {}'.format(sorted(unknown)))
        kwargs = {}
        for name, klass in classes.items():
            section = data.get(name, {}) or {}
            known = {f.name: f.type for f in fields(klass)}
            bad = set(section) - set(known)
            if bad:
                raise InvalidParameterError('unknown keys in [{:s}]: {}'.format(name, sorted(bad)))
            kwargs[name] = klass(**{k: _coerce(v, known[k]) for k, v in section.items()})
        if data.get('reference') is not None:
            kwargs['reference'] = ReferenceDistribution(tuple(data['reference']))
        return cls(**kwargs)


def _coerce(value, annotation):
    if annotation in (int, 'int'):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidParameterError('expected an integer, got {!r}'.format(value))
        if isinstance(value, float) and not value.is_integer():
            raise InvalidParameterError('expected an integer, got {}'.format(value))
        return int(value)
    if annotation in (float, 'float'):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidParameterError('expected a number, got {!r}'.format(value))
        return float(value)
    return value
