"""
    robolead.model
    ~~~~~~~~~~~~~~

    Geometric and temporal value types shared by all modules.

    Positions are in cm in an arena frame with the origin in the south-west corner, x pointing east
    and y pointing north. Angles are radians, counterclockwise from +x.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
from collections import namedtuple
from dataclasses import dataclass
from .errors import InvalidParameterError, DegenerateGeometryError


TWO_PI = 2.0 * math.pi


class Vec2(namedtuple('Vec2', ['x', 'y'])):
    """Immutable 2-D vector in cm. Rejects NaN and infinite components on construction."""
    __slots__ = ()

    def __new__(cls, x, y):
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidParameterError('non-finite vector ({}, {})'.format(x, y))
        return tuple.__new__(cls, (float(x), float(y)))

    def __add__(self, other):
        return _vec(self[0] + other[0], self[1] + other[1])

    def __sub__(self, other):
        return _vec(self[0] - other[0], self[1] - other[1])

    def __mul__(self, k):
        return _vec(float(self[0] * k), float(self[1] * k))

    __rmul__ = __mul__

    def __neg__(self):
        return _vec(-self[0], -self[1])

    def dot(self, other):
        return self[0] * other[0] + self[1] * other[1]

    def cross(self, other):
        """z-component of the 3-D cross product, positive if other is left of self"""
        return self[0] * other[1] - self[1] * other[0]

    def norm(self):
        return math.hypot(self[0], self[1])

    def unit(self):
        n = math.hypot(self[0], self[1])
        if n == 0.0:
            raise DegenerateGeometryError('zero-length vector has no direction')
        return _vec(self[0] / n, self[1] / n)

    def angle(self):
        return math.atan2(self[1], self[0])

    @classmethod
    def polar(cls, length, angle):
        return cls(length * math.cos(angle), length * math.sin(angle))


def _vec(x, y):
    # results of arithmetic on finite vectors, built without the finiteness check
    return tuple.__new__(Vec2, (x, y))


def normalize_angle(angle):
    """Wraps an angle into [-pi, pi)"""
    return (angle + math.pi) % TWO_PI - math.pi


class Pose(namedtuple('Pose', ['position', 'heading'])):
    """Position plus heading, heading normalized to [-pi, pi)"""
    __slots__ = ()

    def __new__(cls, position, heading):
        if not math.isfinite(heading):
            raise InvalidParameterError('non-finite heading {}'.format(heading))
        return super(Pose, cls).__new__(cls, position, normalize_angle(float(heading)))

    def direction(self):
        return Vec2(math.cos(self.heading), math.sin(self.heading))


def clamp(x, a, b):
    return a if x < a else b if x > b else x


def clip_normalize(x, a, b):
    """Clips x to [a, b] and maps the result linearly onto [0, 1].

    Parameters:
    ----------
    x : {float}
        Value to clip
    a, b : {float}
        Clip bounds, a < b

    Raises
    ------
    InvalidParameterError
        If a >= b

    Returns
    -------
    float
        (clamp(x, a, b) - a) / (b - a)
    """

    if not a < b:
        raise InvalidParameterError('clip bounds need a < b, got a={} b={}'.format(a, b))
    return (clamp(x, a, b) - a) / (b - a)


def rotate(v, angle):
    """Counterclockwise rotation of v by angle radians"""
    c = math.cos(angle)
    s = math.sin(angle)
    return Vec2(c * v.x - s * v.y, s * v.x + c * v.y)


@dataclass(frozen=True)
class TimeBase:
    rate: float = 25.0

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidParameterError('rate must be positive, got {}'.format(self.rate))

    @property
    def dt(self):
        return 1.0 / self.rate

    def steps(self, seconds):
        """Number of whole steps in a duration"""
        return int(round(seconds * self.rate))


@dataclass(frozen=True)
class ArenaSpec:
    """Square arena with the startbox centered on the south wall, door facing north.

    The startbox is modelled as the square [cx - s/2, cx + s/2] x [0, s] with its door in the
    middle of the north face.
    """
    side: float = 100.0
    corner_inset: float = 10.0
    startbox_side: float = 19.0
    startbox_door_width: float = 3.0

    def __post_init__(self):
        if not self.side > 0:
            raise InvalidParameterError('arena side must be positive')
        if not 0 < self.corner_inset < self.side / 2:
            raise InvalidParameterError('corner_inset must lie in (0, side/2), got {}'
                                        .format(self.corner_inset))
        if not 0 < self.startbox_side < self.side:
            raise InvalidParameterError('startbox does not fit inside the arena')
        if not 0 < self.startbox_door_width <= self.startbox_side:
            raise InvalidParameterError('startbox door wider than the startbox')

    def contains(self, p):
        return 0.0 <= p.x <= self.side and 0.0 <= p.y <= self.side

    def clamp(self, p):
        return Vec2(clamp(p.x, 0.0, self.side), clamp(p.y, 0.0, self.side))

    def corners(self):
        """Lead waypoints inset from the walls, in clockwise order starting south-west"""
        lo, hi = self.corner_inset, self.side - self.corner_inset
        return (Vec2(lo, lo), Vec2(lo, hi), Vec2(hi, hi), Vec2(hi, lo))

    @property
    def door(self):
        """Center of the startbox door"""
        return Vec2(self.side / 2.0, self.startbox_side)

    def startbox_center(self):
        return Vec2(self.side / 2.0, self.startbox_side / 2.0)

    def in_startbox(self, p, margin=0.0):
        """True if p lies in the startbox, optionally extended northwards by margin"""
        half = self.startbox_side / 2.0
        return abs(p.x - self.side / 2.0) <= half and p.y <= self.startbox_side + margin

    def clamp_startbox(self, p, inset=1.0):
        half = self.startbox_side / 2.0 - inset
        cx = self.side / 2.0
        return Vec2(clamp(p.x, cx - half, cx + half), clamp(p.y, inset, self.startbox_side - inset))
