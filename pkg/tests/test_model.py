#!/usr/bin/env pytest -v
"""
    robolead.tests.test_model
    ~~~~~~~~~~~~~~

    Tests for the geometric value types and the parameter set.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
import logging
import pytest
import numpy as np

from robolead.errors import InvalidParameterError, DegenerateGeometryError
from robolead.model import Vec2, Pose, ArenaSpec, TimeBase, clip_normalize, normalize_angle, rotate
from robolead.params import (Params, ControllerParams, FollowParams, ReferenceDistribution,
                             REFERENCE_FREQUENCIES)


logging.basicConfig(level=logging.INFO, format='%(asctime)s %(levelname)s: %(message)s',
                    datefmt='%b %d %H:%M:%S')
logger = logging.getLogger(__name__)


class TestGeometry(object):
    def test_vec2_arithmetic(self):
        a = Vec2(1, 2)
        b = Vec2(3, -1)
        assert a + b == Vec2(4, 1)
        assert a - b == Vec2(-2, 3)
        assert 2 * a == a * 2 == Vec2(2, 4)
        assert -a == Vec2(-1, -2)
        assert a.dot(b) == 1.0
        assert Vec2(1, 0).cross(Vec2(0, 1)) == 1.0
        assert Vec2(3, 4).norm() == 5.0

    def test_vec2_arithmetic_types(self):
        a = Vec2(1, 2)
        for v in (a + a, a - a, -a, a * np.float64(1.5), a.unit(), Vec2.polar(2.0, 0.3)):
            assert type(v) is Vec2
            assert type(v.x) is float and type(v.y) is float

    def test_vec2_rejects_non_finite(self):
        with pytest.raises(InvalidParameterError):
            Vec2(math.nan, 0.0)
        with pytest.raises(InvalidParameterError):
            Vec2(0.0, math.inf)

    def test_zero_vector_has_no_direction(self):
        with pytest.raises(DegenerateGeometryError):
            Vec2(0, 0).unit()

    def test_pose_heading_normalized(self):
        pose = Pose(Vec2(0, 0), 2.5 * math.pi)
        assert -math.pi <= pose.heading < math.pi
        assert pose.heading == pytest.approx(math.pi / 2)
        assert normalize_angle(2 * math.pi + 0.5) == pytest.approx(0.5)

    def test_rotate_counterclockwise(self):
        v = rotate(Vec2(4, 0), math.pi / 2)
        assert v.x == pytest.approx(0.0, abs=1e-12)
        assert v.y == pytest.approx(4.0)

    def test_clip_normalize(self):
        assert clip_normalize(6.25, 2.5, 10) == 0.5
        assert clip_normalize(-3, 2.5, 10) == 0.0
        assert clip_normalize(50, 2.5, 10) == 1.0
        with pytest.raises(InvalidParameterError):
            clip_normalize(1, 3, 3)

    def test_clip_normalize_monotone(self):
        xs = np.linspace(-5, 20, 200)
        ys = [clip_normalize(x, 2.5, 10) for x in xs]
        assert all(b >= a for a, b in zip(ys, ys[1:]))


class TestArena(object):
    def test_corners_clockwise(self):
        corners = ArenaSpec().corners()
        assert corners == (Vec2(10, 10), Vec2(10, 90), Vec2(90, 90), Vec2(90, 10))
        # clockwise: consecutive edges turn right
        for i in range(4):
            a, b, c = corners[i], corners[(i + 1) % 4], corners[(i + 2) % 4]
            assert (b - a).cross(c - b) < 0

    def test_startbox(self):
        arena = ArenaSpec()
        assert arena.door == Vec2(50, 19)
        assert arena.in_startbox(arena.startbox_center())
        assert not arena.in_startbox(Vec2(50, 21))
        assert arena.in_startbox(Vec2(50, 21), margin=3)
        assert not arena.in_startbox(Vec2(20, 5))

    def test_clamp(self):
        arena = ArenaSpec()
        assert arena.clamp(Vec2(-5, 120)) == Vec2(0, 100)
        assert arena.contains(Vec2(0, 100))
        assert not arena.contains(Vec2(100.1, 50))

    def test_invalid_arena(self):
        with pytest.raises(InvalidParameterError):
            ArenaSpec(side=100, corner_inset=60)
        with pytest.raises(InvalidParameterError):
            ArenaSpec(startbox_door_width=30)

    def test_timebase(self):
        tb = TimeBase()
        assert tb.dt == 0.04
        assert tb.steps(600) == 15000
        with pytest.raises(InvalidParameterError):
            TimeBase(rate=0)


class TestParams(object):
    def test_defaults_valid(self):
        params = Params()
        assert params.controller.milling_radius == 10.0
        assert params.controller.speed_unit * (1 + params.controller.base_speed_s_c) == 30.0

    def test_invalid_controller_params(self):
        with pytest.raises(InvalidParameterError):
            ControllerParams(v_s=10, v_p=2.5)
        with pytest.raises(InvalidParameterError):
            ControllerParams(d_close=12, d_comf=6)
        with pytest.raises(InvalidParameterError):
            ControllerParams(max_speed=40)
        with pytest.raises(InvalidParameterError):
            FollowParams(threshold=1.5)

    def test_dict_round_trip(self):
        params = Params(controller=ControllerParams(eta=0.1))
        assert Params.from_dict(params.to_dict()) == params

    def test_partial_dict_takes_defaults(self):
        params = Params.from_dict({'controller': {'d_I': 40}, 'version': 1})
        assert params.controller.d_I == 40.0
        assert params.follow == FollowParams()

    def test_unknown_keys_rejected(self):
        with pytest.raises(InvalidParameterError):
            Params.from_dict({'controler': {}})
        with pytest.raises(InvalidParameterError):
            Params.from_dict({'controller': {'speed': 3}})
        with pytest.raises(InvalidParameterError):
            Params.from_dict({'follow': {'min_len_steps': 10.5}})


class TestReference(object):
    def test_reference_table(self):
        ref = ReferenceDistribution()
        assert sum(ref.frequencies) == pytest.approx(1.0)
        assert ref.frequencies[-1] == 0.328655
        assert ref.frequencies == REFERENCE_FREQUENCIES

    def test_bin_convention(self):
        index = ReferenceDistribution.bin_index([0.0, 0.1, 0.1000001, 0.55, 0.9, 1.0])
        assert list(index) == [0, 0, 1, 5, 8, 9]

    def test_from_samples(self):
        ref = ReferenceDistribution.from_samples([0.05, 0.05, 0.95, 0.95])
        assert ref.frequencies[0] == 0.5
        assert ref.frequencies[9] == 0.5
        assert ref.total_variation(ref) == 0.0
        weighted = ReferenceDistribution.from_samples([0.05, 0.95], weights=[3, 1])
        assert weighted.frequencies[0] == 0.75

    def test_invalid_reference(self):
        with pytest.raises(InvalidParameterError):
            ReferenceDistribution((0.5, 0.5))
        with pytest.raises(InvalidParameterError):
            ReferenceDistribution((0.2,) * 10)
        with pytest.raises(InvalidParameterError):
            ReferenceDistribution.from_samples([])
