#!/usr/bin/env pytest -v
"""
    robolead.tests.test_utils
    ~~~~~~~~~~~~~~

    Tests for parameter files, overrides, setup and run statistics.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import os
import json
import logging
import pytest
import psutil

from robolead.errors import InvalidParameterError
from robolead.params import Params, ControllerParams
from robolead.fish import Population
from robolead.utils import (STATS, OUT_ENV, read_params, read_population, apply_overrides, params_hash,
                            create_config, check_pid, output_root)


logging.basicConfig(level=logging.INFO, format='%(asctime)s %(levelname)s: %(message)s',
                    datefmt='%b %d %H:%M:%S')
logger = logging.getLogger(__name__)


def write_json(path, data):
    with open(path, 'w') as file:
        file.write(data if isinstance(data, str) else json.dumps(data))
    return path


class TestFiles(object):
    def test_shipped_defaults(self):
        assert read_params() == Params()
        assert read_population() == Population()

    def test_partial_file(self, tmp_path):
        path = write_json(str(tmp_path / 'params.json'), {'controller': {'d_I': 40.0}})
        params = read_params(path)
        assert params.controller.d_I == 40.0
        assert params.follow == Params().follow

    @pytest.mark.parametrize('content', ['{not json', '[1, 2]', '{"controller": {"v_s": 20.0}}',
                                         '{"controller": {"speed": 1}}', '{"follow": {"min_len_steps": true}}',
                                         '{"follow": {"max_gap_steps": "many"}}', '{"follow": {"min_len_steps": 12.5}}',
                                         '{"controller": {"d_I": "far"}}'])
    def test_bad_params(self, tmp_path, content, caplog):
        assert read_params(write_json(str(tmp_path / 'params.json'), content)) is None
        assert any(record.levelno == logging.ERROR for record in caplog.records)

    def test_missing(self, tmp_path):
        assert read_params(str(tmp_path / 'none.json')) is None
        assert read_population(str(tmp_path / 'none.json')) is None

    def test_bad_population(self, tmp_path):
        path = write_json(str(tmp_path / 'population.json'), {'personality': {'boldness': {'dist': 'beta'}}})
        assert read_population(path) is None


class TestOverrides(object):
    def test_apply(self):
        params = apply_overrides(Params(), ['controller.d_I=40', 'follow.min_len_steps=100'])
        assert params.controller.d_I == 40.0
        assert params.follow.min_len_steps == 100
        assert apply_overrides(params, []) is params

    def test_reference(self):
        params = apply_overrides(Params(), ['reference=[0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1]'])
        assert params.reference.frequencies == pytest.approx((0.1,) * 10)

    @pytest.mark.parametrize('override', ['controller.d_I', 'nothing.d_I=1', 'controller.gravity=1',
                                          'd_I=1', 'controller.v_s=50', 'follow.min_len_steps=true',
                                          'follow.max_gap_steps=abc'])
    def test_rejects(self, override):
        with pytest.raises(InvalidParameterError):
            apply_overrides(Params(), [override])

    def test_hash(self):
        assert params_hash(Params()) == params_hash(Params())
        assert len(params_hash(Params())) == 64
        other = Params(controller=ControllerParams(d_I=40.0))
        assert params_hash(other) != params_hash(Params())


class TestSetup(object):
    def test_create_config(self, tmp_path):
        path = str(tmp_path / 'a' / 'b')
        assert create_config(path) == 0
        assert read_params(os.path.join(path, 'params.json')) == Params()
        assert read_population(os.path.join(path, 'population.json')) == Population()

    def test_keeps_existing(self, tmp_path):
        path = str(tmp_path)
        write_json(os.path.join(path, 'params.json'), {'controller': {'d_I': 40.0}})
        assert create_config(path) == 0
        assert read_params(os.path.join(path, 'params.json')).controller.d_I == 40.0
        assert os.path.isfile(os.path.join(path, 'population.json'))


class TestPid(object):
    def test_no_file(self, tmp_path):
        assert check_pid(str(tmp_path / 'robolead.pid'))

    def test_live_process(self, tmp_path):
        path = write_json(str(tmp_path / 'robolead.pid'), '{}\n'.format(os.getpid()))
        assert not check_pid(path)
        assert os.path.isfile(path)

    def test_stale(self, tmp_path):
        pid = max(psutil.pids()) + 100000
        path = write_json(str(tmp_path / 'robolead.pid'), '{}\n'.format(pid))
        assert check_pid(path)
        assert not os.path.exists(path)

    def test_garbage(self, tmp_path):
        path = write_json(str(tmp_path / 'robolead.pid'), 'pid\n')
        assert check_pid(path)
        assert not os.path.exists(path)


class TestMisc(object):
    def test_output_root(self, monkeypatch, tmp_path):
        monkeypatch.delenv(OUT_ENV, raising=False)
        assert output_root('x') == 'x'
        assert output_root() == os.getcwd()
        monkeypatch.setenv(OUT_ENV, str(tmp_path))
        assert output_root() == str(tmp_path)
        assert output_root('x') == 'x'

    def test_stats(self):
        STATS.reset()
        STATS.add('trials')
        STATS.add('trials')
        STATS.merge({'trials': 3, 'steps': 10})
        assert STATS.data == {'trials': 5, 'steps': 10}
        STATS.log()
        STATS.reset()
        assert STATS.data == {}
