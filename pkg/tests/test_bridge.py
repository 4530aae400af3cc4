#!/usr/bin/env pytest -v
"""
    robolead.tests.test_bridge
    ~~~~~~~~~~~~~~

    Tests for the tracker bridge over a loopback connection.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import socket
import logging
import pytest

from robolead.errors import BridgeError, BridgeConnectionError, BridgeTimeoutError
from robolead.model import Vec2, Pose
from robolead.params import Params
from robolead.controller import Competent, Fixed
from robolead.engine import TrialConfig, run_trial
from robolead.bridge import (PROTOCOL, ObservationFrame, CommandFrame, BridgeServer, BridgeClient, RemoteSession,
                             session_factory, client_step, encode)


logging.basicConfig(level=logging.INFO, format='%(asctime)s %(levelname)s: %(message)s',
                    datefmt='%b %d %H:%M:%S')
logger = logging.getLogger(__name__)

TIMEOUT = 5.0


def start_server(mode, seed, exit_timeout=180.0):
    factory = session_factory(Params(), mode, seed, exit_timeout=exit_timeout)
    return BridgeServer(('localhost', 0), factory, mode.name).start_background()


@pytest.fixture(scope='module')
def server():
    """Reckless fixed controller, every session seeded alike"""
    server = start_server(Fixed(0.0), 1)
    yield server
    server.stop()


def frame(step, fish=Vec2(10, 0), robot=Pose(Vec2(0, 0), 0.0)):
    return ObservationFrame(step, step * 0.04, fish, robot)


def free_port():
    with socket.socket() as sock:
        sock.bind(('localhost', 0))
        return sock.getsockname()[1]


class TestFrames(object):
    def test_observation_from_dict(self):
        data = {'step': 3, 'time_s': 0.12, 'fish': {'x': 1, 'y': 2.5, 'heading': 0.1},
                'robot': {'x': 4, 'y': 5, 'heading': -1.0}}
        obs = ObservationFrame.from_dict(data)
        assert obs == ObservationFrame(3, 0.12, Vec2(1, 2.5), Pose(Vec2(4, 5), -1.0), 0.1)
        assert ObservationFrame.from_dict(obs.to_dict()) == obs

    @pytest.mark.parametrize('data', [
        {'step': -1, 'fish': {'x': 1, 'y': 2}, 'robot': {'x': 1, 'y': 2, 'heading': 0}},
        {'step': True, 'fish': {'x': 1, 'y': 2}, 'robot': {'x': 1, 'y': 2, 'heading': 0}},
        {'step': 1, 'fish': {'x': 1, 'y': 2}, 'robot': {'x': 1, 'y': 2}},
        {'step': 1, 'fish': {'x': '1', 'y': 2}, 'robot': {'x': 1, 'y': 2, 'heading': 0}},
        {'step': 1, 'fish': {'x': float('nan'), 'y': 2}, 'robot': {'x': 1, 'y': 2, 'heading': 0}},
        {'step': 1, 'fish': [1, 2], 'robot': {'x': 1, 'y': 2, 'heading': 0}},
    ])
    def test_observation_rejects(self, data):
        with pytest.raises(BridgeError):
            ObservationFrame.from_dict(data)

    def test_encode(self):
        assert encode({'a': 1, 'b': [1, 2]}) == b'{"a":1,"b":[1,2]}\n'


class TestServer(object):
    def test_hello(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as client:
            assert client.hello == {'hello': 'robolead', 'protocol': PROTOCOL, 'mode': 'fixed'}

    def test_reckless_approach(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as client:
            reply = client_step(client, frame(0))
        assert isinstance(reply, CommandFrame)
        assert reply.step == 0
        assert reply.phase == 'A'
        assert reply.approach_idx == 1
        assert reply.carefulness == 0.0
        assert reply.target.x == pytest.approx(4.0)
        assert reply.target.y == pytest.approx(0.0, abs=1e-12)
        assert reply.speed_factor == pytest.approx(1.2)

    def test_garbage_line(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as client:
            client.send(b'this is not json\n')
            assert 'error' in client.read()
            assert 'malformed observation' in client.request({'step': 0, 'fish': {}})['error']
            assert client.step(frame(0)).phase == 'A'

    def test_out_of_order(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as client:
            first = client.step(frame(0))
            client.step(frame(1))
            reply = client.request(frame(5).to_dict())
            assert reply == {'reset': True, 'step': 5, 'reason': 'expected step 2'}
            assert client.step(frame(0)) == first
            with pytest.raises(BridgeError):
                client.step(frame(3))

    def test_sessions_independent(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as a:
            firsts = [a.step(frame(i, fish=Vec2(10 + i, 0))) for i in range(10)]
            with BridgeClient('localhost', server.port, TIMEOUT) as b:
                assert b.step(frame(0, fish=Vec2(10, 0))) == firsts[0]
                assert a.step(frame(10)).step == 10

    def test_burst_keeps_order(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as client:
            fish = Vec2(50, 9.5)
            robot = Pose(Vec2(60, 34), 0.0)
            replies = []
            for start in range(0, 1000, 100):
                client.send(b''.join(encode(frame(i, fish, robot).to_dict()) for i in range(start, start + 100)))
                replies.extend(client.read() for _ in range(100))
        assert [r['step'] for r in replies] == list(range(1000))
        assert all(r['phase'] == 'M' for r in replies)


class TestClient(object):
    def test_no_server(self):
        with pytest.raises(BridgeConnectionError):
            BridgeClient('localhost', free_port(), 0.5)

    def test_timeout(self):
        with socket.socket() as silent:
            silent.bind(('localhost', 0))
            silent.listen(1)
            with pytest.raises(BridgeTimeoutError):
                BridgeClient('localhost', silent.getsockname()[1], 0.2)

    def test_connection_closed(self):
        server = start_server(Competent(), 1)
        client = BridgeClient('localhost', server.port, TIMEOUT)
        client.step(frame(0))
        client.sock.shutdown(socket.SHUT_WR)
        with pytest.raises(BridgeConnectionError):
            client.read()
        client.close()
        server.stop()

    def test_non_object_frame(self, server):
        with BridgeClient('localhost', server.port, TIMEOUT) as client:
            assert 'malformed observation' in client.request(b'[]\n')['error']


class TestLoopback(object):
    def loopback(self, config):
        server = start_server(config.mode, config.seed, config.exit_timeout)
        try:
            with BridgeClient('localhost', server.port, TIMEOUT) as client:
                return run_trial(config, session=RemoteSession(client))
        finally:
            server.stop()

    def test_matches_in_process(self):
        config = TrialConfig(mode=Competent(), seed=3, duration=6.0, exit_timeout=3.0)
        remote = self.loopback(config)
        assert remote == run_trial(config)

    @pytest.mark.slow
    def test_full_trial_matches_in_process(self):
        config = TrialConfig(mode=Competent(), seed=2024)
        assert self.loopback(config) == run_trial(config)
