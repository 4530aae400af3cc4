"""
    robolead.bridge
    ~~~~~~~~~~~~~~

    Tracker bridge: the controller as a TCP service speaking newline-delimited JSON, pose frames in
    and motion commands out, plus the synchronous client used by synthetic trackers.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import json
import math
import socket
import logging
import threading
import socketserver
from dataclasses import dataclass
from .errors import BridgeConnectionError, BridgeTimeoutError, BridgeError, RoboleadError
from .model import Vec2, Pose
from .utils import STATS


PROTOCOL = 1
DEFAULT_PORT = 7025
DEFAULT_TIMEOUT = 0.2
TRACE = 8


@dataclass(frozen=True)
class ObservationFrame:
    step: int
    time_s: float
    fish: Vec2
    robot: Pose
    fish_heading: float = None

    def to_dict(self):
        fish = {'x': self.fish.x, 'y': self.fish.y}
        if self.fish_heading is not None:
            fish['heading'] = self.fish_heading
        return {'step': self.step, 'time_s': self.time_s, 'fish': fish,
                'robot': {'x': self.robot.position.x, 'y': self.robot.position.y,
                          'heading': self.robot.heading}}

    @classmethod
    def from_dict(cls, data):
        """Validates a decoded frame

        Raises
        ------
        BridgeError
            If a field is missing or has the wrong type
        """

        try:
            step = data['step']
            if isinstance(step, bool) or not isinstance(step, int) or step < 0:
                raise ValueError('step must be a nonnegative integer')
            fish, robot = data['fish'], data['robot']
            heading = fish.get('heading')
            return cls(step, float(data.get('time_s', 0.0)), Vec2(_number(fish['x']), _number(fish['y'])),
                       Pose(Vec2(_number(robot['x']), _number(robot['y'])), _number(robot['heading'])),
                       None if heading is None else _number(heading))
        except (KeyError, TypeError, AttributeError, ValueError) as err:
            raise BridgeError('malformed observation: {}'.format(err))


def _number(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError('expected a finite number, got {!r}'.format(value))
    return float(value)


@dataclass(frozen=True)
class CommandFrame:
    step: int
    target: Vec2
    speed_factor: float
    phase: str
    carefulness: float
    avoid_score: float
    follow_score: float
    approach_idx: int

    def to_dict(self):
        return {'step': self.step, 'target': {'x': self.target.x, 'y': self.target.y},
                'speed_factor': self.speed_factor, 'phase': self.phase, 'carefulness': self.carefulness,
                'avoid_score': self.avoid_score, 'follow_score': self.follow_score,
                'approach_idx': self.approach_idx}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(int(data['step']), Vec2(data['target']['x'], data['target']['y']),
                       float(data['speed_factor']), str(data['phase']), float(data['carefulness']),
                       float(data['avoid_score']), float(data['follow_score']), int(data['approach_idx']))
        except (KeyError, TypeError, ValueError) as err:
            raise BridgeError('malformed command: {}'.format(err))


def encode(payload):
    return (json.dumps(payload, separators=(',', ':')) + '\n').encode('utf-8')


class BridgeHandler(socketserver.StreamRequestHandler):
    """One controller session per connection, one reply line per request line"""

    def new_session(self):
        return self.server.session_factory()

    def reply(self, payload):
        self.wfile.write(encode(payload))
        self.wfile.flush()

    def handle(self):
        logger = logging.getLogger(__name__)
        peer = '{}:{}'.format(*self.client_address[:2])
        logger.info('Bridge session from {:s}...'.format(peer))
        STATS.add('bridge_sessions')
        session = self.new_session()
        last_step = None
        self.reply({'hello': 'robolead', 'protocol': PROTOCOL, 'mode': self.server.mode_name})

        for line in self.rfile:
            STATS.add('bridge_frames')
            logger.log(TRACE, '{:s} > {:s}'.format(peer, line.decode('utf-8', 'replace').rstrip()))
            try:
                frame = ObservationFrame.from_dict(json.loads(line.decode('utf-8')))
            except (ValueError, BridgeError) as err:
                logger.warning('Malformed frame from {:s}: {}...'.format(peer, err))
                self.reply({'error': str(err)})
                continue

            if last_step is not None and frame.step != last_step + 1:
                logger.warning('Out-of-order step {:d} after {:d} from {:s}, resetting session...'
                               .format(frame.step, last_step, peer))
                self.reply({'reset': True, 'step': frame.step,
                            'reason': 'expected step {:d}'.format(last_step + 1)})
                session = self.new_session()
                last_step = None
                continue

            try:
                cmd = session.observe(frame.robot, frame.fish, frame.fish_heading)
            except RoboleadError as err:
                logger.warning('Frame {:d} from {:s} rejected: {}...'.format(frame.step, peer, err))
                self.reply({'error': str(err)})
                continue
            last_step = frame.step
            out = CommandFrame(frame.step, cmd.target, cmd.speed_factor, session.phase, session.carefulness,
                               session.avoidance, session.follow, session.approach_index)
            self.reply(out.to_dict())
        logger.info('Bridge session from {:s} closed...'.format(peer))


class BridgeServer(socketserver.ThreadingTCPServer):
    """Threaded controller service.

    Parameters:
    ----------
    address : {(str, int)}
        Host and port, port 0 picks a free one
    session_factory : {callable}
        Returns a fresh ControlSession for every connection or reset
    mode_name : {str}, optional
        Mode announced in the hello line (the default is 'competent')
    """
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, session_factory, mode_name='competent'):
        self.session_factory = session_factory
        self.mode_name = mode_name
        self.thread = None
        socketserver.ThreadingTCPServer.__init__(self, address, BridgeHandler)

    @property
    def port(self):
        return self.server_address[1]

    def start_background(self):
        self.thread = threading.Thread(target=self.serve_forever, daemon=True)
        self.thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self.thread is not None:
            self.thread.join()


def session_factory(params, mode, seed, law='integrator', release_margin=3.0, exit_timeout=180.0):
    """Factory of sessions that each draw from the controller stream of the given seed"""
    from .engine import ControlSession, trial_streams

    def factory():
        return ControlSession(params, mode, trial_streams(seed)[0], law, release_margin, exit_timeout)
    return factory


def serve(host, port, params, mode, seed, law='integrator', release_margin=3.0, exit_timeout=180.0):
    """Serves the controller until interrupted"""
    logger = logging.getLogger(__name__)
    server = BridgeServer((host, port), session_factory(params, mode, seed, law, release_margin, exit_timeout),
                          mode.name)
    logger.info('Serving {:s} controller on {:s}:{:d}...'.format(mode.name, host, server.port))
    try:
        server.serve_forever()
    finally:
        server.server_close()


class BridgeClient(object):
    """Synchronous client, one request and one reply at a time.

    Parameters:
    ----------
    host : {str}
        Server host
    port : {int}
        Server port
    timeout : {float}, optional
        Reply timeout in s (the default is 0.2)

    Raises
    ------
    BridgeConnectionError
        If the server cannot be reached
    """

    def __init__(self, host='localhost', port=DEFAULT_PORT, timeout=DEFAULT_TIMEOUT):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as err:
            raise BridgeConnectionError('{}:{}: {}'.format(host, port, err))
        self.sock.settimeout(timeout)
        self.file = self.sock.makefile('rb')
        self.hello = self.read()
        if self.hello.get('protocol') != PROTOCOL:
            raise BridgeError('unsupported protocol {!r}'.format(self.hello.get('protocol')))

    def read(self):
        try:
            line = self.file.readline()
        except socket.timeout:
            raise BridgeTimeoutError('no reply within {} s'.format(self.sock.gettimeout()))
        except OSError as err:
            raise BridgeConnectionError(err)
        if not line:
            raise BridgeConnectionError('server closed the connection')
        return json.loads(line.decode('utf-8'))

    def send(self, payload):
        try:
            self.sock.sendall(payload if isinstance(payload, bytes) else encode(payload))
        except OSError as err:
            raise BridgeConnectionError(err)

    def request(self, payload):
        self.send(payload)
        return self.read()

    def step(self, frame):
        reply = self.request(frame.to_dict())
        if 'error' in reply:
            raise BridgeError(reply['error'])
        if reply.get('reset'):
            raise BridgeError('session reset: {}'.format(reply.get('reason')))
        return CommandFrame.from_dict(reply)

    def close(self):
        self.file.close()
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def client_step(connection, frame):
    """Sends one observation frame and returns the CommandFrame reply"""
    return connection.step(frame)


class RemoteSession(object):
    """Session-like view of a bridge connection, lets run_trial drive a served controller"""

    def __init__(self, client, dt=0.04):
        self.client = client
        self.dt = dt
        self.step = 0
        self.milling_steps = 0
        self.last = None

    @property
    def released(self):
        return self.last is not None and self.last.phase != 'M'

    @property
    def phase(self):
        return self.last.phase

    @property
    def carefulness(self):
        return self.last.carefulness

    @property
    def avoidance(self):
        return self.last.avoid_score

    @property
    def follow(self):
        return self.last.follow_score

    @property
    def approach_index(self):
        return self.last.approach_idx

    def observe(self, robot, fish, fish_heading=None):
        from .controller import MotionCommand
        self.last = client_step(self.client, ObservationFrame(self.step, self.step * self.dt, fish, robot,
                                                              fish_heading))
        if self.last.phase == 'M':
            self.milling_steps += 1
        self.step += 1
        return MotionCommand(self.last.target, self.last.speed_factor)
