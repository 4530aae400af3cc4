"""
    robolead.kinematics
    ~~~~~~~~~~~~~~

    Turn-then-drive plant of the differential drive robot and a point integrator for fish.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import math
from dataclasses import dataclass
from .errors import InvalidParameterError
from .model import Vec2, Pose, normalize_angle, clamp


@dataclass(frozen=True)
class RobotMotionParams:
    max_turn_rate: float = 2.0 * math.pi
    accel: float = 60.0
    decel: float = 60.0
    arrival_radius: float = 1.0
    drive_gate: float = math.radians(30.0)

    def __post_init__(self):
        for name in ('max_turn_rate', 'accel', 'decel', 'arrival_radius', 'drive_gate'):
            if not getattr(self, name) > 0:
                raise InvalidParameterError('{:s} must be positive'.format(name))


def advance_robot(pose, speed, cmd, dt, params, arena, speed_unit=25.0, max_speed=30.0):
    """Moves the robot one step towards the commanded target.

    The robot first turns towards the target (rate limited) and only drives forward while the
    remaining heading error is below the drive gate. Forward speed ramps towards the commanded
    cruise speed and ramps down inside the braking distance of the target.

    Parameters:
    ----------
    pose : {Pose}
        Current robot pose
    speed : {float}
        Current forward speed in cm/s
    cmd : {MotionCommand}
        Target and speed factor
    dt : {float}
        Time step in s
    params : {RobotMotionParams}
        Plant limits
    arena : {ArenaSpec}
        Arena to clamp into
    speed_unit : {float}, optional
        Speed of a unit speed factor in cm/s (the default is 25)
    max_speed : {float}, optional
        Hard speed cap in cm/s (the default is 30)

    Returns
    -------
    (Pose, float)
        New pose and forward speed
    """

    to_target = cmd.target - pose.position
    dist = to_target.norm()
    if dist <= params.arrival_radius:
        return pose, 0.0

    error = normalize_angle(to_target.angle() - pose.heading)
    max_turn = params.max_turn_rate * dt
    turn = clamp(error, -max_turn, max_turn)
    heading = pose.heading + turn
    remaining = abs(error - turn)

    cruise = min(max(cmd.speed_factor, 0.0) * speed_unit, max_speed)
    if remaining > params.drive_gate:
        wanted = 0.0
    else:
        braking = math.sqrt(2.0 * params.decel * max(dist - params.arrival_radius, 0.0))
        wanted = min(cruise, braking)

    if speed > cruise:
        speed = cruise
    if speed < wanted:
        speed = min(wanted, speed + params.accel * dt)
    else:
        speed = max(wanted, speed - params.decel * dt)

    step = min(speed * dt, dist)
    position = pose.position + Vec2(math.cos(heading), math.sin(heading)) * step
    if not arena.contains(position):
        position = arena.clamp(position)
        speed = 0.0
    return Pose(position, heading), speed


def advance_point(pos, velocity, dt, arena):
    """Euler step of a point, clamped to the arena walls"""
    return arena.clamp(Vec2(pos.x + velocity.x * dt, pos.y + velocity.y * dt))


def reflect_velocity(pos, velocity, arena):
    """Mirrors the velocity components that point out of the arena at a wall contact"""
    vx, vy = velocity
    if (pos.x <= 0.0 and vx < 0) or (pos.x >= arena.side and vx > 0):
        vx = -vx
    if (pos.y <= 0.0 and vy < 0) or (pos.y >= arena.side and vy > 0):
        vy = -vy
    return Vec2(vx, vy)
