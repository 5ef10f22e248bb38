from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from pinball.components import (
    Bumper,
    BumperSchedule,
    MotionPhase,
    MovingWall,
    OneWayGate,
    Parabola,
    Schedule,
    Wall,
    bumper_effect,
    respond_bumper,
    respond_gate,
    respond_moving_wall,
    respond_wall,
    wall_state_at,
)
from pinball.errors import BallStopped, DegenerateContact, InvalidGeometry, InvalidScene
from pinball.numeric import RationalTimeFunction, Vec2, linear_fn

small = st.fractions(min_value=-20, max_value=20, max_denominator=200)


def V(x, y):
    return Vec2(F(x), F(y))


def test_wall_reflection_examples():
    assert respond_wall(V(1, -1), Wall(V(-1, 0), V(1, 0))) == V(1, 1)
    assert respond_wall(V(0, -2), Wall(V(0, 0), V(1, 1))) == V(-2, 0)
    assert respond_wall(V(5, 0), Wall(V(0, -1), V(0, 1))) == V(-5, 0)


def test_wall_endpoint_contact_is_degenerate():
    with pytest.raises(DegenerateContact):
        respond_wall(V(0, -1), Wall(V(0, 0), V(1, 0)), contact_u=F(0))


@given(small, small)
def test_wall_keeps_speed(vx, vy):
    if vy == 0:
        return
    out = respond_wall(Vec2(vx, vy), Wall(V(-1, 0), V(1, 0)))
    assert out.norm2() == vx * vx + vy * vy
    assert out == Vec2(vx, -vy)


def test_gate_pass_and_block():
    g = OneWayGate(V(1, 0), V(-1, 0))  # pass side is y < 0 (left of start -> end)
    assert g.side(V(0, -1)) > 0
    assert respond_gate(V(0, 1), g, g.side(V(0, -1))) == ("pass", V(0, 1))
    assert respond_gate(V(0, -1), g, g.side(V(0, 1))) == ("reflect", V(0, 1))
    with pytest.raises(DegenerateContact):
        respond_gate(V(1, 0), g, 1)


def test_parabola_focus_formula():
    p = Parabola(F(1, 4), F(-1), F(2), F(-5), F(5))
    # vertex (2, 1), focal length 1/(4a) = 1
    assert p.focus() == V(2, 2)
    assert p.focal_length() == 1
    with pytest.raises(InvalidGeometry):
        Parabola(F(0), F(0), F(0), F(0), F(1))


def _half_speed_wall(t_start=F(2)):
    phases = (
        MotionPhase.direct(F(1), linear_fn(F(0), F(1, 2))),
        MotionPhase.glide(F(1), F(1, 2), F(0)),
    )
    return MovingWall(V(0, 0), V(0, 1), V(1, 0), Schedule(t_start, phases, F(10)))


def test_wall_state_examples():
    m = _half_speed_wall()
    assert wall_state_at(m, F(1)) == (0, V(0, 0))
    assert wall_state_at(m, F(5, 2)) == (F(1, 4), V(F(1, 2), 0))
    assert wall_state_at(m, F(12))[0] == 0
    m.validate()


def test_schedule_must_return_home():
    phases = (MotionPhase.direct(F(1), linear_fn(F(0), F(1, 2))),)
    with pytest.raises(InvalidScene):
        Schedule(F(0), phases, F(4)).validate()


def test_moving_wall_response_examples():
    assert respond_moving_wall(V(-3, 0), V(1, 0), V(1, 0)) == V(5, 0)
    assert respond_moving_wall(V(-3, 0), V(-1, 0), V(1, 0)) == V(1, 0)
    assert respond_moving_wall(V(1, -2), V(0, 0), V(0, 1)) == respond_wall(V(1, -2), Wall(V(-1, 0), V(1, 0)))


@given(small, small, st.fractions(min_value=-1, max_value=1, max_denominator=50))
def test_moving_wall_changes_normal_speed_by_twice_wall_speed(vx, vy, u):
    if vx >= u:
        return
    out = respond_moving_wall(Vec2(vx, vy), V(u, 0), V(1, 0))
    assert out == Vec2(2 * u - vx, vy)


def _bumper(sign=1, accel=RationalTimeFunction((F(1),), (F(1), F(1)))):
    # a(tau) = 1/(tau + 1): v = 1, delta2 = 1
    return Bumper(V(0, 0), V(1, 0), sign, BumperSchedule(F(1), F(1), F(5)), accel)


def test_bumper_effect_examples():
    bp = _bumper()
    assert bumper_effect(bp, F(1, 2)) == 0
    assert bumper_effect(bp, F(3, 2)) == F(1, 3)
    assert bumper_effect(bp, F(3)) == 0
    assert bumper_effect(bp, F(13, 2)) == F(1, 3)


def test_bumper_response_examples():
    const = lambda c: RationalTimeFunction((F(c),))
    fast = Bumper(V(0, 0), V(1, 0), 1, BumperSchedule(F(0), F(2), F(5)), const(1))
    assert respond_bumper(V(0, -1), fast, F(1, 2)) == V(0, F(3, 2))
    assert respond_bumper(V(0, -1), fast, F(3)) == V(0, 1)
    stop = Bumper(V(0, 0), V(1, 0), -1, BumperSchedule(F(0), F(2), F(5)), const(1))
    with pytest.raises(BallStopped):
        respond_bumper(V(0, -1), stop, F(1))
