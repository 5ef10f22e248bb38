from fractions import Fraction as F

import pytest

from pinball.components import BallState, MotionPhase, MovingWall, Parabola, Schedule, Wall
from pinball.errors import InvalidScene
from pinball.gadgets import make_space_mult
from pinball.numeric import EXACT, BigFloat, Vec2
from pinball.simulator import build_scene, dump_trace, next_event, parse_trace, run, target_on_segment


def V(x, y):
    return Vec2(F(x), F(y))


def ball(px, py, vx, vy, t=0):
    return BallState(V(px, py), V(vx, vy), F(t))


def test_next_event_wall_and_parabola():
    sc = build_scene([Wall(V(-1, 0), V(1, 0), "floor")])
    ev = next_event(ball(0, 2, 0, -1), sc)
    assert (ev.time, ev.point, ev.component_id, ev.kind) == (2, V(0, 0), "floor", "reflect")
    sc = build_scene([Parabola(F(1), F(0), F(0), F(0), F(2), "cup")])
    ev = next_event(ball(F(3, 2), 4, 0, -1), sc)
    assert ev.point == Vec2(F(3, 2), F(9, 4))
    assert next_event(ball(0, 0, 1, 0), build_scene([])) is None


def test_hit_before_any_event():
    sc = build_scene([Wall(V(-1, 0), V(1, 0))], target=V(0, 1))
    out, tr = run(sc, ball(0, 2, 0, -1), 10, 100)
    assert out.variant == "hit" and out.time == 1 and tr.events == []
    assert out.describe() == "Hit t=1"


def test_ping_pong_exhausts_event_bound():
    sc = build_scene([Wall(V(-1, 0), V(1, 0)), Wall(V(-1, 2), V(1, 2))], target=V(5, 5))
    out, tr = run(sc, ball(0, 1, 0, 1), 10, 1000)
    assert out.variant == "bound" and out.events_used == 10
    assert [e.time for e in tr.events] == [1 + 2 * k for k in range(10)]


def test_escape():
    sc = build_scene([Wall(V(-1, 0), V(1, 0))])
    out, _ = run(sc, ball(0, 1, 0, 1), 10, 100)
    assert out.variant == "escaped"


def test_half_stage_reaches_target_at_closed_form_exit():
    g = make_space_mult("half", with_reverser=True)
    out_port = g.outputs["out"]
    target = out_port.point(F(1, 4))  # entry offset 1/2 -> 1/4
    sc = build_scene(g.components(), target=target)
    start = g.inputs["in"].point(F(1, 2))
    out, _ = run(sc, BallState(start, V(0, -1), F(0)), 20, 1000)
    assert out.variant == "hit"
    assert out.time == g.maps[("in", "out")].time_intercept


def test_target_on_segment():
    assert target_on_segment(V(0, 0), V(2, 2), V(1, 1)) == F(1, 2)
    assert target_on_segment(V(0, 0), V(2, 2), V(5, 5)) is None
    be = BigFloat(128)
    p0, p1 = V(0, 0).convert(be), V(2, 2).convert(be)
    near = Vec2(be.num(1), be.num(1) + be.mpf("1e-12"))
    assert target_on_segment(p0, p1, near, be.mpf("1e-9")) is not None


def test_trace_dump_has_header_plus_one_line_per_event():
    sc = build_scene([Wall(V(-1, 0), V(1, 0)), Wall(V(-1, 2), V(1, 2))])
    _, tr = run(sc, ball(0, 1, 0, 1), 7, 1000)
    text = dump_trace(tr)
    assert len(text.splitlines()) == len(tr.events) + 1
    _, evs = parse_trace(text)
    assert evs == tr.events


def test_repeated_runs_are_identical():
    be = BigFloat(256)
    g = make_space_mult("double")
    sc = g.scene(be)
    b0 = BallState(g.inputs["in"].point(F(1, 3)), V(0, -1), F(0))
    a = dump_trace(run(sc, b0, 20, 100)[1], be)
    b = dump_trace(run(sc, b0, 20, 100)[1], be)
    assert a == b


def _mover(speed):
    phases = (MotionPhase.glide(F(1), F(0), F(speed)), MotionPhase.glide(F(1), F(speed), F(0)))
    return MovingWall(V(0, 0), V(1, 0), V(0, 1), Schedule(F(0), phases, F(4)), "mw")


def test_loader_rules():
    with pytest.raises(InvalidScene):
        build_scene([_mover(F(1, 2))])  # exact backend without opt-in
    with pytest.raises(InvalidScene):
        build_scene([_mover(F(1, 2))], backend=BigFloat(128), speed_cap_ratio=F(1, 4), ref_speed=F(1))
    build_scene([_mover(F(1, 8))], backend=BigFloat(128), speed_cap_ratio=F(1, 4), ref_speed=F(1))
    with pytest.raises(InvalidScene):
        build_scene([Wall(V(0, 0), V(1, 0), "w"), Wall(V(0, 1), V(1, 1), "w")])


def test_moving_wall_bounce_under_bigfloat():
    be = BigFloat(256)
    # wall at y = 0 rising at speed 1/2 during [0, 1)
    sc = build_scene([_mover(F(1, 2))], backend=be)
    out, tr = run(sc, ball(F(1, 2), 1, 0, -1), 1, 10)
    ev = tr.events[0]
    # ball y = 1 - t meets wall y = t/2 at t = 2/3
    assert abs(ev.time - be.num(F(2, 3))) < be.tie * 4
    assert abs(tr.states[1].vel.y - 2) < be.tie * 4
