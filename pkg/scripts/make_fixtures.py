"""Regenerate the scene fixtures under tests/fixtures."""

import os
import sys
from fractions import Fraction as F

from pinball import gadgets as G
from pinball.components import BallState, MotionPhase, MovingWall, Schedule, Wall
from pinball.numeric import Vec2
from pinball.sceneio import SceneFile, write_scene_file

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")


def V(x, y):
    return Vec2(F(x), F(y))


def gadget_scene(g, s, t, backend="exact", **kw):
    port = g.inputs["in"]
    b = BallState(port.point(F(s)), port.inward * g.speed, port.time_base + F(t))
    return SceneFile(g.components(), b, None, backend, 256, g.speed_cap, g.speed if g.speed_cap else None, g.constant_speed, {"gadget": g.name}, **kw)


def fixtures():
    yield "hit", SceneFile([Wall(V(-1, 0), V(1, 0), "floor")], BallState(V(0, 2), V(0, -1), F(0)), V(0, 1), meta={"note": "hit at t=1"})
    yield "pingpong", SceneFile(
        [Wall(V(-1, 0), V(1, 0), "lo"), Wall(V(-1, 2), V(1, 2), "hi")], BallState(V(0, 1), V(0, 1), F(0)), V(5, 5)
    )
    yield "escape", SceneFile([Wall(V(-1, 0), V(1, 0), "floor")], BallState(V(0, 1), V(0, 1), F(0)), V(0, -1))
    half = G.make_space_mult("half", with_reverser=True)
    sf = gadget_scene(half, F(3, 4), 0)
    sf.target = half.outputs["out"].point(F(3, 8))
    yield "space_half", sf
    phases = (MotionPhase.glide(F(1), F(0), F(1, 2)), MotionPhase.glide(F(1), F(1, 2), F(0)))
    mw = MovingWall(V(0, 0), V(1, 0), V(0, 1), Schedule(F(0), phases, F(4)), "mw")
    yield "moving_wall", SceneFile([mw], BallState(V(F(1, 2), 1), V(0, -1), F(0)), V(F(1, 2), 3), backend="bigfloat")
    yield "bumper_double", gadget_scene(G.make_time_mult_bumpers("double"), 1, F(1, 2), backend="bigfloat")
    yield "separator", gadget_scene(G.make_time_separator(), 1, F(1, 4), backend="bigfloat")


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, sf in fixtures():
        path = os.path.join(OUT, f"{name}.json")
        write_scene_file(path, sf)
        print(path)


if __name__ == "__main__":
    main()
