"""One test per acceptance criterion; tolerances are pinned here."""

import glob
import os
import time
from fractions import Fraction as F

import pytest

from pinball import gadgets as G
from pinball import track as tk
from pinball.compiler import compile_program, step_simulate
from pinball.components import BallState, Bumper, BumperSchedule, MovingWall, Parabola
from pinball.errors import InvalidScene
from pinball.numeric import EXACT, BigFloat, Vec2, constant_fn
from pinball.pda import decode_spread, encode_bits, oracle_run, shipped_program, spread
from pinball.sceneio import load_scene_text, serialize_scene
from pinball.simulator import build_scene, dump_trace, run

from conftest import FIXTURES

BF = BigFloat(256)
TIGHT = BF.num(F(1, 10**20))
ROUNDING = BF.num(F(1, 10**70))


def _through(g, s, t=F(0), backend=EXACT):
    found, trace, _ = G.simulate_through(g, g.scene(backend), "in", F(s), F(t), backend)
    assert found
    return found[0][1], found[0][2], trace


def test_1_focus_constancy():
    a, h = F(1, 4), F(3)
    sc = build_scene([Parabola(a, F(0), F(0), F(-2), F(2), "cup")], target=Vec2(F(0), 1 / (4 * a)))
    t0 = time.perf_counter()
    for k in range(1, 65):
        x = F(2 * k, 65)
        out, _ = run(sc, BallState(Vec2(x, h), Vec2(F(0), F(-1)), F(0)), 5, 100)
        assert out.variant == "hit" and out.time == 4
    assert time.perf_counter() - t0 < 1.0


def test_2_space_multiplier_law():
    half = G.make_space_mult("half", with_reverser=True)
    rep = G.verify_transfer(half, 33, EXACT)
    assert rep.passed and rep.max_space_residual == 0 and len(rep.samples) == 33
    assert all(s.space_out == s.space_in / 2 for s in rep.samples)
    dbl = G.make_space_mult("double")
    rep = G.verify_transfer(dbl, 33, EXACT)
    assert rep.passed and rep.max_space_residual == 0
    assert all(s.space_out == 2 * s.space_in for s in rep.samples)


def test_3_push_pop_roundtrip():
    push = {b: G.make_push(b) for b in (0, 1)}
    pop = G.make_pop_space()
    for w in range(16):
        word = [(w >> (3 - i)) & 1 for i in range(4)]
        s = encode_bits([1, 1])
        for b in reversed(word):
            _, (_, s, _), _ = _through(push[b], s)
        assert s == encode_bits(word + [1, 1])
        got = []
        for _ in word:
            port, (_, s, _), _ = _through(pop, s)
            got.append(1 if port == "right" else 0)
        assert got == word and s == encode_bits([1, 1])


def _time_pop_gadget():
    lay = tk.Layout("tp_")
    t0 = G._time_start(F(1))
    early, late = tk.time_pop(lay, t0, tk.TimeOps(), F(1, 100), F(1, 15), tk.RIGHT, 4 * tk.clearance(t0) + 1)
    ports = {"0": G.Port.from_track("0", early), "1": G.Port.from_track("1", late)}
    maps = {("in", "0"): G._map(t0, early, 1), ("in", "1"): G._map(t0, late, 1)}
    return G.Gadget("time-pop", {}, lay, {"in": G.Port.from_track("in", t0)}, ports, maps, speed_cap=F(1, 15))


def test_4_worked_example():
    g = _time_pop_gadget()
    port, (t_cross, _, _), _ = _through(g, F(1), spread([1, 0, 1]), BF)
    assert port == "1"
    rest = t_cross - BF.num(g.outputs["1"].time_base)
    assert decode_spread(rest, backend=BF, tol=F(1, 2**100)) == [0, 1]
    assert encode_bits([0, 1]) == F(1, 4)
    _, (_, u, _), _ = _through(G.make_push(1), F(1, 2))
    assert u == F(3, 4)


def test_5_bumper_time_multiplier():
    g = G.make_time_mult_bumpers("double", v=1, d1=1, d2=1, d3=1)
    rep = G.verify_transfer(g, 17, BF)
    m = g.maps[("in", "out")]
    assert (m.time_slope, m.time_intercept) == (2, 3)
    assert len(rep.samples) == 17 and all(0 <= s.time_in < 2 for s in rep.samples)
    assert rep.passed
    assert rep.max_time_residual <= TIGHT and rep.max_speed_residual <= TIGHT


def test_6_moving_wall_multiplier():
    g = G.make_time_mult_moving("double", v=1, d2=1)
    rep = G.verify_transfer(g, 17, BF)
    m = g.maps[("in", "out")]
    assert m.time_slope == 2
    assert m.time_intercept - g.info["legs"] == F(1 + 2, 1)
    assert rep.passed and rep.max_time_residual <= TIGHT and rep.max_speed_residual <= TIGHT
    cap = g.speed_cap * g.speed
    for c in g.components():
        if isinstance(c, MovingWall):
            assert c.max_speed(EXACT) <= cap
            for ph in c.schedule.phases:
                sp = ph.speed_fn()
                for x in (F(0), F(1, 4), F(1, 2), F(3, 4), F(1)):
                    assert abs(sp(ph.p0 + x * (ph.p1 - ph.p0))) <= cap


def test_7_separator():
    g = G.make_time_separator(F(1, 100), F(1, 15), 1)
    early = [F(k, 32) for k in range(16)]
    late = [1 + F(k, 32) for k in range(16)]
    for t in early + late:
        port, (t_cross, _, _), _ = _through(g, F(1), t, BF)
        assert port == ("L" if t >= 1 else "E")
        if port == "L":
            assert abs(t_cross - BF.num(g.outputs["L"].time_base) - BF.num(t - 1)) <= TIGHT
    assert G.max_wall_speed(g) <= F(1, 15)


def test_8_ray_particle_mode():
    g = G.make_ray_time_mult("double", eps=F(1, 8))
    assert g.info["stages"] == 4
    rep = G.verify_transfer(g, 17, BF)
    assert rep.passed and rep.max_time_residual <= TIGHT
    assert g.maps[("in", "out")].time_slope == 2
    for t in (F(0), F(5, 8), F(15, 8)):
        _, _, trace = _through(g, F(1), t, BF)
        # the reflection law keeps |v|; what remains is 256-bit rounding
        assert all(abs(s.vel.norm2() - 1) <= ROUNDING for s in trace.states)
    bump = Bumper(Vec2(F(0), F(0)), Vec2(F(1), F(0)), 1, BumperSchedule(F(0), F(1), F(4)), constant_fn(F(1, 2)), "b")
    with pytest.raises(InvalidScene):
        build_scene([bump], backend=BF, constant_speed=True)


@pytest.mark.parametrize("name", ["flip", "counter", "mover"])
def test_9_pda_against_oracle(name):
    p = shipped_program(name)
    t0 = time.perf_counter()
    rep = step_simulate(compile_program(p), p.initial, 200)
    assert rep.configs == oracle_run(p, p.initial, 200)
    assert len(set(rep.reflections)) == 1
    assert time.perf_counter() - t0 < 60


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(FIXTURES, "*.json"))), ids=os.path.basename)
def test_10_roundtrip_and_determinism(path):
    sf = load_scene_text(open(path).read())
    again = load_scene_text(serialize_scene(sf))
    assert again == sf
    be = sf.backend_obj()
    runs = []
    for s in (sf, again):
        out, tr = run(s.build(be), s.initial_ball(be), 200, F(100))
        runs.append((out.describe(be), dump_trace(tr, be)))
    assert runs[0] == runs[1]
