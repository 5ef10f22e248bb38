from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from pinball import gadgets as G
from pinball import track as tk
from pinball.components import Parabola
from pinball.errors import InvalidGeometry, VerificationFailure
from pinball.numeric import EXACT, BigFloat, Vec2

BF = BigFloat(256)


def through(g, s, t=F(0), inp="in", backend=EXACT):
    found, trace, _ = G.simulate_through(g, g.scene(backend), inp, F(s), F(t), backend)
    assert found, "ball reached no output port"
    t_cross, u, vel = found[0][2]
    return found[0][1], u, t_cross, vel, trace


@pytest.mark.parametrize(
    "name,kw",
    [
        ("space-mult-half", {}),
        ("space-mult-double", {}),
        ("order-reverser", {}),
        ("push-0", {}),
        ("push-1", {}),
        ("pop-space", {}),
        ("delay", {"d": 4}),
        ("rejoin", {}),
        ("time-mult-bumpers", {"factor": "double"}),
        ("time-mult-bumpers", {"factor": "half", "d1": 2, "d2": 2, "d3": 3}),
        ("time-separator", {}),
    ],
)
def test_catalog_gadget_verifies(name, kw):
    g = G.CATALOG[name](**kw)
    rep = G.verify_transfer(g, 5, BF if g.time_samples is not None else EXACT)
    assert rep.passed, rep.describe()


def test_half_parabola_in_local_frame():
    # lower mirror of the halving pair: y = -2x^2 + 3/8 on [-1, 0], entry line at y = 5
    g = G.make_space_mult("half")
    arcs = [(c.a, c.b, c.c + 5, c.x0, c.x1) for c in g.components() if isinstance(c, Parabola)]
    assert (F(-2), F(0), F(3, 8), F(-1), F(0)) in arcs


def test_half_with_reverser_maps_three_halves_to_three_quarters():
    g = G.make_space_mult("half", with_reverser=True)
    port, u, _, _, _ = through(g, F(3, 2))
    assert (port, u) == ("out", F(3, 4))
    assert g.maps[("in", "out")].preserving


def test_space_mult_path_time_constant():
    g = G.make_space_mult("half")
    times = {through(g, F(k, 16))[2] for k in range(1, 32)}
    assert len(times) == 1


def test_order_reverser_base_alignment_and_identity():
    g = G.make_order_reverser()
    a_in, _ = g.inputs["in"].line
    a_out, b_out = g.outputs["out"].line
    # the offset-0 end of the output line sits on the input's offset-0 column
    assert g.outputs["out"].point(0).x == g.inputs["in"].point(0).x
    assert through(g, F(1, 2))[1] == F(1, 2)


def test_push_examples():
    assert through(G.make_push(1), F(1, 2))[1] == F(3, 4)
    assert through(G.make_push(0), F(1, 2))[1] == F(1, 4)
    # both pushes share one path time, so no padding is needed between them
    assert through(G.make_push(0), F(1, 2))[2] == through(G.make_push(1), F(1, 2))[2]


@pytest.mark.parametrize("s,port,out", [(F(3, 4), "right", F(1, 2)), (F(1, 4), "left", F(1, 2)), (F(5, 8), "right", F(1, 4))])
def test_pop_routing(s, port, out):
    p, u, _, _, _ = through(G.make_pop_space(), s)
    assert (p, u) == (port, out)


def test_pop_excluded_offsets():
    from pinball.errors import ExcludedOffset

    for s in (F(0), F(1, 2), F(1)):
        with pytest.raises(ExcludedOffset):
            G.check_pop_offset(s)


@given(st.integers(1, 2**10 - 1))
def test_pop_routes_on_top_bit(k):
    s = F(k, 2**10)
    if s == F(1, 2):
        return
    p, u, _, _, _ = through(G.make_pop_space(), s)
    assert p == ("right" if s > F(1, 2) else "left")
    assert u == (2 * s - 1 if s > F(1, 2) else 2 * s)


def _straight_time(g):
    a, b = g.inputs["in"], g.outputs["out"]
    return (a.point(0).y - b.point(0).y) / g.speed


def test_delay_zero_rejected():
    with pytest.raises(InvalidGeometry):
        G.make_delay(0)


def test_delay_shifts_by_d():
    g = G.make_delay(4)
    for k in range(8):
        _, u, t, _, _ = through(g, F(2 * k + 1, 16))
        assert u == F(2 * k + 1, 16)
        assert t - g.outputs["out"].time_base == 0
    assert g.maps[("in", "out")].time_intercept - _straight_time(g) == 4


def test_chained_delays_add():
    lay = tk.Layout("x_")
    t0 = G._start(F(1, 4))
    t2 = tk.delay(lay, tk.delay(lay, t0, 4), 6)
    straight = t0.origin.y - t2.origin.y
    assert t2.time_base - straight == 10


def test_rejoin_equal_times_and_gate_reflection():
    g = G.make_rejoin()
    pa, ua, ta, _, _ = through(g, F(1, 2), inp="a")
    pb, ub, tb, _, trace = through(g, F(1, 2), inp="b")
    assert (pa, ua) == (pb, ub) == ("out", F(1, 2))
    assert ta == tb
    assert any(e.component_id.startswith("rj_gate") and e.kind == "reflect" for e in trace.events)


def test_bumper_double_examples():
    g = G.make_time_mult_bumpers("double", v=1, d1=1, d2=1, d3=1)
    _, _, t, vel, trace = through(g, F(1), F(1, 2))
    speeds = {abs(s.vel.x) + abs(s.vel.y) for s in trace.states}
    assert F(2, 3) in speeds
    assert t == 4
    assert g.maps[("in", "out")].time_intercept == 3
    assert vel.norm2() == 1


def test_bumper_untouched_at_zero_offset():
    g = G.make_time_mult_bumpers("double")
    _, _, _, _, trace = through(g, F(1), F(0))
    assert all(s.vel.norm2() == 1 for s in trace.states)


def test_moving_ansatz_reference_values():
    q = tk.linear_ansatz_quantities(1, 1, 1)
    assert q["delta_v"] == F(5, 4)
    assert q["t_c1"] == F(5, 4) and q["t_c2"] == F(5, 2)
    assert q["v1"] == F(3, 13)
    z = tk.linear_ansatz_quantities(1, 1, 0)
    assert z["t_c1"] == 0 and z["v1"] == 0


def test_moving_double_verifies_and_restores_speed():
    g = G.make_time_mult_moving("double")
    rep = G.verify_transfer(g, 5, BF)
    assert rep.passed, rep.describe()
    assert g.info["max_wall_speed"] <= F(1, 2)


def test_separator_examples():
    assert float(tk.separator_min_eps(F(1, 100))) == 0.0625
    g = G.make_time_separator()
    p, _, t, _, _ = through(g, F(1), F(1, 4), backend=BF)
    assert p == "E"
    p, _, t, _, _ = through(g, F(1), F(5, 4), backend=BF)
    assert p == "L"
    assert abs(t - BF.num(g.outputs["L"].time_base) - BF.num(F(1, 4))) < BF.num(F(1, 10**20))


def test_ray_examples():
    g = G.make_ray_time_mult("double", eps=F(1, 8))
    assert g.info["stages"] == 4
    one = G.make_ray_stage(2, d1=2, d2=3)
    m = one.maps[("in", "out")]
    assert (m.time_slope, m.time_intercept) == (2, 5)
    for ts in (F(0), F(1, 3), F(3, 2)):
        _, _, t, vel, trace = through(one, F(1), ts, backend=BF)
        assert abs(t - BF.num(2 * ts + 5)) < BF.num(F(1, 10**20))
        assert abs(BF.sqrt(vel.norm2()) - 1) < BF.num(F(1, 10**40))


def test_ray_double_verifies():
    rep = G.verify_transfer(G.make_ray_time_mult("double"), 5, BF)
    assert rep.passed, rep.describe()


def test_corrupted_parabola_fails_verification():
    g = G.make_space_mult("half")
    k = next(i for i, c in enumerate(g.layout.items) if isinstance(c, Parabola))
    c = g.layout.items[k]
    g.layout.items[k] = replace(c, a=-c.a)
    with pytest.raises(VerificationFailure):
        G.verify_transfer(g, 5)
