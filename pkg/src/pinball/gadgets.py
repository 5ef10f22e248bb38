"""Gadget catalogue: standalone scene fragments with declared transfer maps.

Each constructor lays out a fragment with one input port (``in``) whose lanes
travel downward, and one or two output ports.  ``verify_transfer`` simulates
sample balls through the fragment and checks the declared affine maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import track as tk
from .components import BallState, Bumper, MovingWall, Parabola
from .errors import InvalidGadgetParams, InvalidGeometry, VerificationFailure, ExcludedOffset
from .numeric import EXACT, BigFloat, Vec2
from .simulator import build_scene, run
from .track import DOWN, RIGHT, F, Layout, Track

DEFAULT_PERIOD = F(1000)


@dataclass(frozen=True)
class Port:
    """Oriented crossing line; offsets are measured in ``unit`` along ``lateral``."""

    name: str
    base: Vec2
    inward: Vec2
    lateral: Vec2
    unit: Fraction
    time_base: Fraction
    lo: Fraction = F(0)
    hi: Fraction = F(2)

    @classmethod
    def from_track(cls, name, tr: Track, lo=F(0), hi=None):
        return cls(name, tr.origin, tr.direction, tr.lateral, tr.unit, tr.time_base, F(lo), F(hi if hi is not None else tr.band))

    @property
    def line(self):
        m = F(1, 4)
        return (
            self.base + self.lateral * (self.unit * (self.lo - m)),
            self.base + self.lateral * (self.unit * (self.hi + m)),
        )

    def point(self, value) -> Vec2:
        return self.base + self.lateral * (self.unit * F(value))

    def convert(self, backend):
        return replace(self, base=self.base.convert(backend), inward=self.inward.convert(backend), lateral=self.lateral.convert(backend))


@dataclass(frozen=True)
class TransferMap:
    """out_value = space_slope*in_value + space_intercept;
    out_crossing_time = time_slope*in_offset + time_intercept (input time base 0)."""

    space_slope: Fraction
    space_intercept: Fraction
    time_slope: Fraction
    time_intercept: Fraction
    preserving: bool = True  # lateral orientation


@dataclass
class Gadget:
    name: str
    params: dict
    layout: Layout
    inputs: Dict[str, Port]
    outputs: Dict[str, Port]
    maps: Dict[Tuple[str, str], TransferMap]
    speed: Fraction = F(1)
    period: Fraction = DEFAULT_PERIOD
    constant_speed: bool = False
    speed_cap: Optional[Fraction] = None
    route: Optional[object] = None  # (input, space value, time offset) -> output port name
    space_samples: Tuple[Fraction, Fraction] = (F(0), F(2))
    time_samples: Optional[Tuple[Fraction, Fraction]] = None
    info: dict = field(default_factory=dict)

    def components(self):
        return self.layout.components(self.period)

    def has_moving(self):
        return any(isinstance(c, (MovingWall, Bumper)) for c in self.components())

    def scene(self, backend=EXACT):
        return build_scene(
            self.components(),
            backend=backend,
            speed_cap_ratio=self.speed_cap,
            ref_speed=self.speed if self.speed_cap is not None else None,
            constant_speed=self.constant_speed,
            allow_exact_moving=True,
        )

    def summary(self):
        return {
            "name": self.name,
            "params": {k: str(v) for k, v in self.params.items()},
            "components": len(self.layout.items),
            "maps": {
                f"{a}->{b}": {
                    "space_slope": m.space_slope,
                    "space_intercept": m.space_intercept,
                    "time_slope": m.time_slope,
                    "time_intercept": m.time_intercept,
                    "orientation": "preserving" if m.preserving else "reversing",
                }
                for (a, b), m in self.maps.items()
            },
            **{k: str(v) for k, v in self.info.items()},
        }


def _start(unit=F(1), speed=F(1), band=F(2)) -> Track:
    return Track(Vec2(F(0), F(0)), DOWN, RIGHT, F(unit), F(0), F(speed), 0, F(band))


def _map(tin: Track, tout: Track, s_slope, s_icpt=F(0), t_slope=F(1)) -> TransferMap:
    return TransferMap(
        F(s_slope),
        F(s_icpt),
        F(t_slope),
        tout.time_base - F(t_slope) * tin.time_base,
        tin.lateral == tout.lateral,
    )


def _single(name, params, lay, t0, t1, s_slope, s_icpt=F(0), t_slope=F(1), **kw) -> Gadget:
    return Gadget(
        name,
        params,
        lay,
        {"in": Port.from_track("in", t0)},
        {"out": Port.from_track("out", t1)},
        {("in", "out"): _map(t0, t1, s_slope, s_icpt, t_slope)},
        speed=t0.speed,
        **kw,
    )


# --------------------------------------------------------------------------
# space gadgets


def make_space_mult(factor: str, with_reverser: bool = False) -> Gadget:
    """Confocal parabola pair scaling the space offset by 1/2 or 2 (orientation reversing)."""
    if factor not in ("half", "double"):
        raise InvalidGadgetParams("factor must be 'half' or 'double'")
    lay = Layout("sm_")
    t0 = _start()
    t1 = tk.space_stage(lay, t0, factor)
    if with_reverser:
        t1 = tk.space_stage(lay, t1, "reverser")
    k = F(1, 2) if factor == "half" else F(2)
    hi = F(2) if factor == "half" else F(1)
    return _single(f"space-mult-{factor}", {"factor": factor, "reverser": with_reverser}, lay, t0, t1, k, space_samples=(F(0), hi))


def make_order_reverser() -> Gadget:
    lay = Layout("rv_")
    t0 = _start()
    t1 = tk.space_stage(lay, t0, "reverser")
    return _single("order-reverser", {}, lay, t0, t1, 1)


def make_push(bit: int) -> Gadget:
    """s -> (s + bit)/2 on [0, 1), orientation preserving."""
    if bit not in (0, 1):
        raise InvalidGadgetParams("bit must be 0 or 1")
    lay = Layout(f"push{bit}_")
    t0 = _start()
    t1 = tk.space_push(lay, t0, bit)
    return _single(f"push-{bit}", {"bit": bit}, lay, t0, t1, F(1, 2), F(bit, 2), space_samples=(F(0), F(1)))


def make_pop_space() -> Gadget:
    """Top bit of the space stack: port ``left`` for bit 0 (s' = 2s), ``right`` for bit 1 (s' = 2s - 1)."""
    lay = Layout("pop_")
    t0 = _start()
    zero, one = tk.space_pop(lay, t0, RIGHT, 4 * tk.clearance(t0) + 2)
    zero = zero.advance(2)
    g = Gadget(
        "pop-space",
        {},
        lay,
        {"in": Port.from_track("in", t0, hi=1)},
        {"left": Port.from_track("left", zero, hi=1), "right": Port.from_track("right", one, hi=1)},
        {("in", "left"): _map(t0, zero, 2), ("in", "right"): _map(t0, one, 2, -1)},
        route=lambda name, s, t: "right" if F(s) > F(1, 2) else "left",
        space_samples=(F(0), F(1)),
    )
    return g


def check_pop_offset(s):
    s = F(s)
    if s in (F(0), F(1, 2), F(1)):
        raise ExcludedOffset(f"offset {s} sits exactly on a pop threshold")


def make_delay(d, unit=F(1, 4)) -> Gadget:
    """Four-mirror excursion adding ``d`` to the arrival time; lanes are ``unit`` wide per offset unit."""
    d = F(d)
    lay = Layout("dl_")
    t0 = _start(unit)
    if d <= 0:
        raise InvalidGeometry("delay must be positive")
    t1 = tk.delay(lay, t0, d)
    return _single("delay", {"d": d}, lay, t0, t1, 1)


def make_rejoin(separation=F(12)) -> Gadget:
    """Inputs ``a`` (straight through) and ``b`` (mirror then gate) share output ``out``.

    Input ``b`` sits ``separation`` to the right and ``separation`` lower, so
    both paths have equal length.
    """
    lay = Layout("rj_")
    sep = F(separation)
    ta = _start()
    c = tk.clearance(ta)
    if sep < 4 * c:
        raise InvalidGeometry("rejoin inputs too close")
    tb = replace(ta, origin=Vec2(sep, -sep))
    tb1 = tk.turn(lay, tb, tk.LEFT, 2 * c, 2 * c)
    out_b = merge_gate(lay, tb1, ta.origin.x, 2 * c)
    out_a = ta.advance(ta.origin.y - out_b.origin.y)
    if out_b.lateral != out_a.lateral or out_a.origin != out_b.origin:
        raise InvalidGeometry("rejoin lanes misaligned")
    return Gadget(
        "rejoin",
        {"separation": sep},
        lay,
        {"a": Port.from_track("a", ta), "b": Port.from_track("b", tb)},
        {"out": Port.from_track("out", out_a)},
        {("a", "out"): _map(ta, out_a, 1), ("b", "out"): _map(tb, out_b, 1)},
        info={"equal_paths": out_a.time_base == out_b.time_base},
    )


def merge_gate(lay: Layout, tr: Track, axis_x, after) -> Track:
    """Gate turning horizontal lanes down onto the vertical axis ``x = axis_x``;
    balls already travelling down that axis pass through it."""

    def make_gate(p, q):
        lay.add(tk.oriented_gate(p, q, p + Vec2(F(0), F(1))))

    ahead = (F(axis_x) - tr.origin.x) * tr.direction.x
    return tk.turn(lay, tr, DOWN, ahead, after, make=make_gate)


# --------------------------------------------------------------------------
# time gadgets


TIME_UNIT = F(1, 100)


def _time_start(v, band=F(2)):
    return _start(TIME_UNIT * F(v), v, band)


def make_time_mult_bumpers(factor: str, v=1, d1=1, d2=1, d3=1, t_max=2) -> Gadget:
    v, t_max = F(v), F(t_max)
    if v <= 0 or min(F(d1), F(d2), F(d3)) <= 0:
        raise InvalidGadgetParams("speed and distances must be positive")
    lay = Layout("tb_")
    t0 = _time_start(v)
    t1 = tk.time_mult_bumpers(lay, t0, factor, d1, d2, d3, t_max)
    k = F(2) if factor == "double" else F(1, 2)
    return _single(
        f"time-mult-bumpers-{factor}",
        {"factor": factor, "v": v, "delta1": d1, "delta2": d2, "delta3": d3},
        lay, t0, t1, 1, t_slope=k,
        time_samples=(F(0), t_max),
        space_samples=(F(1, 2), F(3, 2)),
    )


def make_time_mult_moving(factor: str, v=1, d2=1, d1=None, d3=None, t_max=2, eps=F(1, 2)) -> Gadget:
    v, t_max, eps = F(v), F(t_max), F(eps)
    lay = Layout("tm_")
    t0 = _time_start(v)
    t1 = tk.time_mult_moving(lay, t0, factor, d1, d2, d3, t_max, return_speed=eps * v)
    geo = tk.moving_fold_geometry(t0, d1, d2, d3, factor, t_max)
    d1, d3 = geo.x0 + geo.lb, (geo.depth - 1) - geo.shift - geo.x1
    k = F(2) if factor == "double" else F(1, 2)
    g = _single(
        f"time-mult-moving-{factor}",
        {"factor": factor, "v": v, "delta1": d1, "delta2": d2, "delta3": d3},
        lay, t0, t1, 1, t_slope=k,
        time_samples=(F(0), t_max),
        space_samples=(F(1, 2), F(3, 2)),
        speed_cap=eps,
    )
    top = max_wall_speed(g)
    if top > eps * v:
        raise InvalidGadgetParams(f"wall speed {top} exceeds cap {eps * v}")
    g.info["max_wall_speed"] = top
    g.info["legs"] = (d1 + d3) / v  # entry and exit legs outside the wall pair
    g.info["ansatz"] = tk.linear_ansatz_quantities(v, d2, 1)
    return g


def max_wall_speed(g: Gadget):
    best = F(0)
    for c in g.components():
        if isinstance(c, MovingWall):
            best = max(best, F(c.max_speed(EXACT)))
    return best


def make_time_separator(kappa=F(1, 100), eps=F(1, 15), v=1) -> Gadget:
    kappa, eps, v = F(kappa), F(eps), F(v)
    lay = Layout("sep_")
    t0 = _start(kappa * v, v)
    early, late = tk.time_separator(lay, t0, kappa, eps, RIGHT, 4 * tk.clearance(t0) + 1)
    late = late.advance(1)
    return Gadget(
        "time-separator",
        {"kappa": kappa, "eps": eps, "v": v},
        lay,
        {"in": Port.from_track("in", t0)},
        {"E": Port.from_track("E", early), "L": Port.from_track("L", late)},
        {("in", "E"): _map(t0, early, 1), ("in", "L"): TransferMap(F(1), F(0), F(1), late.time_base - 1, True)},
        speed=v,
        speed_cap=eps,
        route=lambda name, s, t: "L" if F(t) >= 1 else "E",
        space_samples=(F(1, 2), F(3, 2)),
        time_samples=(F(0), F(3, 2)),
        info={"min_eps": tk.separator_min_eps(kappa)},
    )


def make_ray_time_mult(factor: str, eps=F(1, 8), d1=2, d2=3, v=1, t_max=2) -> Gadget:
    eps, v, t_max = F(eps), F(v), F(t_max)
    lay = Layout("ray_")
    t0 = _time_start(v)
    t1, ratios = tk.ray_time_mult(lay, t0, factor, eps, d1, d2, t_max)
    k = F(2) if factor == "double" else F(1, 2)
    g = _single(
        f"ray-mult-{factor}",
        {"factor": factor, "eps": eps, "delta1": d1, "delta2": d2},
        lay, t0, t1, 1, t_slope=k,
        constant_speed=True,
        speed_cap=eps,
        time_samples=(F(0), t_max),
        space_samples=(F(1, 2), F(3, 2)),
        info={"stages": len(ratios), "ratios": " ".join(str(r) for r in ratios)},
    )
    g.maps[("in", "out")] = replace(g.maps[("in", "out")], preserving=t0.lateral == t1.lateral)
    return g


def make_ray_stage(ratio, d1=2, d2=3, v=1, t_max=2) -> Gadget:
    """One gate + moving-wall stage: t_e = ratio*t_s + (d1 + d2 + 2 d0)/v."""
    lay = Layout("rs_")
    t0 = _time_start(v)
    t1, _ = tk.ray_stage(lay, t0, ratio, d1, d2, t_max)
    return _single(
        "ray-stage", {"ratio": ratio, "delta1": d1, "delta2": d2}, lay, t0, t1, 1,
        t_slope=F(ratio), constant_speed=True, time_samples=(F(0), F(t_max)), space_samples=(F(1, 2), F(3, 2)),
    )


CATALOG = {
    "space-mult-half": lambda **kw: make_space_mult("half", **kw),
    "space-mult-double": lambda **kw: make_space_mult("double", **kw),
    "order-reverser": make_order_reverser,
    "push-0": lambda **kw: make_push(0),
    "push-1": lambda **kw: make_push(1),
    "pop-space": make_pop_space,
    "delay": make_delay,
    "rejoin": make_rejoin,
    "time-mult-bumpers": make_time_mult_bumpers,
    "time-mult-moving": make_time_mult_moving,
    "time-separator": make_time_separator,
    "ray-mult": make_ray_time_mult,
}


# --------------------------------------------------------------------------
# verification


def port_crossing(states, final_ball, port: Port, backend):
    """First crossing of ``port`` along the trace: (time, value, speed) or None."""
    p = port.convert(backend)
    pts = list(states)
    for i in range(len(pts)):
        st = pts[i]
        vn = st.vel.dot(p.inward)
        if vn <= 0:
            continue
        dist = (p.base - st.pos).dot(p.inward)
        if dist < 0:
            continue
        dt = dist / vn
        if i + 1 < len(pts) and dt > pts[i + 1].time - st.time:
            continue
        at = st.pos + st.vel * dt
        u = (at - p.base).dot(p.lateral) / backend.num(p.unit)
        m = backend.num(F(1, 4))
        if u < backend.num(p.lo) - m or u > backend.num(p.hi) + m:
            continue
        return st.time + dt, u, st.vel
    return None


@dataclass
class Sample:
    input: str
    space_in: Fraction
    time_in: Fraction
    port: Optional[str]
    expected_port: str
    space_out: object = None
    time_out: object = None
    space_residual: object = None
    time_residual: object = None
    speed_residual: object = None
    outcome: str = ""

    @property
    def ok_route(self):
        return self.port == self.expected_port


@dataclass
class VerificationReport:
    gadget: str
    backend: str
    samples: List[Sample]
    max_space_residual: object
    max_time_residual: object
    max_speed_residual: object
    passed: bool
    orientation: Dict[str, str]

    def describe(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.gadget} [{self.backend}] samples={len(self.samples)} "
            f"space_residual={float(self.max_space_residual):.3g} "
            f"time_residual={float(self.max_time_residual):.3g} "
            f"speed_residual={float(self.max_speed_residual):.3g}"
        )


def sample_points(lo, hi, n, closed_lo=True):
    """n rationals spread over [lo, hi) (or (lo, hi) when ``closed_lo`` is false)."""
    lo, hi = F(lo), F(hi)
    if closed_lo:
        return [lo + (hi - lo) * F(i, n) for i in range(n)]
    return [lo + (hi - lo) * F(2 * i + 1, 2 * n) for i in range(n)]


def simulate_through(g: Gadget, scene, inp: str, s, t, backend, max_events=200):
    port = g.inputs[inp]
    pos = port.point(s)
    b0 = BallState(pos.convert(backend), (port.inward * g.speed).convert(backend), backend.num(port.time_base + F(t)))
    horizon = backend.num(g.period - 1)
    outcome, trace = run(scene, b0, max_events, horizon, stop_on_hit=False)
    states = trace.states
    final = states[-1]
    found = []
    for name, op in g.outputs.items():
        hit = port_crossing(states, final, op, backend)
        if hit is not None:
            found.append((hit[0], name, hit))
    found.sort(key=lambda x: x[0])
    return found, trace, outcome


def verify_transfer(
    g: Gadget,
    n_samples: int = 8,
    backend=None,
    space_tol=None,
    time_tol=None,
    space_values=None,
    time_values=None,
    inputs=None,
) -> VerificationReport:
    """Simulate samples through ``g`` and check every declared map.

    Raises ``VerificationFailure`` when a ball leaves through an undeclared
    port or through none.  Residuals are reported; ``passed`` is false when any
    exceeds the tolerance (zero under exact arithmetic).
    """
    if n_samples < 3:
        raise InvalidGadgetParams("need at least 3 samples")
    if backend is None:
        backend = BigFloat(256) if g.has_moving() else EXACT
    scene = g.scene(backend)
    zero = backend.num(0)
    if backend.exact:
        s_tol = t_tol = zero
    else:
        s_tol = backend.num(space_tol) if space_tol is not None else backend.num(F(1, 10**20))
        t_tol = backend.num(time_tol) if time_tol is not None else backend.num(F(1, 10**20))
    if time_values is None:
        if g.time_samples is None:
            time_values = [F(0)]
        else:
            lo, hi = g.time_samples
            if g.route is not None and g.name == "time-separator":
                half = n_samples // 2
                time_values = sample_points(F(0), F(1, 2), max(half, 1)) + sample_points(F(1), F(3, 2), n_samples - half)
            else:
                time_values = sample_points(lo, hi, n_samples)
    if space_values is None:
        lo, hi = g.space_samples
        if g.time_samples is not None:
            space_values = [(lo + hi) / 2]
        else:
            space_values = sample_points(lo, hi, n_samples, closed_lo=False)
    pairs = [(s, t) for s in space_values for t in time_values]
    if g.time_samples is not None and len(space_values) == 1:
        pass
    samples = []
    ms = mt = mv = zero
    routing_ok = True
    for inp in inputs or list(g.inputs):
        for s, t in pairs:
            expected = g.route(inp, s, t) if g.route else next(b for (a, b) in g.maps if a == inp)
            found, trace, outcome = simulate_through(g, scene, inp, s, t, backend)
            if not found:
                raise VerificationFailure(
                    f"{g.name}: ball from {inp} at s={s}, t={t} left through no port ({outcome.describe(backend)})"
                )
            t_cross, u, vel = found[0][2]
            name = found[0][1]
            if (inp, name) not in g.maps:
                raise VerificationFailure(f"{g.name}: ball reached undeclared port {name}")
            m = g.maps[(inp, name)]
            es = backend.num(m.space_slope) * backend.num(F(s)) + backend.num(m.space_intercept)
            et = backend.num(m.time_slope) * backend.num(F(t)) + backend.num(m.time_intercept)
            sr = abs(u - es)
            tr_ = abs(t_cross - et)
            speed = backend.sqrt(vel.norm2())
            vr = abs(speed - backend.num(g.speed))
            ms, mt, mv = max(ms, sr), max(mt, tr_), max(mv, vr)
            sm = Sample(inp, F(s), F(t), name, expected, u, t_cross, sr, tr_, vr, outcome.variant)
            routing_ok &= sm.ok_route
            samples.append(sm)
    passed = routing_ok and ms <= s_tol and mt <= t_tol and mv <= t_tol
    orient = {f"{a}->{b}": ("preserving" if m.preserving else "reversing") for (a, b), m in g.maps.items()}
    return VerificationReport(g.name, "exact" if backend.exact else f"bigfloat{backend.precision_bits}", samples, ms, mt, mv, passed, orient)
