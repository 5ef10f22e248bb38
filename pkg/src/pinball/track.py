"""Lane bookkeeping and the geometric building blocks shared by gadgets and the compiler.

A *track* describes a bundle of parallel ball lanes crossing a port line.  A
lane with offset value ``s`` crosses at ``origin + S*s*lateral`` travelling
along ``direction``; a ball with time offset ``t`` crosses at ``time_base + t``.
Every primitive below appends components to a ``Layout`` and returns the
track(s) describing where the lanes come out.  All geometry is built with
exact fractions; a scene converts it to its backend later.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, List, Optional

from .components import (
    Bumper,
    BumperSchedule,
    MotionPhase,
    MovingWall,
    OneWayGate,
    Parabola,
    Schedule,
    Wall,
)
from .errors import InvalidGadgetParams, InvalidGeometry
from .numeric import RationalTimeFunction, Vec2, constant_fn, linear_fn

F = Fraction

DOWN = Vec2(F(0), F(-1))
UP = Vec2(F(0), F(1))
LEFT = Vec2(F(-1), F(0))
RIGHT = Vec2(F(1), F(0))


def V(x, y) -> Vec2:
    return Vec2(F(x), F(y))


@dataclass(frozen=True)
class Track:
    origin: Vec2
    direction: Vec2
    lateral: Vec2
    unit: Fraction  # S: scene length of one offset unit
    time_base: Fraction
    speed: Fraction
    reflections: int = 0
    band: Fraction = F(2)  # lanes occupy offsets in (0, band)
    margin: Fraction = F(1, 4)

    def lane_point(self, value) -> Vec2:
        return self.origin + self.lateral * (self.unit * value)

    @property
    def sigma_x(self) -> int:
        return int(self.lateral.x + self.lateral.y * 0) if self.lateral.x != 0 else 0

    def advance(self, length) -> "Track":
        length = F(length)
        return replace(
            self,
            origin=self.origin + self.direction * length,
            time_base=self.time_base + length / self.speed,
        )

    def rebase(self, shift) -> "Track":
        """Move the zero-offset lane by ``shift`` offset units (values drop by ``shift``)."""
        return replace(self, origin=self.origin + self.lateral * (self.unit * F(shift)))


@dataclass
class Layout:
    """Collects components.  Time-dependent parts are factories of the period."""

    prefix: str = ""
    items: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    def _id(self, kind):
        n = self.counters.get(kind, 0)
        self.counters[kind] = n + 1
        return f"{self.prefix}{kind}{n}"

    def add(self, comp):
        comp = replace(comp, id=self._id(comp.kind if hasattr(comp, "kind") else "c"))
        self.items.append(comp)
        return comp

    def add_timed(self, kind: str, factory: Callable):
        cid = self._id(kind)
        self.items.append((cid, factory))
        return cid

    def components(self, period) -> list:
        out = []
        for it in self.items:
            if isinstance(it, tuple):
                cid, factory = it
                out.append(replace(factory(F(period)), id=cid))
            else:
                out.append(it)
        return out

    def extend(self, other: "Layout"):
        for it in other.items:
            self.items.append(it)

    def ids(self):
        return [it[0] if isinstance(it, tuple) else it.id for it in self.items]


def _check_axis(d: Vec2):
    if not ((d.x == 0 and abs(d.y) == 1) or (d.y == 0 and abs(d.x) == 1)):
        raise InvalidGeometry("lane directions must be axis aligned")


# --------------------------------------------------------------------------
# mirrors


def turn(layout: Layout, tr: Track, new_dir: Vec2, ahead, after, lo_margin=None, hi_margin=None, make=None) -> Track:
    """45-degree mirror ``ahead`` of the port turning the lanes into ``new_dir``.

    The new port line sits ``after`` beyond the mirror's centre line.  Path
    length from port to port is ``ahead + after`` for every lane.
    """
    _check_axis(new_dir)
    d, e, S = tr.direction, tr.lateral, tr.unit
    if d.dot(new_dir) != 0:
        raise InvalidGeometry("turn must be by 90 degrees")
    sigma = e.dot(new_dir)
    lo_m = tr.margin if lo_margin is None else F(lo_margin)
    hi_m = tr.margin if hi_margin is None else F(hi_margin)
    u_lo, u_hi = -lo_m * S, (tr.band + hi_m) * S
    ahead, after = F(ahead), F(after)
    # mirror points lie at along-distance ahead + sigma*u and cross-distance sigma*u
    if ahead + min(sigma * u_lo, sigma * u_hi) <= 0:
        raise InvalidGeometry("mirror reaches behind the port line")
    if after - max(sigma * u_lo, sigma * u_hi) <= 0:
        raise InvalidGeometry("new port line cuts the mirror")
    C = tr.origin + d * ahead
    diag = d + new_dir
    p, q = C + diag * (sigma * u_lo), C + diag * (sigma * u_hi)
    if make is None:
        layout.add(Wall(p, q))
    else:
        make(p, q)
    return Track(
        C + new_dir * after,
        new_dir,
        d * sigma,
        S,
        tr.time_base + (ahead + after) / tr.speed,
        tr.speed,
        tr.reflections + 1,
        tr.band,
        tr.margin,
    )


def clearance(tr: Track) -> Fraction:
    """A distance that safely clears a lane bundle plus margins."""
    return (tr.band + 2 * tr.margin) * tr.unit


def excursion(layout: Layout, tr: Track, side: Vec2, reach) -> Track:
    """Four mirrors stepping ``reach`` sideways and back: adds exactly ``2*reach`` of path."""
    c = clearance(tr)
    reach = F(reach)
    if reach < 3 * c:
        raise InvalidGeometry(f"delay excursion of {reach} is too short for the lane width")
    d = tr.direction
    t1 = turn(layout, tr, side, c, c)
    t2 = turn(layout, t1, d, reach - c, c)
    t3 = turn(layout, t2, -side, c, c)
    t4 = turn(layout, t3, d, reach - c, c)
    return t4


def jog(layout: Layout, tr: Track, side: Vec2, reach) -> Track:
    """Two mirrors shifting the lanes ``reach`` sideways (adds ``reach`` of path)."""
    c = clearance(tr)
    reach = F(reach)
    if reach < 3 * c:
        raise InvalidGeometry("jog too short for the lane width")
    t1 = turn(layout, tr, side, c, c)
    return turn(layout, t1, tr.direction, reach - c, c)


def delay(layout: Layout, tr: Track, amount, side: Optional[Vec2] = None) -> Track:
    """Delay every lane by ``amount`` time units (path ``amount*speed``)."""
    amount = F(amount)
    if amount <= 0:
        raise InvalidGeometry("delay must be positive")
    side = side if side is not None else tr.lateral
    return excursion(layout, tr, side, amount * tr.speed / 2)


# --------------------------------------------------------------------------
# parabola stages


# local-frame constants: lower mirror (a, c, x0, x1), scale factor, extra path, entry/exit heights
SPACE_STAGES = {
    "half": (F(-2), F(3, 8), F(-1), F(0), F(1, 2), F(3, 4), F(5), F(-2)),
    "double": (F(-1, 2), F(3, 4), F(-4), F(0), F(2), F(3, 2), F(5), F(-8)),
    "reverser": (F(-1), F(1, 2), F(-2), F(0), F(1), F(1), F(5), F(-4)),
}

UPPER = (F(1), F(0), F(0), F(2))  # y = x^2 on [0, 2]


def _world_parabola(a, b, c, x0, x1, base: Vec2, lat_sign: int, up_sign: int, S) -> Parabola:
    """Map Y = aX^2 + bX + c (X in [x0,x1]) through x = bx + lat*S*X, y = by + up*S*Y."""
    # X = lat*(x - bx)/S  ->  y = by + up*S*(a*(x-bx)^2/S^2 + b*lat*(x-bx)/S + c)
    A = up_sign * a / S
    Bc = up_sign * b * lat_sign
    bx, by = base.x, base.y
    # expand A*(x-bx)^2 + Bc*(x-bx) + (by + up*S*c)
    pa = A
    pb = -2 * A * bx + Bc
    pc = A * bx * bx - Bc * bx + by + up_sign * S * c
    xs = sorted([bx + lat_sign * S * x0, bx + lat_sign * S * x1])
    return Parabola(pa, pb, pc, xs[0], xs[1])


def space_stage(layout: Layout, tr: Track, kind: str, shift=0) -> Track:
    """Confocal parabola pair scaling lane offsets.

    ``kind`` is ``half`` (s -> s/2), ``double`` (s -> 2s) or ``reverser``
    (s -> s); each flips the lateral orientation.  ``shift`` re-bases the input
    first, so ``shift=1`` maps s to (s+1)/2 for ``half``.  Lanes must run
    vertically because parabola axes are vertical.
    """
    if tr.direction.x != 0:
        raise InvalidGeometry("parabola stages need vertically travelling lanes")
    a1, c1, lx0, lx1, k, extra, y_in, y_out = SPACE_STAGES[kind]
    S = tr.unit
    up = -int(tr.direction.y)  # +1 when lanes travel down
    lat = int(tr.lateral.x)
    shifted = tr.rebase(-F(shift))
    # local-frame origin: entry line is at Y = y_in
    base = shifted.origin + tr.direction * (S * y_in)
    ua, ub, uc, ux1 = UPPER
    layout.add(_world_parabola(ua, ub, uc, F(0), ux1, base, lat, up, S))
    layout.add(_world_parabola(a1, F(0), c1, lx0, lx1, base, lat, up, S))
    out_origin = base - tr.direction * (S * y_out)
    return Track(
        out_origin,
        tr.direction,
        -tr.lateral,
        S,
        tr.time_base + S * (y_in - y_out + extra) / tr.speed,
        tr.speed,
        tr.reflections + 2,
        tr.band,
        tr.margin,
    )


def space_push(layout: Layout, tr: Track, bit: int) -> Track:
    """s -> (s + bit)/2 with orientation restored by a reverser."""
    t = space_stage(layout, tr, "half", shift=bit)
    return space_stage(layout, t, "reverser")


def space_pop(layout: Layout, tr: Track, divert_dir: Vec2, after):
    """s -> top bit.  Returns (bit0 track, bit1 track).

    Bit-0 lanes (2s < 1) keep going; bit-1 lanes are turned into ``divert_dir``
    by a mirror whose near end sits exactly on offset 1.
    """
    t = space_stage(layout, tr, "double")
    t = space_stage(layout, t, "reverser")
    S = t.unit
    lead = clearance(t)
    t = t.advance(lead)
    upper = replace(t.rebase(1), band=F(1))
    ahead = lead
    one = turn(layout, upper, divert_dir, ahead, after, lo_margin=0)
    # clear the mirror before anything else is placed on the kept lanes
    zero = replace(t.advance(ahead + after), band=t.band)
    return zero, one


def focus_target(layout: Layout, tr: Track):
    """Cup parabola sending every lane through its focus; returns the focus."""
    if tr.direction != DOWN:
        raise InvalidGeometry("target funnel expects downward lanes")
    S = tr.unit
    lat = int(tr.lateral.x)
    drop = 2 * clearance(tr)
    vertex = tr.origin + DOWN * drop - tr.lateral * (tr.margin * S)
    xs = sorted([vertex.x, vertex.x + lat * (tr.band + 2 * tr.margin) * S])
    a = F(1) / (8 * (tr.band + 2 * tr.margin) * S)
    layout.add(Parabola(a, -2 * a * vertex.x, a * vertex.x * vertex.x + vertex.y, xs[0], xs[1]))
    return Vec2(vertex.x, vertex.y + 1 / (4 * a))


# --------------------------------------------------------------------------
# local frames for the folded time gadgets


@dataclass(frozen=True)
class Frame:
    """Local (X, Y) -> world origin + X*xdir + Y*ydir."""

    origin: Vec2
    xdir: Vec2
    ydir: Vec2

    def __call__(self, X, Y) -> Vec2:
        return self.origin + self.xdir * F(X) + self.ydir * F(Y)

    def vec(self, X, Y) -> Vec2:
        return self.xdir * F(X) + self.ydir * F(Y)


def oriented_gate(p: Vec2, q: Vec2, pass_point: Vec2) -> OneWayGate:
    g = OneWayGate(p, q)
    if g.side(pass_point) > 0:
        return g
    return OneWayGate(q, p)


def entry_frame(tr: Track, ahead) -> Frame:
    """Frame whose X axis points against travel and whose Y axis is the lateral."""
    return Frame(tr.origin + tr.direction * F(ahead), -tr.direction, tr.lateral)


@dataclass(frozen=True)
class FoldGeometry:
    """Dimensions of the gate/retro-wall fold used by the time multipliers."""

    lb: Fraction  # distance from the first gate to the first retro wall
    depth: Fraction  # distance from the first gate to the second retro wall
    shift: Fraction  # lateral offset between the two gates
    x0: Fraction  # entry port distance before the first gate
    x1: Fraction  # exit port position (negative: past the first gate)


def fold_layout(layout: Layout, tr: Track, g: FoldGeometry, first, second):
    """Place the two gates of the fold and let ``first``/``second`` add the retro walls.

    ``first(frame)`` and ``second(frame)`` receive the local frame.  Returns the
    exit track before timing adjustments.
    """
    S, W, m = tr.unit, tr.band, tr.margin
    fr = entry_frame(tr, g.x0)
    lo, hi = -m * S, (W + m) * S
    # gate 1 on Y = -X: pass from +X (entry side)
    layout.add(oriented_gate(fr(-lo, lo), fr(-hi, hi), fr(1, 0)))
    first(fr)
    # gate 2 on Y = -X - D: pass from above (+Y)
    D = g.shift
    layout.add(oriented_gate(fr(-lo, lo - D), fr(-hi, hi - D), fr(-(W * S) / 2, (W * S) / 2 - D + 1)))
    second(fr)
    return fr


def check_fold(tr: Track, g: FoldGeometry, wall_reach=F(0), floor_reach=F(0)):
    S, W, m = tr.unit, tr.band, tr.margin
    c = clearance(tr)
    span = (W + m) * S
    if g.shift < span + c:
        raise InvalidGadgetParams("gates overlap: lateral shift too small")
    if g.lb - wall_reach < span + c:
        raise InvalidGadgetParams("first retro wall too close to the gate")
    if g.depth - floor_reach < g.shift + m * S + c:
        raise InvalidGadgetParams("second retro wall too close to the gate")
    if g.x0 < m * S + c:
        raise InvalidGadgetParams("entry line too close to the gate")
    if g.x1 > -(span + c):
        raise InvalidGadgetParams("exit line too close to the gates")


def fold_exit(tr: Track, fr: Frame, g: FoldGeometry, path_len) -> Track:
    return Track(
        fr(g.x1, -g.shift),
        tr.direction,
        tr.lateral,
        tr.unit,
        tr.time_base + F(path_len) / tr.speed,
        tr.speed,
        tr.reflections + 4,
        tr.band,
        tr.margin,
    )


def _lane_segment_y(fr: Frame, X, S, W, m):
    return fr(X, -m * S), fr(X, (W + m) * S)


def _lane_segment_x(fr: Frame, Y, S, W, m):
    return fr(m * S, Y), fr(-(W + m) * S, Y)


# --------------------------------------------------------------------------
# bumper multiplier


def bumper_accels(factor: str, v, delta2):
    """(accel1, sign1, accel2, sign2, second bumper time scale) for a doubling or halving pair."""
    v, d2 = F(v), F(delta2)
    if factor == "double":
        a1 = RationalTimeFunction((v * v,), (d2, v))  # v^2/(v t + d2)
        a2 = RationalTimeFunction((v * v,), (2 * d2, v))  # v^2/(v t + 2 d2)
        return a1, -1, a2, 1, F(2)
    if factor == "half":
        a1 = RationalTimeFunction((v * v,), (2 * d2, -v))  # v^2/(2 d2 - v t)
        a2 = RationalTimeFunction((v * v,), (d2, -v))  # v^2/(d2 - v t)
        return a1, 1, a2, -1, F(1, 2)
    raise InvalidGadgetParams(f"unknown factor {factor!r}")


def bumper_fold_geometry(tr: Track, delta1, delta2, delta3) -> FoldGeometry:
    c = clearance(tr)
    D = (tr.band + tr.margin) * tr.unit + 2 * c
    d1, d2, d3 = F(delta1), F(delta2), F(delta3)
    lb = d2 / 2
    depth = d2 - lb
    return FoldGeometry(lb, depth, D, d1 - lb, depth - D - d3)


def time_mult_bumpers(layout: Layout, tr: Track, factor: str, delta1, delta2, delta3, t_max=F(2)) -> Track:
    """Two gates and two bumpers; exit offset = factor * entry offset.

    The first bumper is active for ``t_max`` after the zero-offset ball would
    reach it; the second for the scaled window.
    """
    v = tr.speed
    g = bumper_fold_geometry(tr, delta1, delta2, delta3)
    check_fold(tr, g)
    a1, s1, a2, s2, scale = bumper_accels(factor, v, delta2)
    t_max = F(t_max)
    if factor == "half" and not 2 * F(delta2) > v * t_max:
        raise InvalidGadgetParams("halving bumpers need 2*delta2 > v*t_max (speed would blow up)")
    if factor == "half" and not F(delta2) > v * t_max * scale:
        raise InvalidGadgetParams("second halving bumper would stop the ball")
    S, W, m = tr.unit, tr.band, tr.margin
    t1 = tr.time_base + F(delta1) / v
    t2 = tr.time_base + (F(delta1) + F(delta2)) / v

    def first(fr):
        p, q = _lane_segment_y(fr, -g.lb, S, W, m)
        layout.add_timed(
            "bumper",
            lambda period, p=p, q=q: Bumper(p, q, s1, BumperSchedule(t1, t_max, period), a1),
        )

    def second(fr):
        p, q = _lane_segment_x(fr, -g.depth, S, W, m)
        layout.add_timed(
            "bumper",
            lambda period, p=p, q=q: Bumper(p, q, s2, BumperSchedule(t2, t_max * scale, period), a2),
        )

    fr = fold_layout(layout, tr, g, first, second)
    out = fold_exit(tr, fr, g, F(delta1) + F(delta2) + F(delta3))
    return out


# --------------------------------------------------------------------------
# moving-wall multiplier


def moving_wall_motion(factor: str, v, delta2):
    """Parametric schedules of the two walls.

    Returns ``(w1_time, w1_disp, w2_offset, w2_time, w2_disp, max_param_ok)``
    where ``p`` equals the entry time offset.  ``w1_disp`` is measured away from
    the gates (receding), ``w2_disp`` toward them (approaching), both relative to
    the walls' home positions; the second wall's home sits one unit beyond its
    reference line and ``w2_offset`` is when its motion starts relative to the
    first wall's.
    """
    v, d2 = F(v), F(delta2)
    h = d2 + 1
    if factor == "double":
        k = v / (2 * h)
        w1_time = RationalTimeFunction((0, 1, k / 2))
        w1_disp = RationalTimeFunction((0, 0, v * k / 2))
        # tc2(p) - tc2(0) with tc2 = (2d2^2 + 4 d2 p v + 4 d2 + p^2 v^2 + 4 p v + 2)/(2 v h)
        den = 2 * v * h
        w2_time = RationalTimeFunction((0, (4 * d2 * v + 4 * v) / den, v * v / den))
        w2_disp = RationalTimeFunction((0, 0, v * v / (2 * h)))
        return w1_time, w1_disp, h / v, w2_time, w2_disp
    if factor == "half":
        k = v / (4 * h)
        w1_time = RationalTimeFunction((0, 1, -k / 2))
        w1_disp = RationalTimeFunction((0, 0, -v * k / 2))
        den = 16 * v * h
        w2_time = RationalTimeFunction((0, (8 * d2 * v + 8 * v) / den, -v * v / den))
        w2_disp = RationalTimeFunction((0, 0, -v * v / (16 * h)))
        return w1_time, w1_disp, h / v, w2_time, w2_disp
    raise InvalidGadgetParams(f"unknown factor {factor!r}")


def moving_fold_geometry(tr: Track, delta1, delta2, delta3, factor, t_max) -> FoldGeometry:
    """Fold dimensions; ``delta1``/``delta3`` of None pick the shortest feasible legs."""
    c = clearance(tr)
    span = (tr.band + tr.margin) * tr.unit
    D = span + 2 * c
    total = F(delta2) + 1  # first wall home to second wall home along the gate path
    depth_min = 1 + D + 2 * c + tr.margin * tr.unit
    depth = max(total / 2, depth_min)
    lb = total - depth
    d1 = F(delta1) if delta1 is not None else lb + tr.margin * tr.unit + 2 * c
    d3 = F(delta3) if delta3 is not None else (depth - 1) - D + span + 2 * c
    return FoldGeometry(lb, depth, D, d1 - lb, (depth - 1) - D - d3)


def _return_phases(end_disp, speed_cap, duration_cap=None):
    dist = abs(end_disp)
    if dist == 0:
        return ()
    dur = dist / speed_cap
    return (MotionPhase.glide(dur, end_disp, F(0)),)


def time_mult_moving(layout: Layout, tr: Track, factor: str, delta1, delta2, delta3, t_max=F(2), return_speed=None):
    """Two moving walls; exit offset = factor * entry offset, exit speed restored."""
    v = tr.speed
    t_max = F(t_max)
    w1_time, w1_disp, w2_off, w2_time, w2_disp = moving_wall_motion(factor, v, delta2)
    w1_end = w1_disp(t_max)
    w2_end = w2_disp(t_max)
    if factor == "double" and w2_end > 1:
        raise InvalidGadgetParams("second wall would pass its reference line: need v^2 t_max^2 < 2(delta2+1)")
    g = moving_fold_geometry(tr, delta1, delta2, delta3, factor, t_max)
    check_fold(tr, g, wall_reach=max(F(0), -w1_end), floor_reach=max(F(0), w2_end))
    delta1 = g.x0 + g.lb
    delta3 = (g.depth - 1) - g.shift - g.x1
    S, W, m = tr.unit, tr.band, tr.margin
    t1 = tr.time_base + F(delta1) / v
    t2 = t1 + w2_off
    ret = F(return_speed) if return_speed is not None else v / 4
    move1 = MotionPhase(F(0), t_max, w1_time, w1_disp)
    # a receding first wall leaves the ball slowest at the window's end; its
    # return must not catch up with that ball
    slowest = v - 2 * max(F(0), move1.speed_fn()(t_max))
    ph1 = (move1,) + _return_phases(w1_end, min(ret, slowest / 2))
    ph2 = (MotionPhase(F(0), t_max, w2_time, w2_disp),) + _return_phases(w2_end, ret)

    def first(fr):
        p, q = _lane_segment_y(fr, -g.lb, S, W, m)
        away = fr.vec(-1, 0)
        layout.add_timed(
            "moving_wall",
            lambda period, p=p, q=q: MovingWall(p, q, away, Schedule(t1, ph1, period)),
        )

    def second(fr):
        p, q = _lane_segment_x(fr, -g.depth, S, W, m)
        toward = fr.vec(0, 1)
        layout.add_timed(
            "moving_wall",
            lambda period, p=p, q=q: MovingWall(p, q, toward, Schedule(t2, ph2, period)),
        )

    fr = fold_layout(layout, tr, g, first, second)
    return fold_exit(tr, fr, g, F(delta1) + F(delta2) + 2 + F(delta3))


def linear_ansatz_quantities(v, delta2, ts):
    """Closed forms of the linear-collision-time ansatz for the doubling walls.

    Returns ``dict(delta_v, t_c1, t_c2, v1, a1)`` with delta_v = 1 + 1/(4v),
    t_c1 = delta_v*ts, t_c2 = 2*t_c1,
    v1 = (v^2/2) (2 ts delta_v - ts) / (v ts delta_v + delta2 + 1) and
    a1 = (v^2/2) (2 delta_v - 1) / (v ts delta_v^2 + delta2 delta_v + delta_v).
    These are reference values only; the emitted walls follow the exact
    parametric schedule of ``moving_wall_motion``.
    """
    v, d2, ts = F(v), F(delta2), F(ts)
    dv = 1 + 1 / (4 * v)
    t_c1 = dv * ts
    v1 = (v * v / 2) * (2 * ts * dv - ts) / (v * ts * dv + d2 + 1)
    a1 = (v * v / 2) * (2 * dv - 1) / (v * ts * dv * dv + d2 * dv + dv)
    return {"delta_v": dv, "t_c1": t_c1, "t_c2": 2 * t_c1, "v1": v1, "a1": a1}


# --------------------------------------------------------------------------
# constant-speed (ray) multiplier stages


def ray_stage(layout: Layout, tr: Track, ratio, delta1, delta2, t_max, moving=True) -> Track:
    """Gate + one moving retro wall; exit offset = ratio * entry offset at constant speed.

    Lanes leave turned by 90 degrees (toward ``-lateral``).  With
    ``moving=False`` the wall is static and the stage is a two-reflection turn.
    """
    v = tr.speed
    S, W, m = tr.unit, tr.band, tr.margin
    c = clearance(tr)
    span = (W + m) * S
    ratio, t_max = F(ratio), F(t_max)
    c1 = v * (ratio - 1) / 2  # contact depth grows by c1 per unit entry offset
    c0 = F(0) if ratio >= 1 else -c1 * t_max
    lb = F(delta1) / 2
    x0 = F(delta1) - lb
    yx = F(delta2) - lb
    if lb < span + c or x0 < m * S + c or yx < m * S + c:
        raise InvalidGadgetParams("ray stage distances too short for the lane width")
    fr = entry_frame(tr, x0)
    lo, hi = -m * S, (W + m) * S
    layout.add(oriented_gate(fr(-lo, lo), fr(-hi, hi), fr(1, 0)))
    home_x = -lb - c0
    p, q = fr(home_x, lo), fr(home_x, hi)
    if moving and ratio != 1:
        rate = c1 / (1 + c1 / v)  # wall speed along the travel direction
        t_act = tr.time_base + F(delta1) / v + c0 / v
        dur = t_max * (1 + c1 / v)
        end = rate * dur
        into = fr.vec(-1, 0)
        ph = (MotionPhase.direct(dur, linear_fn(F(0), rate)),) + _return_phases(end, abs(rate))
        layout.add_timed(
            "moving_wall", lambda period, p=p, q=q: MovingWall(p, q, into, Schedule(t_act, ph, period))
        )
    else:
        layout.add(Wall(p, q))
    path = F(delta1) + F(delta2) + 2 * c0
    return Track(
        fr(0, -yx),
        -tr.lateral,
        tr.direction,
        S,
        tr.time_base + path / v,
        v,
        tr.reflections + 2,
        W,
        m,
    ), ratio


def ray_stage_factors(factor: str, eps):
    """Per-stage ratios whose product is exactly 2 (or 1/2), each wall at most eps*v."""
    from math import ceil

    eps = F(eps)
    if not (0 < eps <= F(1, 2)):
        raise InvalidGadgetParams("need 0 < eps <= 1/2")
    if factor == "double":
        xi = ceil(1 / (2 * eps))
        return [F(xi + i, xi + i - 1) for i in range(1, xi + 1)]
    if factor == "half":
        xi = ceil(1 / (4 * eps))
        # each stage wall speed is 1/(4 xi - 2 i + 1) of v; raise xi until the slowest fits
        while F(1, 2 * xi + 1) > eps:
            xi += 1
        return [F(2 * xi - i, 2 * xi - i + 1) for i in range(1, xi + 1)]
    raise InvalidGadgetParams(f"unknown factor {factor!r}")


def ray_time_mult(layout: Layout, tr: Track, factor: str, eps, delta1, delta2, t_max=F(2)):
    """Chain of slow-wall stages; each followed by a mirror restoring the direction."""
    ratios = ray_stage_factors(factor, eps)
    d0 = tr.direction
    cur = tr
    window = F(t_max)
    for r in ratios:
        cur, _ = ray_stage(layout, cur, r, delta1, delta2, window)
        window = window * r
        c = clearance(cur)
        cur = turn(layout, cur, d0, 2 * c, 2 * c)
        # consecutive stages exit to alternate sides; step past the previous stage's walls
        cur = cur.advance(F(delta1) + F(delta2) + tr.speed * window)
    return cur, ratios


# --------------------------------------------------------------------------
# separator


def separator_min_eps(kappa):
    kappa = F(kappa)
    return 6 * kappa / (1 - 4 * kappa)


def time_separator(layout: Layout, tr: Track, kappa, eps, divert_dir: Vec2, after):
    """Moving 45-degree mirror: offsets in [0, 1/2) turn into ``divert_dir``
    (port E), offsets in [1, 3/2) pass straight on (port L, offset reduced by 1).
    """
    kappa, eps = F(kappa), F(eps)
    v, S = tr.speed, tr.unit
    if not kappa < F(1, 4):
        raise InvalidGadgetParams("separator needs kappa < 1/4")
    if eps < separator_min_eps(kappa):
        raise InvalidGadgetParams(
            f"separator needs eps >= 6 kappa/(1 - 4 kappa) = {separator_min_eps(kappa)}"
        )
    sigma = tr.lateral.dot(divert_dir)
    ahead = 2 * clearance(tr)
    lane_span = tr.band * S
    t_ref = tr.time_base + (ahead + min(F(0), sigma * lane_span)) / v
    skew = lane_span / v  # 2 kappa for the standard band
    shift = (tr.band + 1) * S
    move = shift / (eps * v)
    hold1 = F(1, 2) + skew
    hold2 = F(3, 2) + skew - hold1 - move
    phases = (
        MotionPhase.hold(hold1, F(0)),
        MotionPhase.glide(move, F(0), shift),
        MotionPhase.hold(hold2, shift),
        MotionPhase.glide(move, shift, F(0)),
    )
    away = -tr.lateral

    def make(p, q):
        layout.add_timed(
            "moving_wall", lambda period: MovingWall(p, q, away, Schedule(t_ref, phases, period))
        )

    early = turn(layout, tr, divert_dir, ahead, after, make=make)
    late = tr.advance(ahead + after)
    late = replace(late, time_base=late.time_base + 1)
    return early, late


# --------------------------------------------------------------------------
# time stack operations (offsets in the base-4 "spread" code)


@dataclass(frozen=True)
class TimeOps:
    """How a compiled machine realises time multipliers."""

    mode: str = "bumper"  # bumper | moving | ray
    delta1: Fraction = F(2)
    delta2: Fraction = F(2)
    delta3: Fraction = F(3)
    eps: Fraction = F(1, 8)

    def mult(self, layout: Layout, tr: Track, factor: str, t_max) -> Track:
        if self.mode == "bumper":
            return time_mult_bumpers(layout, tr, factor, self.delta1, self.delta2, self.delta3, t_max)
        if self.mode == "moving":
            return time_mult_moving(layout, tr, factor, self.delta1, self.delta2, self.delta3, t_max, return_speed=self.eps * tr.speed)
        if self.mode == "ray":
            out, _ = ray_time_mult(layout, tr, factor, self.eps, self.delta1, self.delta2, t_max)
            return out
        raise InvalidGadgetParams(f"unknown time mode {self.mode!r}")


def time_push(layout: Layout, tr: Track, bit: int, ops: TimeOps) -> Track:
    """t -> (t + bit)/4: optional unit delay then two halvings."""
    if bit:
        # the extra unit shows up as offset, so the base must not move with it
        delayed = delay(layout, tr, F(1))
        tr = replace(delayed, time_base=delayed.time_base - 1)
    tr = ops.mult(layout, tr, "half", F(4, 3))
    return ops.mult(layout, tr, "half", F(2, 3))


def time_pop(layout: Layout, tr: Track, ops: TimeOps, kappa, eps, divert_dir: Vec2, after):
    """t -> 4t then split.  Returns (bit0 track, bit1 track)."""
    tr = ops.mult(layout, tr, "double", F(1, 3))
    tr = ops.mult(layout, tr, "double", F(2, 3))
    early, late = time_separator(layout, tr, kappa, eps, divert_dir, after)
    return early, late
