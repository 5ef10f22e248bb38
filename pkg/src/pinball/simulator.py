"""Event-driven ball propagation.

Each step finds the earliest future contact over all components, applies the
collision law and records an event.  A float64 prefilter (numpy) narrows the
component set; every contact that can be the earliest is then recomputed in the
scene's own backend, so the float pass never decides an outcome by itself.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .components import (
    BallState,
    Bumper,
    MovingWall,
    OneWayGate,
    Parabola,
    Wall,
    respond_bumper,
    respond_gate,
    respond_moving_wall,
    respond_wall,
)
from .errors import (
    AmbiguousRoot,
    DegenerateContact,
    DomainError,
    InvalidScene,
    PinballError,
    SimultaneousContact,
)
from .numeric import (
    EXACT,
    BigFloat,
    Interval,
    Vec2,
    parabola_hit_params,
    parabola_normal,
    poly_add,
    poly_mul,
    poly_scale,
    reflect,
    roots_in_interval,
    segment_hit_params,
)

DEFAULT_TARGET_TOL = "1e-9"

STATIC_SEGMENTS = (Wall, OneWayGate, Bumper)


@dataclass
class Scene:
    components: tuple
    target: Optional[Vec2] = None
    speed_cap_ratio: object = None
    ref_speed: object = None
    backend: object = EXACT
    constant_speed: bool = False
    target_tol: object = None
    _index: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.components = tuple(self.components)

    @property
    def by_id(self):
        return {c.id: c for c in self.components}

    def index(self):
        if self._index is None:
            self._index = SceneIndex(self)
        return self._index


def build_scene(
    components,
    target=None,
    backend=EXACT,
    speed_cap_ratio=None,
    ref_speed=None,
    constant_speed=False,
    allow_exact_moving=False,
    target_tol=None,
) -> Scene:
    """Validate and convert components into a scene for ``backend``.

    Components without an id get ``c<n>``.  Raises ``InvalidScene`` for duplicate
    ids, bumpers in constant-speed mode, moving parts under the exact backend
    (unless ``allow_exact_moving``) and schedules that break the speed cap.
    """
    comps = []
    seen = set()
    for i, c in enumerate(components):
        cid = c.id or f"c{i}"
        if cid in seen:
            raise InvalidScene(f"duplicate component id {cid!r}")
        seen.add(cid)
        if not c.id:
            from dataclasses import replace

            c = replace(c, id=cid)
        comps.append(c.convert(backend))
    moving = [c for c in comps if isinstance(c, (MovingWall, Bumper))]
    if backend.exact and moving and not allow_exact_moving:
        raise InvalidScene("exact backend cannot host moving walls or bumpers; use bigfloat")
    if constant_speed and any(isinstance(c, Bumper) for c in comps):
        raise InvalidScene("bumpers are not allowed in constant-speed mode")
    eps = backend.num(speed_cap_ratio) if speed_cap_ratio is not None else None
    vref = backend.num(ref_speed) if ref_speed is not None else None
    tol = backend.residual if not backend.exact else 0
    for c in comps:
        if isinstance(c, MovingWall):
            c.validate(tol)
            if eps is not None:
                if vref is None:
                    raise InvalidScene("speed cap needs a reference speed")
                top = c.max_speed(backend)
                if top > eps * vref + tol:
                    raise InvalidScene(
                        f"moving wall {c.id}: speed {float(top):.6g} exceeds cap {float(eps * vref):.6g}"
                    )
    ttol = None
    if not backend.exact:
        ttol = backend.num(target_tol if target_tol is not None else DEFAULT_TARGET_TOL)
    return Scene(
        tuple(comps),
        target.convert(backend) if target is not None else None,
        eps,
        vref,
        backend,
        constant_speed,
        ttol,
    )


@dataclass(frozen=True)
class Event:
    time: object
    component_id: str
    point: Vec2
    kind: str  # reflect | pass | bumper | moving_wall

    @property
    def is_reflection(self):
        return self.kind != "pass"


@dataclass
class Trace:
    initial: BallState
    events: List[Event]
    states: List[BallState]  # states[0] is the initial state, states[i] follows events[i-1]

    @property
    def segments(self):
        out = []
        for s0, s1 in zip(self.states, self.states[1:]):
            out.append((s0.pos, s1.pos))
        return out

    def reflections(self):
        return sum(1 for e in self.events if e.kind != "pass")


@dataclass(frozen=True)
class Outcome:
    variant: str  # hit | bound | escaped | error
    time: object = None
    events_used: int = 0
    message: str = ""

    def describe(self, backend=EXACT):
        t = backend.fmt(self.time) if self.time is not None else "-"
        if self.variant == "hit":
            return f"Hit t={t}"
        if self.variant == "bound":
            return f"BoundExhausted events={self.events_used} t={t}"
        if self.variant == "escaped":
            return f"Escaped t={t}"
        return f"Error {self.message}"


# --------------------------------------------------------------------------
# float prefilter


class SceneIndex:
    """Float64 arrays for a quick conservative scan of the next contact."""

    REL = 1e-9
    ABS = 1e-7

    def __init__(self, scene: Scene):
        self.scene = scene
        segs, pars, movs = [], [], []
        for c in scene.components:
            if isinstance(c, STATIC_SEGMENTS):
                segs.append(c)
            elif isinstance(c, Parabola):
                pars.append(c)
            elif isinstance(c, MovingWall):
                movs.append(c)
        self.segs, self.pars, self.movs = segs, pars, movs
        f = float
        self.seg_a = np.array([[f(c.a.x), f(c.a.y)] for c in segs]).reshape(-1, 2)
        self.seg_e = np.array([[f(c.b.x - c.a.x), f(c.b.y - c.a.y)] for c in segs]).reshape(-1, 2)
        self.par = np.array([[f(c.a), f(c.b), f(c.c), f(c.x0), f(c.x1)] for c in pars]).reshape(-1, 5)
        boxes = []
        for c in movs:
            lo, hi = _displacement_range(c)
            m = (f(c.motion_dir.x), f(c.motion_dir.y))
            pts = []
            for p in (c.a, c.b):
                for d in (lo, hi):
                    pts.append((f(p.x) + d * m[0], f(p.y) + d * m[1]))
            xs = [q[0] for q in pts]
            ys = [q[1] for q in pts]
            pad = 1e-6 * (1 + max(map(abs, xs + ys)))
            boxes.append([min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad])
        self.boxes = np.array(boxes).reshape(-1, 4)

    def scan(self, px, py, vx, vy):
        """Return (candidate components with float advance estimates, moving windows)."""
        est = []
        if len(self.segs):
            a, e = self.seg_a, self.seg_e
            denom = vx * e[:, 1] - vy * e[:, 0]
            wx = a[:, 0] - px
            wy = a[:, 1] - py
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (wx * e[:, 1] - wy * e[:, 0]) / denom
                u = (wx * vy - wy * vx) / denom
            ok = (np.abs(denom) > 0) & (u >= -1e-9) & (u <= 1 + 1e-9) & np.isfinite(s)
            for i in np.nonzero(ok)[0]:
                est.append((float(s[i]), self.segs[i]))
        if len(self.pars):
            P = self.par
            A = P[:, 0] * vx * vx
            B = 2 * P[:, 0] * px * vx + P[:, 1] * vx - vy
            C = P[:, 0] * px * px + P[:, 1] * px + P[:, 2] - py
            for i in range(len(self.pars)):
                for s in _quad_roots(A[i], B[i], C[i]):
                    x = px + s * vx
                    span = P[i, 4] - P[i, 3]
                    if P[i, 3] - 1e-9 * (1 + span) <= x <= P[i, 4] + 1e-9 * (1 + span):
                        est.append((s, self.pars[i]))
        windows = []
        if len(self.movs):
            bx = self.boxes
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (bx[:, 0] - px) / vx
                t2 = (bx[:, 2] - px) / vx
                t3 = (bx[:, 1] - py) / vy
                t4 = (bx[:, 3] - py) / vy
            inx = (px >= bx[:, 0]) & (px <= bx[:, 2])
            iny = (py >= bx[:, 1]) & (py <= bx[:, 3])
            lo_x = np.where(vx == 0, np.where(inx, -np.inf, np.inf), np.minimum(t1, t2))
            hi_x = np.where(vx == 0, np.where(inx, np.inf, -np.inf), np.maximum(t1, t2))
            lo_y = np.where(vy == 0, np.where(iny, -np.inf, np.inf), np.minimum(t3, t4))
            hi_y = np.where(vy == 0, np.where(iny, np.inf, -np.inf), np.maximum(t3, t4))
            s_in = np.maximum(lo_x, lo_y)
            s_out = np.minimum(hi_x, hi_y)
            for i in np.nonzero((s_in <= s_out) & (s_out >= 0))[0]:
                windows.append((max(float(s_in[i]), 0.0), float(s_out[i]), self.movs[i]))
        return est, windows


def _quad_roots(A, B, C):
    if A == 0:
        if B == 0:
            return []
        return [-C / B]
    disc = B * B - 4 * A * C
    scale = B * B + abs(4 * A * C)
    if disc < 0:
        if disc < -1e-12 * scale:
            return []
        disc = 0.0
    r = math.sqrt(disc)
    q = -0.5 * (B + math.copysign(r, B))
    out = [q / A]
    if q != 0:
        out.append(C / q)
    return sorted(out)


def _displacement_range(m: MovingWall):
    lo = hi = 0.0
    for ph in m.schedule.phases:
        for k in range(65):
            d = float(ph.disp_fn(ph.p0 + (ph.p1 - ph.p0) * k / 64))
            lo, hi = min(lo, d), max(hi, d)
    span = hi - lo
    return lo - 0.02 * span - 1e-9, hi + 0.02 * span + 1e-9


# --------------------------------------------------------------------------
# exact contact evaluation


@dataclass
class Contact:
    time: object
    comp: object
    point: Vec2
    u: object = None  # segment parameter or parabola x
    wall_velocity: Optional[Vec2] = None


BEYOND = object()


def _static_contact(ball: BallState, c, backend):
    if isinstance(c, Parabola):
        s = parabola_hit_params(ball.pos, ball.vel, c, backend)
        if s is None:
            return None
        pt = ball.pos + ball.vel * s
        return Contact(ball.time + s, c, pt, pt.x)
    hit = segment_hit_params(ball.pos, ball.vel, c.a, c.b, backend)
    if hit is None:
        return None
    s, u = hit
    return Contact(ball.time + s, c, ball.pos + ball.vel * s, u)


def _moving_contact(ball: BallState, m: MovingWall, backend, t_lo, t_hi):
    """Earliest contact with a moving wall in the time window (t_lo, t_hi]."""
    sch = m.schedule
    e = m.b - m.a
    n = e.perp()
    nm = n.dot(m.motion_dir)
    nv = n.dot(ball.vel)
    base = n.dot(ball.pos - m.a)
    gap = backend.tie
    zero = backend.num(0)

    def accept(t, disp, speed):
        if t <= ball.time + gap or t > t_hi:
            return None
        p = ball.at(t)
        off = m.motion_dir * disp
        u = (p - m.a - off).dot(e) / e.norm2()
        if u < 0 or u > 1:
            return None
        return Contact(t, m, p, u, m.motion_dir * speed)

    def static_window(w0, w1, disp):
        # wall parked at displacement ``disp`` during [w0, w1)
        if nv == 0:
            return None
        t = ball.time + (disp * nm - base) / nv
        if t < w0 or t >= w1:
            return None
        return accept(t, disp, zero)

    if t_lo < sch.t_start:
        c = static_window(t_lo, sch.t_start, zero)
        if c is not None:
            return c
        if sch.t_start > t_hi:
            return None
    period = sch.period
    k = max(0, int(math.floor(float((max(t_lo, sch.t_start) - sch.t_start) / period))) - 1)
    starts = sch.phase_starts()
    active_end = sch.active_length
    while True:
        origin = sch.t_start + k * period
        if origin > t_hi:
            return None
        best = None
        for ph, st in zip(sch.phases, starts):
            ta = origin + st
            tb = ta + ph.duration
            if tb < t_lo or ta > t_hi:
                continue
            tn, td = ph.time_fn.numerator, ph.time_fn.denominator
            dn, dd = ph.disp_fn.numerator, ph.disp_fn.denominator
            const = base + (ta - ball.time) * nv
            poly = poly_add(
                poly_add(poly_scale(poly_mul(td, dd), const), poly_scale(poly_mul(tn, dd), nv)),
                poly_scale(poly_mul(dn, td), -nm),
            )
            if not poly:
                raise DegenerateContact(f"ball travels along moving wall {m.id}")
            for p in roots_in_interval(poly, Interval(ph.p0, ph.p1), backend):
                t = ta + ph.time_fn(p)
                c = accept(t, ph.disp_fn(p), ph.speed_fn()(p))
                if c is not None:
                    best = c
                    break
            if best is not None:
                return best
        rest0 = origin + active_end
        rest1 = origin + period
        if rest1 > rest0 and rest1 >= t_lo and rest0 <= t_hi:
            c = static_window(rest0, rest1, zero)
            if c is not None:
                return c
        k += 1


def find_contact(ball: BallState, scene: Scene, horizon):
    """Earliest contact at or before ``horizon``.

    Returns a ``Contact``, ``None`` when the ray is free forever, or ``BEYOND``
    when something may still be hit after ``horizon``.
    """
    backend = scene.backend
    if ball.vel.is_zero():
        raise DomainError("ball is not moving")
    idx = scene.index()
    px, py = float(ball.pos.x), float(ball.pos.y)
    vx, vy = float(ball.vel.x), float(ball.vel.y)
    vmag = math.hypot(vx, vy)
    est, windows = idx.scan(px, py, vx, vy)
    small = 1e-9 * (1 + abs(px) + abs(py)) / max(vmag, 1e-300)
    # near-zero estimates (the surface just left) are always rechecked exactly
    pending = sorted(est, key=lambda sc: sc[0])
    contacts = []
    near = [c for s, c in pending if s <= small]
    ahead = [(s, c) for s, c in pending if s > small]
    for c in near:
        ct = _static_contact(ball, c, backend)
        if ct is not None:
            contacts.append(ct)
    margin = SceneIndex.ABS
    while ahead:
        s_min = ahead[0][0]
        margin = SceneIndex.ABS + SceneIndex.REL * abs(s_min) + small
        group = [c for s, c in ahead if s <= s_min + margin]
        ahead = [(s, c) for s, c in ahead if s > s_min + margin]
        for c in group:
            ct = _static_contact(ball, c, backend)
            if ct is not None:
                contacts.append(ct)
        if contacts:
            break
    later_static = bool(ahead)
    best_t = min((ct.time for ct in contacts), default=None)
    t_cut = horizon if best_t is None or best_t > horizon else best_t
    moving_later = False
    for s_in, s_out, m in windows:
        w_lo = ball.time + backend.num(max(s_in - margin, 0.0))
        if w_lo > t_cut:
            moving_later = True
            continue
        w_hi = min(t_cut, ball.time + backend.num(s_out + margin))
        ct = _moving_contact(ball, m, backend, max(ball.time, w_lo), w_hi)
        if ct is not None:
            contacts.append(ct)
        elif s_out + margin > float(t_cut - ball.time):
            moving_later = True
    if not contacts:
        return BEYOND if (later_static or moving_later) else None
    contacts.sort(key=lambda c: c.time)
    first = contacts[0]
    if first.time > horizon:
        return BEYOND
    for other in contacts[1:]:
        if other.comp is first.comp:
            continue
        if other.time - first.time <= backend.tie:
            raise SimultaneousContact(
                f"{first.comp.id} and {other.comp.id} are hit at the same time"
            )
        break
    return first


def _orient_toward(n: Vec2, v: Vec2) -> Vec2:
    """Normal flipped to face a ball moving with velocity ``v`` into the surface."""
    return n if v.dot(n) < 0 else -n


def respond(ball: BallState, ct: Contact, scene: Scene) -> Tuple[Event, BallState]:
    c = ct.comp
    v = ball.vel
    backend = scene.backend
    kind = "reflect"
    if isinstance(c, Parabola):
        if ct.u == c.x0 or ct.u == c.x1:
            raise DegenerateContact(f"contact at an endpoint of parabola {c.id}")
        n = parabola_normal(c, ct.u)
        if v.dot(n) == 0:
            raise DegenerateContact(f"ball grazes parabola {c.id}")
        new_v = reflect(v, n)
    elif isinstance(c, OneWayGate):
        e = c.end - c.start
        side = -1 if e.cross(v) > 0 else (1 if e.cross(v) < 0 else 0)
        kind, new_v = respond_gate(v, c, side, ct.u)
    elif isinstance(c, Wall):
        new_v = respond_wall(v, c, ct.u)
    elif isinstance(c, Bumper):
        if ct.u == 0 or ct.u == 1:
            raise DegenerateContact(f"contact at an endpoint of bumper {c.id}")
        kind = "bumper"
        new_v = respond_bumper(v, c, ct.time, backend)
    elif isinstance(c, MovingWall):
        if ct.u == 0 or ct.u == 1:
            raise DegenerateContact(f"contact at an endpoint of moving wall {c.id}")
        kind = "moving_wall"
        n = c.normal()
        wv = ct.wall_velocity
        rel = v - wv
        n = _orient_toward(n, rel)
        if scene.constant_speed:
            new_v = reflect(v, n)
        else:
            new_v = respond_moving_wall(v, wv, n)
    else:  # pragma: no cover - exhaustive above
        raise InvalidScene(f"unknown component {c!r}")
    ev = Event(ct.time, c.id, ct.point, "pass" if kind == "pass" else kind)
    return ev, BallState(ct.point, new_v, ct.time)


def next_event(ball: BallState, scene: Scene, horizon=None) -> Optional[Event]:
    """The next contact as an ``Event`` (velocity is not updated)."""
    if horizon is None:
        horizon = scene.backend.num(10**30)
    ct = find_contact(ball, scene, horizon)
    if ct is None or ct is BEYOND:
        return None
    ev, _ = respond(ball, ct, scene)
    return ev


def target_on_segment(p0: Vec2, p1: Vec2, target: Vec2, tol=None):
    """Parameter in [0, 1] where ``target`` lies on p0-p1, else ``None``.

    With ``tol`` (BigFloat) the perpendicular distance may be up to ``tol``.
    """
    d = p1 - p0
    dd = d.norm2()
    if dd == 0:
        raise DomainError("degenerate segment")
    w = target - p0
    u = w.dot(d) / dd
    if tol is None:
        if w.cross(d) != 0 or u < 0 or u > 1:
            return None
        return u
    dist2 = w.cross(d) ** 2 / dd
    slack = tol / (dd ** 0.5 if not hasattr(dd, "context") else dd.context.sqrt(dd))
    if dist2 > tol * tol or u < -slack or u > 1 + slack:
        return None
    return min(max(u, u - u), u - u + 1)


def _target_time(scene: Scene, ball: BallState, t_end):
    """Time at which the ball meets the target before ``t_end`` (None = open ray)."""
    if scene.target is None:
        return None
    tol = None if scene.backend.exact else scene.target_tol
    if t_end is None:
        # ray: project onto the direction
        w = scene.target - ball.pos
        vv = ball.vel.norm2()
        s = w.dot(ball.vel) / vv
        if s < 0:
            return None
        off = w - ball.vel * s
        if tol is None:
            return ball.time + s if off.is_zero() else None
        return ball.time + s if off.norm2() <= tol * tol else None
    p1 = ball.at(t_end)
    if p1 == ball.pos:
        return None
    u = target_on_segment(ball.pos, p1, scene.target, tol)
    if u is None:
        return None
    return ball.time + u * (t_end - ball.time)


def run(scene: Scene, b0: BallState, max_events: int, max_time, stop_on_hit=True):
    """Simulate from ``b0``; returns ``(Outcome, Trace)``.

    Errors raised by the geometry are turned into an ``error`` outcome whose
    trace holds everything up to the failing contact.
    """
    if max_events < 1:
        raise DomainError("max_events must be at least 1")
    backend = scene.backend
    max_time = backend.num(max_time)
    if not max_time > 0:
        raise DomainError("max_time must be positive")
    ball = b0.convert(backend)
    trace = Trace(ball, [], [ball])
    hit_time = None
    try:
        while True:
            if len(trace.events) >= max_events:
                tt = _target_time(scene, ball, max_time) if stop_on_hit else None
                if tt is not None and hit_time is None:
                    return Outcome("hit", tt, len(trace.events)), trace
                return Outcome("bound", ball.time, len(trace.events)), trace
            ct = find_contact(ball, scene, max_time)
            if ct is None:
                tt = _target_time(scene, ball, None)
                if tt is not None:
                    return Outcome("hit", tt, len(trace.events)), trace
                return Outcome("escaped", ball.time, len(trace.events)), trace
            if ct is BEYOND:
                tt = _target_time(scene, ball, max_time)
                if tt is not None:
                    return Outcome("hit", tt, len(trace.events)), trace
                return Outcome("bound", max_time, len(trace.events)), trace
            tt = _target_time(scene, ball, ct.time)
            if tt is not None and stop_on_hit:
                return Outcome("hit", tt, len(trace.events)), trace
            ev, ball = respond(ball, ct, scene)
            trace.events.append(ev)
            trace.states.append(ball)
    except PinballError as exc:
        return Outcome("error", ball.time, len(trace.events), f"{type(exc).__name__}: {exc}"), trace


def run_batch(scene: Scene, balls, max_events: int, max_time, workers: int = 4):
    """Run several balls; results come back in input order."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: run(scene, b, max_events, max_time), balls))


def dump_trace(trace: Trace, backend=EXACT) -> str:
    f = backend.fmt
    b = trace.initial
    lines = [
        f"# pinball-trace v1 backend={backend.name} start=({f(b.pos.x)},{f(b.pos.y)}) "
        f"vel=({f(b.vel.x)},{f(b.vel.y)}) t={f(b.time)}"
    ]
    for e in trace.events:
        lines.append(f"{f(e.time)} {e.component_id} {e.kind} {f(e.point.x)} {f(e.point.y)}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str, backend=EXACT):
    """Inverse of ``dump_trace`` for the event lines; returns (header, events)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# pinball-trace v1"):
        raise DomainError("not a trace dump")
    events = []
    for ln in lines[1:]:
        t, cid, kind, x, y = ln.split()
        events.append(Event(backend.num(t), cid, Vec2(backend.num(x), backend.num(y)), kind))
    return lines[0], events
