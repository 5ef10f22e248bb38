"""The five component kinds and their collision laws.

Walls, parabolas and one-way gates are static.  Moving walls translate along
a fixed unit axis following a periodic schedule; bumpers are static segments
that retro-reflect the ball and change its speed by a scheduled amount.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Tuple

from .errors import BallStopped, DegenerateContact, DomainError, InvalidGeometry, InvalidScene
from .numeric import (
    EXACT,
    Interval,
    RationalTimeFunction,
    Vec2,
    backend_of,
    constant_fn,
    linear_fn,
    reflect,
    roots_in_interval,
)


def _conv(x, backend):
    return backend.num(x)


@dataclass(frozen=True)
class Wall:
    a: Vec2
    b: Vec2
    id: str = ""

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidGeometry("wall endpoints coincide")

    kind = "wall"

    def normal(self) -> Vec2:
        return (self.b - self.a).perp()

    def convert(self, backend):
        return replace(self, a=self.a.convert(backend), b=self.b.convert(backend))


@dataclass(frozen=True)
class Parabola:
    """The arc y = a x^2 + b x + c for x in [x0, x1]."""

    a: object
    b: object
    c: object
    x0: object
    x1: object
    id: str = ""

    kind = "parabola"

    def __post_init__(self):
        if self.a == 0:
            raise InvalidGeometry("parabola with a = 0")
        if not self.x0 < self.x1:
            raise InvalidGeometry("parabola domain must satisfy x0 < x1")

    def y(self, x):
        return (self.a * x + self.b) * x + self.c

    def focus(self) -> Vec2:
        a, b, c = self.a, self.b, self.c
        return Vec2(-b / (2 * a), c - b * b / (4 * a) + 1 / (4 * a))

    def focal_length(self):
        return 1 / (4 * abs(self.a))

    def convert(self, backend):
        return replace(
            self,
            a=backend.num(self.a),
            b=backend.num(self.b),
            c=backend.num(self.c),
            x0=backend.num(self.x0),
            x1=backend.num(self.x1),
        )


@dataclass(frozen=True)
class OneWayGate:
    """Directional wall.

    A ball arriving from the left of the directed line start -> end passes;
    from the right it reflects.
    """

    start: Vec2
    end: Vec2
    id: str = ""

    kind = "gate"

    def __post_init__(self):
        if self.start == self.end:
            raise InvalidGeometry("gate endpoints coincide")

    @property
    def a(self):
        return self.start

    @property
    def b(self):
        return self.end

    def normal(self) -> Vec2:
        return (self.end - self.start).perp()

    def side(self, point: Vec2) -> int:
        """+1 on the pass side, -1 on the blocking side, 0 on the line."""
        c = (self.end - self.start).cross(point - self.start)
        return 1 if c > 0 else (-1 if c < 0 else 0)

    def convert(self, backend):
        return replace(self, start=self.start.convert(backend), end=self.end.convert(backend))


# --------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class MotionPhase:
    """One piece of a moving wall's displacement curve.

    The curve is parametric in ``p`` over ``[p0, p1]``: local time within the
    phase is ``time_fn(p)`` (increasing, ``time_fn(p0) = 0``) and the
    displacement is ``disp_fn(p)``.  Plain time-parameterised phases use the
    identity for ``time_fn``.
    """

    p0: object
    p1: object
    time_fn: RationalTimeFunction
    disp_fn: RationalTimeFunction

    @classmethod
    def direct(cls, duration, disp_fn: RationalTimeFunction) -> "MotionPhase":
        zero = duration - duration
        return cls(zero, duration, linear_fn(zero, zero + 1), disp_fn)

    @classmethod
    def hold(cls, duration, position) -> "MotionPhase":
        return cls.direct(duration, constant_fn(position))

    @classmethod
    def glide(cls, duration, start, end) -> "MotionPhase":
        """Constant-speed move from ``start`` to ``end``."""
        return cls.direct(duration, linear_fn(start, (end - start) / duration))

    @property
    def duration(self):
        return self.time_fn(self.p1)

    def is_identity_time(self) -> bool:
        t = self.time_fn
        return t.is_polynomial() and len(t.numerator) == 2 and t.numerator[0] == 0 and t.numerator[1] == t.denominator[0]

    def param_at(self, tau, backend):
        """Parameter value whose local time is ``tau``."""
        if self.is_identity_time():
            return self.p0 + tau if self.p0 != 0 else tau
        roots = roots_in_interval(
            self.time_fn, Interval(self.p0, self.p1), backend, affine=(tau, 0)
        )
        if not roots:
            # rounding can push tau a hair outside; clamp to the nearer end
            return self.p0 if abs(tau) < abs(self.duration - tau) else self.p1
        return roots[0]

    def speed_fn(self) -> RationalTimeFunction:
        """d(displacement)/d(time) as a rational function of ``p``."""
        dd = self.disp_fn.derivative()
        dt = self.time_fn.derivative()
        from .numeric import poly_mul

        return RationalTimeFunction(
            poly_mul(dd.numerator, dt.denominator), poly_mul(dd.denominator, dt.numerator)
        )

    def convert(self, backend):
        return MotionPhase(
            backend.num(self.p0),
            backend.num(self.p1),
            self.time_fn.convert(backend),
            self.disp_fn.convert(backend),
        )


@dataclass(frozen=True)
class Schedule:
    """Periodic motion starting at ``t_start``.

    Phases run back to back; after the last phase the wall rests until the
    period ends.  Before ``t_start`` the displacement is zero.
    """

    t_start: object
    phases: Tuple[MotionPhase, ...]
    period: object

    @classmethod
    def two_phase(cls, t_start, t1, move_fn, t2, return_fn) -> "Schedule":
        """Active interval [0, t1) with ``move_fn`` then [t1, t2) with ``return_fn``.

        ``return_fn`` is evaluated on local time measured from ``t1``.
        """
        return cls(t_start, (MotionPhase.direct(t1, move_fn), MotionPhase.direct(t2 - t1, return_fn)), t2)

    @property
    def active_length(self):
        total = self.period - self.period
        for ph in self.phases:
            total = total + ph.duration
        return total

    def local_time(self, t):
        if t < self.t_start:
            return None
        tau = (t - self.t_start) % self.period
        return tau

    def locate(self, tau):
        """(phase index, time into phase) or (None, tau) in the trailing rest."""
        start = tau - tau
        for i, ph in enumerate(self.phases):
            d = ph.duration
            if tau < start + d:
                return i, tau - start
            start = start + d
        return None, tau - start

    def phase_starts(self):
        out = []
        start = self.period - self.period
        for ph in self.phases:
            out.append(start)
            start = start + ph.duration
        return out

    def convert(self, backend):
        return Schedule(
            backend.num(self.t_start),
            tuple(ph.convert(backend) for ph in self.phases),
            backend.num(self.period),
        )

    def validate(self, tol=0):
        if not self.period > 0:
            raise InvalidScene("schedule period must be positive")
        if self.active_length > self.period + tol:
            raise InvalidScene("schedule phases exceed the period")
        prev = None
        for ph in self.phases:
            for fn in (ph.time_fn, ph.disp_fn):
                if fn.degree > RationalTimeFunction.MAX_DEGREE:
                    raise InvalidScene("schedule function degree above 8")
            if abs(ph.time_fn(ph.p0)) > tol:
                raise InvalidScene("phase local time must start at 0")
            if not ph.duration > 0:
                raise InvalidScene("phase duration must be positive")
            d0 = ph.disp_fn(ph.p0)
            if prev is None:
                if abs(d0) > tol:
                    raise InvalidScene("motion must start from the home position")
            elif abs(d0 - prev) > tol:
                raise InvalidScene("displacement is discontinuous between phases")
            prev = ph.disp_fn(ph.p1)
        if prev is not None and abs(prev) > tol:
            raise InvalidScene("wall does not return home by the end of the period")


@dataclass(frozen=True)
class MovingWall:
    a: Vec2
    b: Vec2
    motion_dir: Vec2
    schedule: Schedule
    id: str = ""

    kind = "moving_wall"

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidGeometry("wall endpoints coincide")

    def normal(self) -> Vec2:
        return (self.b - self.a).perp()

    def convert(self, backend):
        return replace(
            self,
            a=self.a.convert(backend),
            b=self.b.convert(backend),
            motion_dir=self.motion_dir.convert(backend),
            schedule=self.schedule.convert(backend),
        )

    def validate(self, tol=0):
        n2 = self.motion_dir.norm2()
        if abs(n2 - 1) > tol:
            raise InvalidScene(f"moving wall {self.id}: motion_dir must be a unit vector")
        self.schedule.validate(tol)

    def max_speed(self, backend=None):
        """Largest |d displacement / dt| over all phases.

        Checked at phase ends and at the critical points of the speed curve.
        """
        backend = backend or backend_of(self.a.x)
        best = self.a.x - self.a.x
        for ph in self.schedule.phases:
            sp = ph.speed_fn()
            pts = [ph.p0, ph.p1]
            crit = sp.derivative()
            if crit.numerator and len(crit.numerator) > 1:
                pts += roots_in_interval(crit, Interval(ph.p0, ph.p1), backend)
            for p in pts:
                best = max(best, abs(sp(p)))
        return best


@dataclass(frozen=True)
class BumperSchedule:
    """Bumper activity: effect on [t_start, t_start + active) repeating with ``period``."""

    t_start: object
    active: object
    period: object

    def convert(self, backend):
        return BumperSchedule(backend.num(self.t_start), backend.num(self.active), backend.num(self.period))


@dataclass(frozen=True)
class Bumper:
    a: Vec2
    b: Vec2
    sign: int
    schedule: BumperSchedule
    effect_accel: RationalTimeFunction
    id: str = ""

    kind = "bumper"

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidGeometry("bumper endpoints coincide")
        if self.sign not in (1, -1):
            raise InvalidGeometry("bumper sign must be +1 or -1")

    def normal(self) -> Vec2:
        return (self.b - self.a).perp()

    def convert(self, backend):
        return replace(
            self,
            a=self.a.convert(backend),
            b=self.b.convert(backend),
            schedule=self.schedule.convert(backend),
            effect_accel=self.effect_accel.convert(backend),
        )


@dataclass(frozen=True)
class BallState:
    pos: Vec2
    vel: Vec2
    time: object

    def convert(self, backend):
        return BallState(self.pos.convert(backend), self.vel.convert(backend), backend.num(self.time))

    def at(self, t) -> Vec2:
        return self.pos + self.vel * (t - self.time)


# --------------------------------------------------------------------------
# responses


def _check_not_parallel(v: Vec2, a: Vec2, b: Vec2):
    if v.cross(b - a) == 0:
        raise DegenerateContact("velocity parallel to the wall")


def respond_wall(v: Vec2, w, contact_u=None) -> Vec2:
    """Specular reflection off a segment; ``contact_u`` is the hit parameter in [0, 1]."""
    if contact_u is not None and (contact_u == 0 or contact_u == 1):
        raise DegenerateContact("contact at a wall endpoint")
    _check_not_parallel(v, w.a, w.b)
    return reflect(v, w.normal())


def respond_gate(v: Vec2, g: OneWayGate, approach_side: int, contact_u=None):
    """``("pass", v)`` from the pass side, ``("reflect", v')`` from the blocking side."""
    if contact_u is not None and (contact_u == 0 or contact_u == 1):
        raise DegenerateContact("contact at a gate endpoint")
    if approach_side == 0 or v.cross(g.end - g.start) == 0:
        raise DegenerateContact("gate approached along its own line")
    if approach_side > 0:
        return "pass", v
    return "reflect", reflect(v, g.normal())


def schedule_state(schedule: Schedule, t, backend):
    """Displacement and scalar speed of a schedule at absolute time ``t``."""
    zero = backend.num(0)
    tau = schedule.local_time(t)
    if tau is None:
        return zero, zero
    idx, into = schedule.locate(tau)
    if idx is None:
        return zero, zero
    ph = schedule.phases[idx]
    p = ph.param_at(into, backend)
    return ph.disp_fn(p), ph.speed_fn()(p)


def wall_state_at(m: MovingWall, t, backend=None):
    backend = backend or backend_of(m.a.x)
    if t < 0:
        raise DomainError("time must be non-negative")
    d, s = schedule_state(m.schedule, t, backend)
    return d, m.motion_dir * s


def respond_moving_wall(v: Vec2, wall_velocity: Vec2, n: Vec2) -> Vec2:
    """Reflect in the wall's rest frame; ``n`` points toward the ball's side."""
    rel = v - wall_velocity
    if rel.dot(n) >= 0:
        raise DegenerateContact("ball does not approach the wall in its rest frame")
    return reflect(rel, n) + wall_velocity


def bumper_effect(bp: Bumper, t, backend=None):
    backend = backend or backend_of(bp.a.x)
    zero = backend.num(0)
    sch = bp.schedule
    if t < sch.t_start:
        return zero
    tau = (t - sch.t_start) % sch.period
    if tau >= sch.active:
        return zero
    return bp.sign * tau * bp.effect_accel(tau)


def speed_of(v: Vec2, backend):
    s = backend.sqrt(v.norm2())
    if s is None:
        raise DegenerateContact("speed is irrational under exact arithmetic")
    return s


def respond_bumper(v: Vec2, bp: Bumper, t, backend=None) -> Vec2:
    backend = backend or backend_of(v.x)
    speed = speed_of(v, backend)
    out = speed + bumper_effect(bp, t, backend)
    if out <= 0:
        raise BallStopped(f"bumper {bp.id} absorbed all speed")
    return -v * (out / speed)
