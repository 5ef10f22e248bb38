"""Scalar backends, 2D vectors, reflection, curve intersection and root isolation.

Two backends are supported.  ``ExactRational`` stores every scalar as a
``fractions.Fraction``; ``BigFloat`` stores ``mpmath`` floats in a private
context with a fixed number of bits.  Scalars are plain Python numbers of the
backend's type; a backend object knows how to build, compare and print them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath

_MPF = mpmath.ctx_mp_python._mpf

from .errors import (
    AmbiguousRoot,
    BackendMismatch,
    DegenerateContact,
    DomainError,
    InvalidGeometry,
    NonRationalIntersection,
    OutOfDomain,
)


def _parse_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise BackendMismatch("booleans are not scalars")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise BackendMismatch(f"cannot parse scalar {x!r}") from exc
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, _MPF):
        return mpf_to_fraction(x)
    raise BackendMismatch(f"unsupported scalar type {type(x).__name__}")


def mpf_to_fraction(x) -> Fraction:
    """Exact value of a finite mpmath float."""
    sign, man, exp, _bc = x._mpf_
    if not man and exp:
        raise DomainError("non-finite float has no rational value")
    value = Fraction(int(man)) * (Fraction(2) ** exp)
    return -value if sign else value


class ExactRational:
    """Exact rational arithmetic via ``fractions.Fraction``."""

    name = "exact"
    exact = True
    precision_bits = None
    tie = Fraction(0)
    residual = Fraction(0)
    # bisection stops here when an irrational root has to be approximated
    root_tol = Fraction(1, 2**100)

    def num(self, x) -> Fraction:
        return _parse_fraction(x)

    def owns(self, x) -> bool:
        return isinstance(x, Fraction)

    def sqrt(self, s):
        return rational_sqrt(s)

    def to_fraction(self, x) -> Fraction:
        return Fraction(x)

    def fmt(self, x) -> str:
        x = Fraction(x)
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

    def __eq__(self, other):
        return isinstance(other, ExactRational)

    def __hash__(self):
        return hash("exact")

    def __repr__(self):
        return "ExactRational()"


@lru_cache(maxsize=None)
def _context(bits: int):
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


class BigFloat:
    """Round-to-nearest floats with ``precision_bits`` of mantissa.

    Tolerances scale with the precision so that a 256-bit backend uses a
    contact tie window near 1e-30 and a residual bound near 1e-25.
    """

    name = "bigfloat"
    exact = False

    def __init__(self, precision_bits: int = 256):
        if precision_bits < 64:
            raise DomainError("BigFloat needs at least 64 bits")
        self.precision_bits = int(precision_bits)
        self.ctx = _context(self.precision_bits)
        self.mpf = self.ctx.mpf
        self.tie = self.mpf(2) ** -(self.precision_bits * 100 // 256)
        self.residual = self.mpf(2) ** -(self.precision_bits * 83 // 256)
        self.root_tol = self.tie

    def num(self, x):
        if isinstance(x, self.mpf):
            return x
        if isinstance(x, _MPF):
            return self.mpf(mpf_to_fraction(x).numerator) / mpf_to_fraction(x).denominator
        f = _parse_fraction(x)
        if f.denominator == 1:
            return self.mpf(f.numerator)
        return self.mpf(f.numerator) / f.denominator

    def owns(self, x) -> bool:
        return isinstance(x, self.mpf)

    def sqrt(self, s):
        if s < 0:
            raise DomainError("square root of a negative number")
        return self.ctx.sqrt(s)

    def to_fraction(self, x) -> Fraction:
        return mpf_to_fraction(self.num(x))

    def fmt(self, x) -> str:
        return self.ctx.nstr(self.num(x), max(20, self.precision_bits * 3 // 10), strip_zeros=False)

    def __eq__(self, other):
        return isinstance(other, BigFloat) and other.precision_bits == self.precision_bits

    def __hash__(self):
        return hash(("bigfloat", self.precision_bits))

    def __repr__(self):
        return f"BigFloat({self.precision_bits})"


EXACT = ExactRational()


def backend_of(*values):
    """Infer the backend from scalar values; raises if they disagree."""
    found = None
    for v in values:
        if isinstance(v, Fraction):
            b = EXACT
        elif isinstance(v, _MPF):
            b = BigFloat(v.context.prec)
        elif isinstance(v, int) and not isinstance(v, bool):
            continue
        else:
            raise BackendMismatch(f"not a scalar: {v!r}")
        if found is None:
            found = b
        elif found != b:
            raise BackendMismatch(f"mixed backends {found!r} and {b!r}")
    return found or EXACT


def parse_backend(name: str, precision_bits: int = 256):
    if name in ("exact", "rational", "ExactRational"):
        return EXACT
    if name in ("bigfloat", "float", "BigFloat"):
        return BigFloat(precision_bits)
    raise DomainError(f"unknown backend {name!r}")


# --------------------------------------------------------------------------
# vectors


class Vec2:
    """Immutable 2D vector of backend scalars."""

    __slots__ = ("x", "y")

    def __init__(self, x, y):
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __setattr__(self, name, value):
        raise AttributeError("Vec2 is immutable")

    def __add__(self, o):
        return Vec2(self.x + o.x, self.y + o.y)

    def __sub__(self, o):
        return Vec2(self.x - o.x, self.y - o.y)

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def __mul__(self, k):
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return Vec2(self.x / k, self.y / k)

    def dot(self, o):
        return self.x * o.x + self.y * o.y

    def cross(self, o):
        return self.x * o.y - self.y * o.x

    def norm2(self):
        return self.x * self.x + self.y * self.y

    def perp(self):
        """Counter-clockwise rotation by 90 degrees."""
        return Vec2(-self.y, self.x)

    def is_zero(self):
        return self.x == 0 and self.y == 0

    def convert(self, backend):
        return Vec2(backend.num(self.x), backend.num(self.y))

    def __eq__(self, o):
        return isinstance(o, Vec2) and self.x == o.x and self.y == o.y

    def __hash__(self):
        return hash((self.x, self.y))

    def __iter__(self):
        yield self.x
        yield self.y

    def __repr__(self):
        return f"Vec2({self.x}, {self.y})"


def vec(x, y, backend=EXACT) -> Vec2:
    return Vec2(backend.num(x), backend.num(y))


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError("interval with lo > hi")

    def contains(self, x) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True


def reflect(v: Vec2, n: Vec2) -> Vec2:
    """Mirror ``v`` about the line with (unnormalised) normal ``n``."""
    nn = n.norm2()
    if nn == 0:
        raise InvalidGeometry("zero normal")
    k = 2 * v.dot(n) / nn
    return Vec2(v.x - k * n.x, v.y - k * n.y)


def parabola_normal(p, x) -> Vec2:
    if x < p.x0 or x > p.x1:
        raise OutOfDomain(f"x={x} outside [{p.x0}, {p.x1}]")
    one = x - x + 1
    return Vec2(-(2 * p.a * x + p.b), one)


def rational_sqrt(s):
    """Exact square root of a rational, ``None`` when it is irrational."""
    if isinstance(s, _MPF):
        if s < 0:
            raise DomainError("square root of a negative number")
        return s.context.sqrt(s)
    s = _parse_fraction(s)
    if s < 0:
        raise DomainError("square root of a negative number")
    n, d = s.numerator, s.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


# --------------------------------------------------------------------------
# ray intersections


def _future_gap(backend):
    return backend.tie if not backend.exact else 0


def segment_hit_params(pos: Vec2, vel: Vec2, a: Vec2, b: Vec2, backend):
    """Return ``(s, u)``: ray advance ``s`` and segment parameter ``u`` in [0, 1].

    ``None`` if the ray misses.  Only advances ``s`` beyond the tie window count.
    """
    e = b - a
    denom = vel.cross(e)
    w = a - pos
    if denom == 0 or (not backend.exact and abs(denom) <= backend.residual * (abs(vel.x) + abs(vel.y)) * (abs(e.x) + abs(e.y))):
        side = w.cross(vel)
        if side == 0 or (not backend.exact and abs(side) <= backend.residual):
            # collinear: degenerate only if part of the segment lies ahead
            vv = vel.norm2()
            ahead_a = w.dot(vel) / vv
            ahead_b = (b - pos).dot(vel) / vv
            if max(ahead_a, ahead_b) > _future_gap(backend):
                raise DegenerateContact("ray runs along a segment")
        return None
    s = w.cross(e) / denom
    if s <= _future_gap(backend):
        return None
    u = w.cross(vel) / denom
    if u < 0 or u > 1:
        return None
    return s, u


def ray_segment_hit(ball, seg, backend=None):
    """Earliest future time at which the ball's ray meets the closed segment."""
    a, b = seg
    backend = backend or backend_of(ball.pos.x, ball.vel.x, a.x)
    if ball.vel.is_zero():
        raise DomainError("ball is not moving")
    hit = segment_hit_params(ball.pos, ball.vel, a, b, backend)
    if hit is None:
        return None
    return ball.time + hit[0]


def parabola_hit_params(pos: Vec2, vel: Vec2, p, backend):
    """Smallest future ray advance ``s`` hitting the parabola inside its domain."""
    a, b, c = p.a, p.b, p.c
    A = a * vel.x * vel.x
    B = 2 * a * pos.x * vel.x + b * vel.x - vel.y
    C = a * pos.x * pos.x + b * pos.x + c - pos.y
    gap = _future_gap(backend)
    candidates = []
    if A == 0:
        if B == 0:
            return None
        candidates = [-C / B]
    else:
        disc = B * B - 4 * A * C
        if disc < 0:
            return None
        r = backend.sqrt(disc)
        if r is None:
            # irrational contact: only an error if it could matter
            fa, fb, fd = float(A), float(B), math.sqrt(float(disc))
            approx = [(-fb - fd) / (2 * fa), (-fb + fd) / (2 * fa)]
            for s in approx:
                x = float(pos.x) + s * float(vel.x)
                if s > -1e-9 and float(p.x0) - 1e-9 <= x <= float(p.x1) + 1e-9:
                    raise NonRationalIntersection("irrational parabola contact")
            return None
        # cancellation-free form; matters when vel is almost parallel to the axis
        q = -(B + r) / 2 if B >= 0 else -(B - r) / 2
        candidates = [q / A]
        if q != 0:
            candidates.append(C / q)
        candidates.sort()
    for s in candidates:
        if s <= gap:
            continue
        x = pos.x + s * vel.x
        if p.x0 <= x <= p.x1:
            return s
    return None


def ray_parabola_hit(ball, p, backend=None):
    backend = backend or backend_of(ball.pos.x, ball.vel.x, p.a)
    if ball.vel.is_zero():
        raise DomainError("ball is not moving")
    s = parabola_hit_params(ball.pos, ball.vel, p, backend)
    if s is None:
        return None
    return ball.time + s, ball.pos + ball.vel * s


# --------------------------------------------------------------------------
# polynomials (coefficient tuples, ascending degree)


def poly_trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def poly_eval(p, x):
    acc = 0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def poly_add(p, q):
    n = max(len(p), len(q))
    return poly_trim(
        (p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)
    )


def poly_scale(p, k):
    return poly_trim(c * k for c in p)


def poly_sub(p, q):
    return poly_add(p, poly_scale(q, -1))


def poly_mul(p, q):
    if not p or not q:
        return ()
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return poly_trim(out)


def poly_deriv(p):
    return poly_trim(i * p[i] for i in range(1, len(p)))


def poly_compose(p, q):
    """p(q(x))."""
    out = ()
    for c in reversed(p):
        out = poly_add(poly_mul(out, q), (c,))
    return out


def poly_divmod(p, q):
    """Exact polynomial division over the rationals."""
    p = list(poly_trim(p))
    q = poly_trim(q)
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    quot = [Fraction(0)] * max(len(p) - len(q) + 1, 0)
    lead = Fraction(q[-1])
    while len(p) >= len(q) and p:
        k = Fraction(p[-1]) / lead
        shift = len(p) - len(q)
        quot[shift] = k
        for i, c in enumerate(q):
            p[shift + i] -= k * c
        p = list(poly_trim(p))
    return poly_trim(quot), tuple(p)


def poly_gcd(p, q):
    p, q = poly_trim(p), poly_trim(q)
    while q:
        _, r = poly_divmod(p, q)
        p, q = q, r
    if not p:
        return ()
    return poly_scale(p, Fraction(1) / Fraction(p[-1]))


def poly_degree(p):
    return len(poly_trim(p)) - 1


class RationalTimeFunction:
    """``numerator(t) / denominator(t)`` with ascending coefficient tuples."""

    __slots__ = ("numerator", "denominator")

    MAX_DEGREE = 8

    def __init__(self, numerator, denominator=(1,)):
        num = poly_trim(numerator)
        den = poly_trim(denominator)
        if not den:
            raise DomainError("zero denominator")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    def __setattr__(self, name, value):
        raise AttributeError("RationalTimeFunction is immutable")

    @property
    def degree(self):
        return max(len(self.numerator), len(self.denominator)) - 1

    def __call__(self, t):
        d = poly_eval(self.denominator, t)
        if d == 0:
            raise DomainError("rational function pole")
        return poly_eval(self.numerator, t) / d

    def derivative(self) -> "RationalTimeFunction":
        n, d = self.numerator, self.denominator
        if len(d) == 1:
            return RationalTimeFunction(poly_deriv(n), d)
        top = poly_sub(poly_mul(poly_deriv(n), d), poly_mul(n, poly_deriv(d)))
        return RationalTimeFunction(top, poly_mul(d, d))

    def convert(self, backend) -> "RationalTimeFunction":
        return RationalTimeFunction(
            tuple(backend.num(c) for c in self.numerator),
            tuple(backend.num(c) for c in self.denominator),
        )

    def is_polynomial(self):
        return len(self.denominator) == 1

    def __eq__(self, other):
        return (
            isinstance(other, RationalTimeFunction)
            and self.numerator == other.numerator
            and self.denominator == other.denominator
        )

    def __hash__(self):
        return hash((self.numerator, self.denominator))

    def __repr__(self):
        return f"RationalTimeFunction({list(self.numerator)}, {list(self.denominator)})"


def _is_mpf(x):
    return isinstance(x, _MPF)


def constant_fn(c) -> RationalTimeFunction:
    return RationalTimeFunction((c,))


def linear_fn(c0, c1) -> RationalTimeFunction:
    return RationalTimeFunction((c0, c1))


# --------------------------------------------------------------------------
# root isolation


def _sturm_chain(p):
    chain = [p, poly_deriv(p)]
    while True:
        _, r = poly_divmod(chain[-2], chain[-1])
        if not r:
            break
        chain.append(poly_scale(r, -1))
    return chain


def _sign_changes(chain, x):
    changes = 0
    last = 0
    for q in chain:
        v = poly_eval(q, x)
        if v == 0:
            continue
        s = 1 if v > 0 else -1
        if last and s != last:
            changes += 1
        last = s
    return changes


def _square_free(p):
    g = poly_gcd(p, poly_deriv(p))
    if len(g) <= 1:
        return p
    q, _ = poly_divmod(p, g)
    return q


def _isolate(chain, lo, hi, v_lo, v_hi, depth, out):
    count = v_lo - v_hi
    if count <= 0:
        return
    if count == 1:
        out.append((lo, hi))
        return
    if depth == 0:
        raise AmbiguousRoot("could not separate clustered roots")
    mid = (lo + hi) / 2
    v_mid = _sign_changes(chain, mid)
    if poly_eval(chain[0], mid) == 0:
        out.append((mid, mid))
    _isolate(chain, lo, mid, v_lo, v_mid, depth - 1, out)
    _isolate(chain, mid, hi, v_mid, v_hi, depth - 1, out)


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Rational with the smallest denominator in the closed interval [lo, hi]."""
    if lo > hi:
        lo, hi = hi, lo
    fl = math.floor(lo)
    if fl == lo:
        return Fraction(fl)
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    rest = simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / rest


def _refine(p, lo, hi, tol, max_depth, exact):
    """Bisection on an isolating interval ``(lo, hi]`` of a square-free ``p``.

    Under the exact backend the simplest rational inside the bracket is tried
    at every step, so roots of small height are returned exactly.
    """
    if lo == hi:
        return lo, True
    f_hi = poly_eval(p, hi)
    if f_hi == 0:
        return hi, True
    s_hi = f_hi > 0
    for _ in range(max_depth):
        if exact:
            q = simplest_between(lo, hi)
            if q != lo and poly_eval(p, q) == 0:
                return q, True
        if hi - lo <= tol:
            break
        mid = (lo + hi) / 2
        f_mid = poly_eval(p, mid)
        if f_mid == 0:
            return mid, True
        if (f_mid > 0) == s_hi:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2, False


def _quadratic_roots_exact(p):
    """Rational roots of a degree <= 2 polynomial, or None if irrational."""
    if len(p) == 2:
        return [-p[0] / p[1]]
    c, b, a = p
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    r = rational_sqrt(disc)
    if r is None:
        return None
    return sorted({(-b - r) / (2 * a), (-b + r) / (2 * a)})


def roots_in_interval(f, interval: Interval, backend=None, affine=(0, 0), max_depth: int = 200):
    """Real roots of ``num(t) - (alpha + beta t) den(t)`` inside ``interval``.

    ``f`` may be a ``RationalTimeFunction`` or a bare coefficient tuple.  Roots
    are isolated with a Sturm chain over exact rationals (floats convert
    exactly) and refined by bisection.  Under ``BigFloat`` a root closer than
    the tolerance to an open endpoint raises ``AmbiguousRoot``.
    """
    if isinstance(f, RationalTimeFunction):
        num, den = f.numerator, f.denominator
    else:
        num, den = poly_trim(f), (1,)
    if backend is None:
        backend = backend_of(*num, *den, interval.lo, interval.hi)
    alpha, beta = affine
    if alpha != 0 or beta != 0:
        num = poly_sub(num, poly_mul((alpha, beta), den))
    p = poly_trim(Fraction(_parse_fraction(c)) for c in num)
    lo = _parse_fraction(interval.lo)
    hi = _parse_fraction(interval.hi)
    if not p:
        raise DegenerateContact("contact equation vanishes identically")
    if len(p) == 1:
        return []
    p = _square_free(p)
    tol = _parse_fraction(backend.root_tol)

    ext = 0 if backend.exact else tol
    s_lo, s_hi = lo - ext, hi + ext
    found = None
    if len(p) <= 3:
        rs = _quadratic_roots_exact(p)
        if rs is not None:
            found = [(r, True) for r in rs if s_lo <= r <= s_hi]
    if found is None:
        chain = _sturm_chain(p)
        pieces = set()
        if poly_eval(p, s_lo) == 0:
            pieces.add((s_lo, s_lo))
        acc = []
        _isolate(chain, s_lo, s_hi, _sign_changes(chain, s_lo), _sign_changes(chain, s_hi), max_depth, acc)
        pieces.update(acc)
        roots = {}
        for a, b in sorted(pieces):
            r, is_exact = _refine(p, a, b, tol, max_depth, backend.exact)
            roots[r] = roots.get(r, False) or is_exact
        found = sorted(roots.items())

    out = []
    for r, is_exact in found:
        keep = lo <= r <= hi
        for end, closed in ((lo, interval.lo_closed), (hi, interval.hi_closed)):
            if r == end:
                keep = keep and closed
            elif not backend.exact and abs(r - end) <= tol:
                if not closed:
                    raise AmbiguousRoot(f"root within tolerance of open endpoint {float(end)}")
                r, keep = end, True
        if keep:
            out.append(backend.num(r))
    return _dedupe_sorted(out)


def _dedupe_sorted(xs):
    xs = sorted(xs)
    out = []
    for x in xs:
        if not out or x != out[-1]:
            out.append(x)
    return out
