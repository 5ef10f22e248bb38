from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from pinball.components import BallState, Parabola
from pinball.errors import BackendMismatch, DomainError
from pinball.numeric import (
    EXACT,
    BigFloat,
    Interval,
    RationalTimeFunction,
    Vec2,
    backend_of,
    mpf_to_fraction,
    parabola_normal,
    rational_sqrt,
    ray_parabola_hit,
    ray_segment_hit,
    reflect,
    roots_in_interval,
)

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=1000)


def V(x, y):
    return Vec2(F(x), F(y))


def ball(px, py, vx, vy):
    return BallState(V(px, py), V(vx, vy), F(0))


def test_reflect_examples():
    assert reflect(V(1, -1), V(0, 1)) == V(1, 1)
    assert reflect(V(0, -1), V(-2, 1)) == Vec2(F(-4, 5), F(-3, 5))
    assert reflect(V(3, 0), V(1, 0)) == V(-3, 0)


def test_reflected_ray_from_x_squared_meets_focus():
    out = reflect(V(0, -1), V(-2, 1))
    # (1,1) + s*out = (0, 1/4) for one s
    s = (0 - 1) / out.x
    assert 1 + s * out.y == F(1, 4)


@given(fractions, fractions, fractions, fractions)
def test_reflection_keeps_speed_and_flips_normal_part(vx, vy, nx, ny):
    if nx == 0 and ny == 0:
        return
    v, n = Vec2(vx, vy), Vec2(nx, ny)
    r = reflect(v, n)
    assert r.norm2() == v.norm2()
    assert r.dot(n) == -v.dot(n)
    assert r.cross(n) == v.cross(n)


def test_parabola_normal_examples():
    p = Parabola(F(1), F(0), F(0), F(0), F(2))
    assert parabola_normal(p, F(0)) == V(0, 1)
    assert parabola_normal(p, F(1)) == V(-2, 1)
    q = Parabola(F(-2), F(0), F(3, 8), F(-1), F(0))
    assert parabola_normal(q, F(-1, 2)) == V(-2, 1)


def test_ray_segment_hit():
    seg = (V(-1, 0), V(1, 0))
    assert ray_segment_hit(ball(0, 2, 0, -1), seg) == 2
    assert ray_segment_hit(ball(0, 2, 0, 1), seg) is None
    assert ray_segment_hit(ball(0, 0, 1, 1), (V(2, 0), V(2, 4))) == 2


def test_ray_parabola_hit():
    p = Parabola(F(1), F(0), F(0), F(0), F(2))
    t, pt = ray_parabola_hit(ball(F(3, 2), 4, 0, -1), p)
    assert (t, pt) == (F(7, 4), Vec2(F(3, 2), F(9, 4)))
    assert ray_parabola_hit(ball(3, 5, 0, -1), p) is None


def test_ray_through_shared_focus_hits_lower_parabola():
    # line y = 1/4 + 3x/4 against y = -2x^2 + 3/8: 16x^2 + 6x - 1 = 0, x in {1/8, -1/2}
    q = Parabola(F(-2), F(0), F(3, 8), F(-1), F(0))
    t, pt = ray_parabola_hit(BallState(V(1, 1), Vec2(F(-4, 5), F(-3, 5)), F(0)), q)
    assert pt == Vec2(F(-1, 2), F(-1, 8))
    assert pt.y == q.a * pt.x**2 + q.c
    assert t == F(15, 8)


def test_near_vertical_ray_keeps_parabola_hit_under_bigfloat():
    # tiny horizontal velocity used to lose the root to cancellation
    be = BigFloat(512)
    p = Parabola(F(100), F(0), F(-9, 50), F(-1, 50), F(0)).convert(be)
    b = BallState(Vec2(be.num(F(-11, 1600)), be.num(F(-1, 20))), Vec2(be.mpf("4.5e-154"), be.num(-1)), be.num(0))
    hit = ray_parabola_hit(b, p, be)
    assert hit is not None
    x = F(-11, 1600)
    assert abs(hit[1].y - be.num(100 * x * x - F(9, 50))) < be.mpf(2) ** -400


def test_rational_sqrt():
    assert rational_sqrt(F(9, 4)) == F(3, 2)
    assert rational_sqrt(F(2)) is None
    assert rational_sqrt(F(0)) == 0


@given(st.fractions(min_value=0, max_value=1000, max_denominator=10**6))
def test_rational_sqrt_of_square(q):
    assert rational_sqrt(q * q) == q


def test_roots_examples():
    assert roots_in_interval(RationalTimeFunction((F(-1), F(0), F(1))), Interval(F(0), F(3))) == [1]
    f = RationalTimeFunction((F(3, 4), F(-2), F(1)))
    assert roots_in_interval(f, Interval(F(0), F(2))) == [F(1, 2), F(3, 2)]


def test_cubic_roots_include_zero_and_sqrt2():
    be = BigFloat(256)
    f = RationalTimeFunction((F(0), F(-2), F(0), F(1)))
    roots = roots_in_interval(f, Interval(F(0), F(2)), be)
    assert len(roots) == 2
    assert roots[0] == 0
    sqrt2 = F("1.4142135623730950488016887242096980785696")
    assert abs(mpf_to_fraction(roots[1]) - sqrt2) < F(1, 10**30)
    assert abs(mpf_to_fraction(roots[1]) ** 2 - 2) < F(1, 10**29)


def test_mixing_backends_is_an_error():
    be = BigFloat(128)
    with pytest.raises(BackendMismatch):
        backend_of(F(1), be.num(1))


def test_bigfloat_precision_floor():
    with pytest.raises(DomainError):
        BigFloat(32)


@given(st.integers(min_value=64, max_value=600), fractions)
def test_bigfloat_roundtrip_is_nearest(bits, q):
    be = BigFloat(bits)
    x = be.num(q)
    back = mpf_to_fraction(x)
    assert abs(back - q) <= abs(q) * F(1, 2 ** (bits - 1)) + F(1, 2 ** (bits + 60))


def test_exact_values_are_reduced():
    x = EXACT.num("6/8")
    assert (x.numerator, x.denominator) == (3, 4)
