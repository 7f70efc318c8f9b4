import math
import random
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from condmix.errors import DomainError, SingularError
from condmix.interval import (Interval, IntervalMat2, IntervalVec2, Rotation2, atan2,
                              format_interval, hypot, parse_interval, qr2, sin_cos)

import oracles

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def test_endpoint_arithmetic_examples():
    assert Interval(1, 2) + Interval(3, 4) == Interval(4, 6)
    assert Interval(-1, 2) * Interval(3, 4) == Interval(-4, 8)
    assert Interval(1, 2) - Interval(3, 4) == Interval(-3, -1)
    assert abs(Interval(-2, 1)) == Interval(0, 2)


def test_division_by_zero_interval_raises():
    with pytest.raises(DomainError):
        Interval(1, 2) / Interval(-1, 1)
    with pytest.raises(DomainError):
        Interval(-1, 0).sqrt()


def test_empty_propagates():
    e = Interval.empty()
    assert (e + Interval(1, 2)).is_empty()
    assert (Interval(1, 2) * e).is_empty()
    assert Interval(0, 1).intersect(Interval(2, 3)).is_empty()


def test_set_operations():
    assert Interval(0, 1).hull(Interval(2, 3)) == Interval(0, 3)
    assert Interval(0, 2).intersect(Interval(1, 3)) == Interval(1, 2)
    assert Interval(1, 1).width() == 0
    assert Interval(1, 3).midpoint() == 2
    assert 0.5 in Interval(0, 1)
    assert Fraction(1, 3) in Interval(0.33, 0.34)


def test_hypot_three_four_five():
    r = hypot(Interval(3), Interval(4))
    assert 5 in r
    assert r.width() == 0


def test_sin_dense_samples():
    x = Interval(0, gmpy2.context(precision=196).div_2exp(Interval.pi().hi, 1))
    s = x.sin()
    ctx = gmpy2.context(precision=400)
    for k in range(2001):
        t = ctx.mul(x.hi, gmpy2.mpfr(k) / 2000)
        assert s.lo <= ctx.sin(t) <= s.hi
    assert 0 in s and 1 in s


def test_sin_cos_contain_extrema():
    s, c = sin_cos(Interval(3, 3.3))
    assert 0 in s and -1 in c


def test_atan2_quadrants_and_cut():
    assert oracles.point_in(gmpy2.context(precision=300).div_2exp(gmpy2.const_pi(precision=300), 1), atan2(Interval(1), Interval(0)))
    with pytest.raises(DomainError):
        atan2(Interval(-1, 1), Interval(-2, -1))
    with pytest.raises(DomainError):
        atan2(Interval(0), Interval(0))


def test_chain_of_random_ops_against_high_precision():
    rnd = random.Random(11)
    ctx = oracles.ORACLE_CTX
    iv = Interval(1.0)
    pt = gmpy2.mpfr(1)
    for _ in range(1000):
        v = rnd.uniform(0.5, 2.0)
        op = rnd.choice("+-*/")
        if op == "+":
            iv, pt = iv + v, ctx.add(pt, v)
        elif op == "-":
            iv, pt = iv - v, ctx.sub(pt, v)
        elif op == "*":
            iv, pt = iv * v, ctx.mul(pt, v)
        else:
            iv, pt = iv / v, ctx.div(pt, v)
        if abs(pt) > 1e6:
            iv, pt = iv / 1e6, ctx.div(pt, 1e6)
        assert oracles.contained(pt, iv)


def test_fuzz_containment_small():
    checked, _, bad = oracles.fuzz_containment(3000, seed=5)
    assert checked > 2500 and not bad


@settings(max_examples=200, deadline=None)
@given(intervals(), intervals(), st.sampled_from("+-*"))
def test_monotone_inclusion(a, b, op):
    wider_a = Interval(a.lo - 1, a.hi + 1)
    wider_b = Interval(b.lo - 0.5, b.hi + 2)
    f = {"+": lambda x, y: x + y, "-": lambda x, y: x - y, "*": lambda x, y: x * y}[op]
    assert f(wider_a, wider_b).contains(f(a, b))


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite)
def test_point_containment_property(x, y, z):
    exact = Fraction(x) * Fraction(y) + Fraction(z)
    assert exact in Interval(x) * Interval(y) + Interval(z)
    if y != 0:
        assert Fraction(x) / Fraction(y) in Interval(x) / Interval(y)


@settings(max_examples=100, deadline=None)
@given(intervals())
def test_format_parse_roundtrip(x):
    assert parse_interval(format_interval(x)).contains(x)
    assert parse_interval(format_interval(x, digits=8)).contains(x)


def test_qr2_identity_and_rotation():
    Q, R = qr2(IntervalMat2.from_rows([[1, 0], [0, 1]]))
    assert 1 in Q.c and 0 in Q.s
    assert 1 in R.r11 and 0 in R.r12 and 1 in R.r22
    Q, R = qr2(IntervalMat2.from_rows([[0, -1], [1, 0]]))
    assert 0 in Q.c and 1 in Q.s
    assert 1 in R.r11 and 0 in R.r12 and 1 in R.r22


def test_qr2_singular_column():
    with pytest.raises(SingularError):
        qr2(IntervalMat2.from_rows([[0, 1], [0, 2]]))


@pytest.mark.parametrize("seed", range(20))
def test_qr2_random_against_high_precision_givens(seed):
    rnd = random.Random(seed)
    rows = [[rnd.uniform(-2, 2) for _ in range(2)] for _ in range(2)]
    m = IntervalMat2.from_rows(rows)
    Q, R = qr2(m)
    assert Q.is_orthogonal()
    prod = Q.matrix() @ R.matrix()
    assert all(x in y for x, y in zip(m.entries(), prod.entries()))
    eye = Q.matrix() @ Q.matrix().transpose()
    assert 1 in eye.a11 and 0 in eye.a12 and 0 in eye.a21 and 1 in eye.a22
    # reference Givens QR in plain 800-bit arithmetic
    ctx = gmpy2.context(precision=800)
    m11, m12, m21, m22 = (gmpy2.mpfr(v) for v in (rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
    r = ctx.hypot(m11, m21)
    c, s = ctx.div(m11, r), ctx.div(m21, r)
    assert oracles.point_in(c, Q.c, "1e-200") and oracles.point_in(s, Q.s, "1e-200")
    r12 = ctx.add(ctx.mul(c, m12), ctx.mul(s, m22))
    assert oracles.point_in(r12, R.r12, "1e-200")
    assert max(float(w) for w in (Q.c.width(), Q.s.width(), R.r11.width())) < 2.0 ** -180


def test_rotation_from_angle_is_orthogonal():
    Q = Rotation2.from_angle(Interval(0.7))
    assert Q.is_orthogonal()
    v = Q.apply_transpose(Q.apply(IntervalVec2(Interval(1), Interval(2))))
    assert 1 in v.x and 2 in v.y


def test_precision_is_per_value():
    lo = Interval(1, prec=64) / 3
    hi = Interval(1, prec=400) / 3
    assert lo.prec == 64 and hi.prec == 400
    assert hi.width() < lo.width()
    assert lo.contains(hi)
