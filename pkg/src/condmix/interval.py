"""Validated interval arithmetic on top of MPFR (via gmpy2).

Every operation rounds its lower endpoint toward -inf and its upper
endpoint toward +inf at the working precision, so the exact real image of
the operands is always enclosed.  Rounding is selected per call through
immutable gmpy2 context objects, never through global state, which keeps
all functions reentrant and thread safe.

Besides scalar intervals the module carries the small amount of 2x2
linear algebra needed by the segment dynamics, including a QR step
(``qr2``) built from a Givens angle so that ``c**2 + s**2`` stays tight
around 1.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpz

from .errors import DomainError, SingularError

DEFAULT_PRECISION = 196

_INF = mpfr("inf")
_NINF = mpfr("-inf")
_ZERO = mpfr(0)
_ONE = mpfr(1)

_CONTEXTS: dict[int, tuple] = {}


def contexts(prec: int):
    """Return ``(down, up, nearest)`` gmpy2 contexts for ``prec`` bits."""
    try:
        return _CONTEXTS[prec]
    except KeyError:
        if prec < 24:
            raise DomainError(f"precision must be at least 24 bits, got {prec}")
        trio = (
            gmpy2.context(precision=prec, round=gmpy2.RoundDown),
            gmpy2.context(precision=prec, round=gmpy2.RoundUp),
            gmpy2.context(precision=prec, round=gmpy2.RoundToNearest),
        )
        _CONTEXTS[prec] = trio
        return trio


def _convert(value, ctx) -> mpfr:
    """Round ``value`` to ``ctx`` precision in ``ctx`` rounding direction."""
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, (int, type(mpz(0)))):
        return ctx.add(mpz(value), _ZERO)
    if isinstance(value, (float, type(_ZERO))):
        return ctx.add(mpfr(value) if isinstance(value, float) else value, _ZERO)
    if isinstance(value, Fraction):
        return ctx.div(mpz(value.numerator), mpz(value.denominator))
    if isinstance(value, str):
        with ctx:
            return mpfr(value)
    raise TypeError(f"cannot convert {type(value).__name__} to an interval endpoint")


def _frac(v: mpfr) -> Fraction:
    return Fraction(*v.as_integer_ratio())


class Interval:
    """Closed interval ``[lo, hi]`` with MPFR endpoints.

    ``Interval(x)`` gives the tightest enclosure of ``x`` (a point interval
    when ``x`` is representable), ``Interval(lo, hi)`` the hull of both
    bounds rounded outward.
    """

    __slots__ = ("lo", "hi", "prec")

    def __init__(self, lo, hi=None, prec: int = DEFAULT_PRECISION):
        down, up, _ = contexts(prec)
        if hi is None:
            hi = lo
        a = _convert(lo, down)
        b = _convert(hi, up)
        if gmpy2.is_nan(a) or gmpy2.is_nan(b):
            raise DomainError("NaN endpoints are not allowed")
        if a > b:
            raise DomainError(f"lower bound {a} exceeds upper bound {b}")
        self.lo = a
        self.hi = b
        self.prec = prec

    @classmethod
    def _make(cls, lo, hi, prec):
        obj = object.__new__(cls)
        obj.lo = lo
        obj.hi = hi
        obj.prec = prec
        return obj

    @classmethod
    def empty(cls, prec: int = DEFAULT_PRECISION) -> "Interval":
        return cls._make(_INF, _NINF, prec)

    @classmethod
    def entire(cls, prec: int = DEFAULT_PRECISION) -> "Interval":
        return cls._make(_NINF, _INF, prec)

    @classmethod
    def pi(cls, prec: int = DEFAULT_PRECISION) -> "Interval":
        down, up, _ = contexts(prec)
        return cls._make(down.const_pi(), up.const_pi(), prec)

    # -- predicates ---------------------------------------------------------

    def is_empty(self) -> bool:
        return self.lo > self.hi

    def is_finite(self) -> bool:
        return gmpy2.is_finite(self.lo) and gmpy2.is_finite(self.hi)

    def contains(self, x) -> bool:
        """True if the point (or interval) ``x`` lies inside ``self``."""
        if isinstance(x, Interval):
            if x.is_empty():
                return True
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, Fraction):
            return ((self.lo == _NINF or _frac(self.lo) <= x)
                    and (self.hi == _INF or x <= _frac(self.hi)))
        return self.lo <= x <= self.hi

    __contains__ = contains

    def overlaps(self, other: "Interval") -> bool:
        return not (self.hi < other.lo or other.hi < self.lo)

    def sign(self) -> int:
        """+1 or -1 when the sign is certain, 0 when the interval meets zero."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        return 0

    # -- lattice / metric operations ----------------------------------------

    def hull(self, other: "Interval") -> "Interval":
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        return Interval._make(min(self.lo, other.lo), max(self.hi, other.hi),
                              max(self.prec, other.prec))

    def intersect(self, other: "Interval") -> "Interval":
        prec = max(self.prec, other.prec)
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return Interval.empty(prec)
        return Interval._make(lo, hi, prec)

    def width(self) -> mpfr:
        if self.is_empty():
            return _ZERO
        return contexts(self.prec)[1].sub(self.hi, self.lo)

    def radius(self) -> mpfr:
        return contexts(self.prec)[1].div_2exp(self.width(), 1)

    def midpoint(self) -> mpfr:
        near = contexts(self.prec)[2]
        if self.lo == _NINF or self.hi == _INF:
            if self.lo == _NINF and self.hi == _INF:
                return _ZERO
            return self.lo if self.hi == _INF else self.hi
        return near.add(near.div_2exp(self.lo, 1), near.div_2exp(self.hi, 1))

    def mag(self) -> mpfr:
        up = contexts(self.prec)[1]
        return max(up.abs(self.lo), up.abs(self.hi))

    def mig(self) -> mpfr:
        if self.lo > 0:
            return self.lo
        if self.hi < 0:
            return contexts(self.prec)[0].minus(self.hi)
        return _ZERO

    def __float__(self) -> float:
        return float(self.midpoint())

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Interval":
        if isinstance(other, Interval):
            return other
        return Interval(other, prec=self.prec)

    def __neg__(self) -> "Interval":
        # bare ``-x`` on an mpfr would round to the ambient 53-bit context
        down, up, _ = contexts(self.prec)
        return Interval._make(down.minus(self.hi), up.minus(self.lo), self.prec)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other) -> "Interval":
        b = self._coerce(other)
        prec = self.prec if self.prec >= b.prec else b.prec
        if self.lo > self.hi or b.lo > b.hi:
            return Interval.empty(prec)
        down, up, _ = contexts(prec)
        return Interval._make(down.add(self.lo, b.lo), up.add(self.hi, b.hi), prec)

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        b = self._coerce(other)
        prec = self.prec if self.prec >= b.prec else b.prec
        if self.lo > self.hi or b.lo > b.hi:
            return Interval.empty(prec)
        down, up, _ = contexts(prec)
        return Interval._make(down.sub(self.lo, b.hi), up.sub(self.hi, b.lo), prec)

    def __rsub__(self, other) -> "Interval":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Interval":
        b = self._coerce(other)
        prec = self.prec if self.prec >= b.prec else b.prec
        if self.lo > self.hi or b.lo > b.hi:
            return Interval.empty(prec)
        lo, hi = _mul(self.lo, self.hi, b.lo, b.hi, *contexts(prec)[:2])
        return Interval._make(lo, hi, prec)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        b = self._coerce(other)
        prec = self.prec if self.prec >= b.prec else b.prec
        if self.lo > self.hi or b.lo > b.hi:
            return Interval.empty(prec)
        if b.lo <= 0 <= b.hi:
            raise DomainError("division by an interval containing zero")
        lo, hi = _div(self.lo, self.hi, b.lo, b.hi, *contexts(prec)[:2])
        return Interval._make(lo, hi, prec)

    def __rtruediv__(self, other) -> "Interval":
        return self._coerce(other) / self

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, int) or n < 0:
            raise DomainError("only non-negative integer powers are supported")
        if self.is_empty():
            return self
        down, up, _ = contexts(self.prec)
        if n == 0:
            return Interval._make(_ONE, _ONE, self.prec)
        if n % 2 == 1:
            return Interval._make(down.pow(self.lo, n), up.pow(self.hi, n), self.prec)
        return Interval._make(down.pow(self.mig(), n), up.pow(self.mag(), n), self.prec)

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval._make(_ZERO, max(contexts(self.prec)[1].minus(self.lo), self.hi), self.prec)

    def sqrt(self) -> "Interval":
        if self.is_empty():
            return self
        if self.lo < 0:
            raise DomainError("sqrt of an interval reaching below zero")
        down, up, _ = contexts(self.prec)
        return Interval._make(down.sqrt(self.lo), up.sqrt(self.hi), self.prec)

    def sin(self) -> "Interval":
        return _trig(self, "sin")

    def cos(self) -> "Interval":
        return _trig(self, "cos")

    # -- equality / display -------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        if self.is_empty() and other.is_empty():
            return True
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        if self.is_empty():
            return "Interval.empty()"
        return f"Interval({format_interval(self, 17)})"

    def __str__(self) -> str:
        return format_interval(self)


def _mul(alo, ahi, blo, bhi, down, up):
    if alo >= 0:
        if blo >= 0:
            lo, hi = down.mul(alo, blo), up.mul(ahi, bhi)
        elif bhi <= 0:
            lo, hi = down.mul(ahi, blo), up.mul(alo, bhi)
        else:
            lo, hi = down.mul(ahi, blo), up.mul(ahi, bhi)
    elif ahi <= 0:
        if blo >= 0:
            lo, hi = down.mul(alo, bhi), up.mul(ahi, blo)
        elif bhi <= 0:
            lo, hi = down.mul(ahi, bhi), up.mul(alo, blo)
        else:
            lo, hi = down.mul(alo, bhi), up.mul(alo, blo)
    else:
        if blo >= 0:
            lo, hi = down.mul(alo, bhi), up.mul(ahi, bhi)
        elif bhi <= 0:
            lo, hi = down.mul(ahi, blo), up.mul(alo, blo)
        else:
            lo = min(down.mul(alo, bhi), down.mul(ahi, blo))
            hi = max(up.mul(alo, blo), up.mul(ahi, bhi))
    if gmpy2.is_nan(lo) or gmpy2.is_nan(hi):
        # 0 * inf from an extended-real endpoint; the zero factor dominates
        corners = [(x, y) for x in (alo, ahi) for y in (blo, bhi)]
        lo = min(_ZERO if (x == 0 or y == 0) else down.mul(x, y) for x, y in corners)
        hi = max(_ZERO if (x == 0 or y == 0) else up.mul(x, y) for x, y in corners)
    return lo, hi


def _div(alo, ahi, blo, bhi, down, up):
    if blo > 0:
        if alo >= 0:
            return down.div(alo, bhi), up.div(ahi, blo)
        if ahi <= 0:
            return down.div(alo, blo), up.div(ahi, bhi)
        return down.div(alo, blo), up.div(ahi, blo)
    # a / b = (-a) / (-b); negation is exact at the working precision
    return _div(down.minus(ahi), up.minus(alo), down.minus(bhi), up.minus(blo), down, up)


# -- transcendental helpers ---------------------------------------------------

_WIDE: dict[int, tuple] = {}
_TWO_PI_F = 2.0 * math.pi


def _may_hit(lo, hi, offset_halfpi: int, prec: int) -> bool:
    """Whether ``offset*pi/2 + 2*k*pi`` may lie in ``[lo, hi]`` for an integer k.

    A double-precision screen settles the common case where both ends sit
    far from a critical point; otherwise the question is decided in extra
    precision with a relative slack, so a borderline case answers True (the
    caller then widens, which is always safe).
    """
    shift = offset_halfpi / 4.0
    flo = float(lo) / _TWO_PI_F - shift
    fhi = float(hi) / _TWO_PI_F - shift
    if abs(flo) < 1e6 and abs(fhi) < 1e6:
        k = math.floor(flo)
        if math.floor(fhi) == k and flo - k > 1e-9 and k + 1 - fhi > 1e-9:
            return False
    wide = _WIDE.get(prec)
    if wide is None:
        ctx = gmpy2.context(precision=prec + 40)
        wide = (ctx, ctx.mul(ctx.const_pi(), 2))
        _WIDE[prec] = wide
    ctx, twopi = wide
    qlo = ctx.sub(ctx.div(lo, twopi), shift)
    qhi = ctx.sub(ctx.div(hi, twopi), shift)
    slack = gmpy2.mul_2exp(ctx.add(ctx.add(_ONE, abs(qlo)), abs(qhi)), -(prec - 4))
    return gmpy2.ceil(ctx.sub(qlo, slack)) <= ctx.add(qhi, slack)


def _outward(near, value):
    """Bracket a correctly rounded (to nearest) value by its neighbours."""
    return near.next_below(value), near.next_above(value)


def _sin_cos_bounds(x: Interval):
    prec = x.prec
    near = contexts(prec)[2]
    s_lo, c_lo = near.sin_cos(x.lo)
    if x.lo == x.hi:
        s_hi, c_hi = s_lo, c_lo
    else:
        s_hi, c_hi = near.sin_cos(x.hi)
    sa, sb = _outward(near, s_lo)
    sc, sd = _outward(near, s_hi)
    ca, cb = _outward(near, c_lo)
    cc, cd = _outward(near, c_hi)
    return (min(sa, sc), max(sb, sd)), (min(ca, cc), max(cb, cd))


def _clip(lo, hi, top: int, bottom: int, x: Interval) -> Interval:
    # critical points (max, min) given as multiples of pi/2
    if _may_hit(x.lo, x.hi, top, x.prec):
        hi = _ONE
    if _may_hit(x.lo, x.hi, bottom, x.prec):
        lo = -_ONE
    return Interval._make(max(lo, -_ONE), min(hi, _ONE), x.prec)


def sin_cos(x: Interval) -> tuple[Interval, Interval]:
    """Enclosures of ``sin(x)`` and ``cos(x)`` from one pair of evaluations."""
    if x.is_empty():
        return x, x
    prec = x.prec
    if not x.is_finite() or contexts(prec)[1].sub(x.hi, x.lo) >= 6:
        full = Interval._make(-_ONE, _ONE, prec)
        return full, full
    (slo, shi), (clo, chi) = _sin_cos_bounds(x)
    return _clip(slo, shi, 1, 3, x), _clip(clo, chi, 0, 2, x)


def _trig(x: Interval, name: str) -> Interval:
    sv, cv = sin_cos(x)
    return sv if name == "sin" else cv


def _as_interval(v, prec: int = DEFAULT_PRECISION) -> Interval:
    return v if isinstance(v, Interval) else Interval(v, prec=prec)


def hypot(a, b) -> Interval:
    """Enclosure of ``sqrt(a**2 + b**2)``."""
    a = _as_interval(a)
    b = _as_interval(b, a.prec)
    prec = max(a.prec, b.prec)
    down, up, _ = contexts(prec)
    return Interval._make(down.hypot(a.mig(), b.mig()), up.hypot(a.mag(), b.mag()), prec)


def atan2(y, x) -> Interval:
    """Enclosure of the principal angle of the box ``x + i*y``.

    The box must exclude the origin and must not cross the branch cut on
    the negative real axis.
    """
    y = _as_interval(y)
    x = _as_interval(x, y.prec)
    prec = max(x.prec, y.prec)
    if x.lo <= 0 <= x.hi and y.lo <= 0 <= y.hi:
        raise DomainError("atan2 of a box containing the origin")
    if x.lo < 0 and y.lo < 0 <= y.hi:
        raise DomainError("atan2 box crosses the branch cut")
    near = contexts(prec)[2]
    sx, sy = x.sign(), y.sign()
    if sx and sy:
        # single open quadrant: d/dy has the sign of x, d/dx the sign of -y
        lo_corner = (y.lo if sx > 0 else y.hi, x.hi if sy > 0 else x.lo)
        hi_corner = (y.hi if sx > 0 else y.lo, x.lo if sy > 0 else x.hi)
        lo = near.next_below(near.atan2(*lo_corner))
        hi = near.next_above(near.atan2(*hi_corner))
    else:
        vals = [near.atan2(yy, xx) for yy in (y.lo, y.hi) for xx in (x.lo, x.hi)]
        lo = near.next_below(min(vals))
        hi = near.next_above(max(vals))
    up = contexts(prec)[1]
    pi_hi = up.const_pi()
    return Interval._make(max(lo, -pi_hi), min(hi, pi_hi), prec)


def sqrt(a) -> Interval:
    return _as_interval(a).sqrt()


def sin(a) -> Interval:
    return _as_interval(a).sin()


def cos(a) -> Interval:
    return _as_interval(a).cos()


# -- serialization ------------------------------------------------------------

def format_interval(x: Interval, digits: int | None = None) -> str:
    """Print ``x`` as ``[lo,hi]`` with the endpoints rounded outward."""
    if x.is_empty():
        return "[empty]"
    if digits is None:
        digits = int(math.ceil(x.prec * math.log10(2))) + 2
    lo = format(x.lo, f".{digits}Dg")
    hi = format(x.hi, f".{digits}Ug")
    return f"[{lo},{hi}]"


_INTERVAL_RE = re.compile(r"^\s*\[\s*([^,\]]+?)\s*,\s*([^,\]]+?)\s*\]\s*$")


def parse_interval(text: str, prec: int = DEFAULT_PRECISION) -> Interval:
    """Parse ``[lo,hi]``; the result encloses the printed decimal bounds."""
    if text.strip() == "[empty]":
        return Interval.empty(prec)
    m = _INTERVAL_RE.match(text)
    if not m:
        raise DomainError(f"not an interval literal: {text!r}")
    return Interval(m.group(1), m.group(2), prec=prec)


# -- 2-vectors and 2x2 matrices -----------------------------------------------

@dataclass(frozen=True)
class IntervalVec2:
    x: Interval
    y: Interval

    def __add__(self, other: "IntervalVec2") -> "IntervalVec2":
        return IntervalVec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "IntervalVec2") -> "IntervalVec2":
        return IntervalVec2(self.x - other.x, self.y - other.y)

    def hull(self, other: "IntervalVec2") -> "IntervalVec2":
        return IntervalVec2(self.x.hull(other.x), self.y.hull(other.y))

    def contains(self, other) -> bool:
        if isinstance(other, IntervalVec2):
            return self.x.contains(other.x) and self.y.contains(other.y)
        return self.x.contains(other[0]) and self.y.contains(other[1])

    def overlaps(self, other: "IntervalVec2") -> bool:
        return self.x.overlaps(other.x) and self.y.overlaps(other.y)

    def max_width(self) -> mpfr:
        return max(self.x.width(), self.y.width())

    def midpoint(self) -> tuple[float, float]:
        return float(self.x.midpoint()), float(self.y.midpoint())

    @classmethod
    def point(cls, x, y, prec: int = DEFAULT_PRECISION) -> "IntervalVec2":
        return cls(_as_interval(x, prec), _as_interval(y, prec))


@dataclass(frozen=True)
class IntervalMat2:
    a11: Interval
    a12: Interval
    a21: Interval
    a22: Interval

    @classmethod
    def from_rows(cls, rows, prec: int = DEFAULT_PRECISION) -> "IntervalMat2":
        (a, b), (c, d) = rows
        return cls(*(_as_interval(v, prec) for v in (a, b, c, d)))

    def __matmul__(self, other):
        if isinstance(other, IntervalVec2):
            return IntervalVec2(self.a11 * other.x + self.a12 * other.y,
                                self.a21 * other.x + self.a22 * other.y)
        return IntervalMat2(
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )

    def transpose(self) -> "IntervalMat2":
        return IntervalMat2(self.a11, self.a21, self.a12, self.a22)

    def entries(self) -> tuple[Interval, Interval, Interval, Interval]:
        return self.a11, self.a12, self.a21, self.a22

    def contains(self, other: "IntervalMat2") -> bool:
        return all(a.contains(b) for a, b in zip(self.entries(), other.entries()))

    def max_width(self) -> mpfr:
        return max(e.width() for e in self.entries())

    def det(self) -> Interval:
        return self.a11 * self.a22 - self.a12 * self.a21


@dataclass(frozen=True)
class Rotation2:
    """Rotation ``[[c, -s], [s, c]]`` with interval cosine and sine."""

    c: Interval
    s: Interval

    @classmethod
    def identity(cls, prec: int = DEFAULT_PRECISION) -> "Rotation2":
        return cls(Interval(1, prec=prec), Interval(0, prec=prec))

    @classmethod
    def from_angle(cls, theta: Interval) -> "Rotation2":
        s, c = sin_cos(theta)
        return cls(c, s)

    def matrix(self) -> IntervalMat2:
        return IntervalMat2(self.c, -self.s, self.s, self.c)

    def apply(self, v: IntervalVec2) -> IntervalVec2:
        return IntervalVec2(self.c * v.x - self.s * v.y, self.s * v.x + self.c * v.y)

    def apply_transpose(self, v: IntervalVec2) -> IntervalVec2:
        return IntervalVec2(self.c * v.x + self.s * v.y, self.c * v.y - self.s * v.x)

    def norm_enclosure(self) -> Interval:
        return self.c * self.c + self.s * self.s

    def is_orthogonal(self) -> bool:
        """True when the enclosure of ``c**2 + s**2`` contains 1."""
        return self.norm_enclosure().contains(1)

    def max_width(self) -> mpfr:
        return max(self.c.width(), self.s.width())


@dataclass(frozen=True)
class UpperTri2:
    r11: Interval
    r12: Interval
    r22: Interval

    def matrix(self) -> IntervalMat2:
        zero = Interval(0, prec=self.r11.prec)
        return IntervalMat2(self.r11, self.r12, zero, self.r22)

    def apply(self, v: IntervalVec2) -> IntervalVec2:
        return IntervalVec2(self.r11 * v.x + self.r12 * v.y, self.r22 * v.y)


def qr2(m: IntervalMat2, width_factor: float | None = None) -> tuple[Rotation2, UpperTri2]:
    """QR factorisation ``m = Q R`` of an interval 2x2 matrix.

    ``Q`` is the Givens rotation through ``theta = atan2(m21, m11)``, which
    makes ``r11 = hypot(m11, m21) > 0``.  ``r22`` is the intersection of the
    direct product and ``det(m) / r11``; both enclose the exact value, the
    intersection is usually much tighter than either.

    If ``width_factor`` is given, a ``SingularError`` is raised when the
    output widths exceed that multiple of the input widths (plus a few
    ulps of rounding).
    """
    if m.a11.contains(0) and m.a21.contains(0):
        raise SingularError("first column of the matrix may vanish")
    theta = atan2(m.a21, m.a11)
    s, c = sin_cos(theta)
    r11 = hypot(m.a11, m.a21)
    r12 = c * m.a12 + s * m.a22
    r22 = c * m.a22 - s * m.a12
    r22_det = m.det() / r11
    tight = r22.intersect(r22_det)
    if not tight.is_empty():
        r22 = tight
    q, r = Rotation2(c, s), UpperTri2(r11, r12, r22)
    if width_factor is not None:
        w_in = m.max_width()
        scale = max(e.mag() for e in m.entries())
        ulps = gmpy2.mul_2exp(scale + 1, -(m.a11.prec - 8))
        w_out = max(q.max_width(), r11.width(), r12.width(), r22.width())
        if w_out > width_factor * w_in + ulps:
            raise SingularError(f"qr2 width blow-up: {float(w_out):.3g} vs input {float(w_in):.3g}")
    return q, r
