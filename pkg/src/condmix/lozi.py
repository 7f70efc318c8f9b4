"""Lozi map, parameter regions and validated segment dynamics.

Local unstable manifolds of the Lozi map ``f(x, y) = (1 + y - a|x|, b x)``
are straight segments.  A segment is stored as ``Q @ [p', q']`` where
``Q`` is a rotation and the rotated endpoints ``p'``, ``q'`` share their
second coordinate.  One step of the dynamics

1. cuts the segment at the singular line ``x = 0`` if it crosses it,
   keeping the child ``[p, s]`` when the uniform draw ``u`` is below the
   cut parameter ``t*`` and ``[s, q]`` otherwise;
2. applies the affine branch ``x -> J x + e1`` through the QR update
   ``Q1 R1 = J Q``, ``p1' = R1 p' + Q1^T e1``.

The shared coordinate and the rotation contract under this update, and the
expanding first coordinates are reset at every cut from ``s' = (beta*y', y')``,
so the whole time series can be carried in interval arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator

import gmpy2

from .errors import (BranchAmbiguityError, DomainError, EscapeError, InitError,
                     OverlapError, StabilityError, TransversalityError)
from .interval import (DEFAULT_PRECISION, Interval, IntervalMat2, IntervalVec2,
                       Rotation2, atan2, contexts, qr2)

ABORT = "abort_on_overlap"
REWEIGHT = "reweight"
MODES = (ABORT, REWEIGHT)

SQRT2 = math.sqrt(2.0)


# -- parameters -----------------------------------------------------------------

@dataclass(frozen=True)
class RegionFlags:
    chaotic: bool
    mixing_srb: bool
    positive_length: bool


def validate_params(a: float, b: float) -> RegionFlags:
    """Parameter-region flags of the Lozi map.

    chaotic:          1 < a < 2 and 0 < b < min(a - 1, 4 - 2a)
    mixing_srb:       chaotic and b < sqrt(2) (a - sqrt(2))
    positive_length:  chaotic and b < a - sqrt(2)
    """
    chaotic = 1.0 < a < 2.0 and 0.0 < b < min(a - 1.0, 4.0 - 2.0 * a)
    return RegionFlags(
        chaotic=chaotic,
        mixing_srb=chaotic and b < SQRT2 * (a - SQRT2),
        positive_length=chaotic and b < a - SQRT2,
    )


@dataclass(frozen=True)
class LoziParams:
    """Lozi parameters; ``a`` and ``b`` are used as their exact binary64 values."""

    a: float
    b: float

    def __post_init__(self):
        if self.b == 0:
            raise DomainError("the Lozi map needs b != 0")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def flags(self) -> RegionFlags:
        return validate_params(self.a, self.b)

    @property
    def chaotic(self) -> bool:
        return self.flags.chaotic

    def fixed_point(self) -> tuple[float, float]:
        """Fixed point of the right branch: x = 1/(1 + a - b), y = b x."""
        x = 1.0 / (1.0 + self.a - self.b)
        return x, self.b * x

    def expansion_bound(self) -> float:
        """Largest singular value of the Jacobian ``[[a, 1], [b, 0]]``."""
        a, b = abs(self.a), abs(self.b)
        tr = a * a + 1.0 + b * b
        det = b * b
        return math.sqrt(0.5 * (tr + math.sqrt(tr * tr - 4.0 * det)))

    def intervals(self, prec: int = DEFAULT_PRECISION) -> tuple[Interval, Interval]:
        return _param_intervals(self.a, self.b, prec)


@lru_cache(maxsize=64)
def _param_intervals(a: float, b: float, prec: int) -> tuple[Interval, Interval]:
    return Interval(a, prec=prec), Interval(b, prec=prec)


# -- point dynamics -------------------------------------------------------------

def lozi_eval(p: IntervalVec2, params: LoziParams) -> IntervalVec2:
    """Enclosure of ``f(p)``.  If ``p.x`` meets 0 the absolute value covers both branches."""
    a, b = params.intervals(p.x.prec)
    return IntervalVec2(1 + p.y - a * abs(p.x), b * p.x)


def lozi_float(x: float, y: float, a: float, b: float) -> tuple[float, float]:
    return 1.0 + y - a * abs(x), b * x


def _orbit_raw(xlo, xhi, ylo, yhi, n, params: LoziParams, prec: int,
               branch_tol, width_max, keep: bool):
    """Iterate the map on raw MPFR endpoints (``a`` and ``b`` handled by sign)."""
    down, up, _ = contexts(prec)
    a = gmpy2.mpfr(params.a, 53)
    b = gmpy2.mpfr(params.b, 53)
    out = [(xlo, xhi, ylo, yhi)] if keep else None
    for _ in range(n):
        if xlo <= 0 <= xhi:
            if up.sub(xhi, xlo) > branch_tol:
                raise BranchAmbiguityError("orbit enclosure straddles x = 0")
            mlo, mhi = gmpy2.mpfr(0), max(up.minus(xlo), xhi)
        elif xlo > 0:
            mlo, mhi = xlo, xhi
        else:
            mlo, mhi = down.minus(xhi), up.minus(xlo)
        if a >= 0:
            amlo, amhi = down.mul(a, mlo), up.mul(a, mhi)
        else:
            amlo, amhi = down.mul(a, mhi), up.mul(a, mlo)
        nxlo = down.sub(down.add(ylo, 1), amhi)
        nxhi = up.sub(up.add(yhi, 1), amlo)
        if b > 0:
            ylo, yhi = down.mul(b, xlo), up.mul(b, xhi)
        else:
            ylo, yhi = down.mul(b, xhi), up.mul(b, xlo)
        xlo, xhi = nxlo, nxhi
        if up.sub(xhi, xlo) > width_max or up.sub(yhi, ylo) > width_max:
            raise StabilityError("orbit enclosure exceeded the width budget")
        if keep:
            out.append((xlo, xhi, ylo, yhi))
    return out if keep else (xlo, xhi, ylo, yhi)


def point_orbit(p: IntervalVec2, n: int, params: LoziParams, branch_tol: float = 1e-12,
                width_max: float = 1e-6) -> IntervalVec2:
    """``n``-fold ``lozi_eval`` with width and branch-ambiguity checks."""
    prec = max(p.x.prec, p.y.prec)
    xlo, xhi, ylo, yhi = _orbit_raw(p.x.lo, p.x.hi, p.y.lo, p.y.hi, n, params, prec,
                                    branch_tol, width_max, keep=False)
    return IntervalVec2(Interval._make(xlo, xhi, prec), Interval._make(ylo, yhi, prec))


def orbit_series(p: IntervalVec2, n: int, params: LoziParams, branch_tol: float = 1e-12,
                 width_max: float = 1e-6) -> list[IntervalVec2]:
    """Enclosures of ``p, f(p), ..., f^n(p)``."""
    prec = max(p.x.prec, p.y.prec)
    raw = _orbit_raw(p.x.lo, p.x.hi, p.y.lo, p.y.hi, n, params, prec,
                     branch_tol, width_max, keep=True)
    mk = Interval._make
    return [IntervalVec2(mk(a, b, prec), mk(c, d, prec)) for a, b, c, d in raw]


def float_orbit(x: float, y: float, n: int, params: LoziParams, box: float = 1.5):
    """Plain double-precision orbit of length ``n`` (excluding the start)."""
    a, b = params.a, params.b
    xs = [0.0] * n
    ys = [0.0] * n
    for i in range(n):
        x, y = 1.0 + y - a * abs(x), b * x
        if not (-box <= x <= box and -box <= y <= box):
            raise EscapeError(f"orbit left the box [-{box}, {box}]^2 at step {i}")
        xs[i] = x
        ys[i] = y
    return xs, ys


# -- observables ----------------------------------------------------------------

def obs_2x(x, y):
    return 2 * x


def obs_abs_x(x, y):
    return abs(x)


def obs_one(x, y):
    return 1 + 0 * x


# A(x, y) = 2x is the smooth observable of the experiments; |x| is a
# piecewise-smooth example with a kink on the singular line.
OBSERVABLES: dict[str, Callable] = {
    "2x": obs_2x,
    "x": lambda x, y: x,
    "abs_x": obs_abs_x,
    "one": obs_one,
}


def get_observable(name: str) -> Callable:
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise DomainError(f"unknown observable {name!r}; choose from {sorted(OBSERVABLES)}")


# -- segment dynamics -----------------------------------------------------------

@dataclass(frozen=True)
class SegmentConfig:
    precision: int = DEFAULT_PRECISION
    box: float = 1.5
    frame_width_max: float = 1e-30
    endpoint_width_max: float = 1e-20
    beta_max: float = 1e3
    n_init: int = 1000
    mode: str = ABORT

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.precision < 53:
            raise DomainError("segment dynamics need at least 53 bits")


@dataclass(frozen=True)
class SegmentState:
    """Directed segment ``Q @ [(xp, y), (xq, y)]``."""

    Q: Rotation2
    xp: Interval
    xq: Interval
    y: Interval
    direction: int = 1
    step_count: int = 0

    def _real(self, xr: Interval) -> IntervalVec2:
        c, s = self.Q.c, self.Q.s
        return IntervalVec2(c * xr - s * self.y, s * xr + c * self.y)

    def p_real(self) -> IntervalVec2:
        return self._real(self.xp)

    def q_real(self) -> IntervalVec2:
        return self._real(self.xq)

    def point_at(self, t) -> IntervalVec2:
        """Real-frame point ``(1 - t) p + t q``."""
        return self._real(self.xp + t * (self.xq - self.xp))

    def real_x(self) -> tuple[Interval, Interval]:
        c, sy = self.Q.c, self.Q.s * self.y
        return c * self.xp - sy, c * self.xq - sy

    def length(self) -> Interval:
        return abs(self.xq - self.xp)

    def frame_width(self) -> float:
        return float(max(self.y.width(), self.Q.c.width(), self.Q.s.width()))

    def endpoint_width(self) -> float:
        return float(max(self.xp.width(), self.xq.width()))


@dataclass(frozen=True)
class CutRecord:
    was_cut: bool
    tstar: Interval | None = None
    chose_left: bool | None = None
    overlap_event: bool = False
    weight: Interval | None = None
    # rotated-frame cut point (xs, y) and the frame it lives in
    _cut: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def cut_point(self) -> IntervalVec2 | None:
        """Real-frame position of the cut point ``s``."""
        if self._cut is None:
            return None
        Q, xs, y = self._cut
        return Q.apply(IntervalVec2(xs, y))


@dataclass(frozen=True)
class WeightedSample:
    point: IntervalVec2
    weight: Interval


def spinup_point(params: LoziParams, prec: int = DEFAULT_PRECISION) -> IntervalVec2:
    """``p0 = (2 / (2 + a - a^2 + 4b), 0)``."""
    a, b = params.intervals(prec)
    x0 = 2 / (2 + a - a * a + 4 * b)
    return IntervalVec2(x0, Interval(0, prec=prec))


def segment_from_endpoints(p: IntervalVec2, q: IntervalVec2, direction: int = 1,
                           step_count: int = 0) -> SegmentState:
    """Rotated-frame storage of the directed segment from ``p`` to ``q``."""
    d = q - p
    if d.x.contains(0) and d.y.contains(0):
        raise InitError("segment endpoints cannot be separated")
    Q = Rotation2.from_angle(atan2(d.y, d.x))
    p_rot = Q.apply_transpose(p)
    q_rot = Q.apply_transpose(q)
    y = p_rot.y.intersect(q_rot.y)
    if y.is_empty():
        raise InitError("rotated endpoints do not share a second coordinate")
    return SegmentState(Q, p_rot.x, q_rot.x, y, direction, step_count)


def init_segment(params: LoziParams, cfg: SegmentConfig | None = None,
                 reverse: bool = False) -> SegmentState:
    """Directed segment from ``p0`` to ``f(p0)`` (from ``f(p0)`` to ``p0`` if ``reverse``)."""
    cfg = cfg or SegmentConfig()
    if not params.chaotic:
        raise DomainError(f"parameters a={params.a}, b={params.b} are not in the chaotic region")
    p0 = spinup_point(params, cfg.precision)
    q0 = lozi_eval(p0, params)
    if reverse:
        return segment_from_endpoints(q0, p0, direction=-1)
    return segment_from_endpoints(p0, q0)


def _check_box(v: Interval, box: float):
    if v.lo < -box or v.hi > box:
        raise EscapeError(f"segment endpoint {v} left the box [-{box}, {box}]")


def segment_step(state: SegmentState, u, params: LoziParams, mode: str | None = None,
                 cfg: SegmentConfig | None = None) -> tuple[SegmentState, CutRecord]:
    """One step of the random segment dynamics.

    ``u`` is a uniform draw in (0, 1) (float or exact mpfr).  In
    ``abort_on_overlap`` mode a draw falling inside the enclosure of ``t*``
    raises ``OverlapError``; in ``reweight`` mode the draw is compared with
    the midpoint ``t**`` of ``t*`` and the record carries the interval
    weight ``t*/t**`` or ``(1 - t*)/(1 - t**)``.
    """
    cfg = cfg or _DEFAULT_CFG
    mode = mode or cfg.mode
    a, b = params.intervals(state.y.prec)
    c, s, y = state.Q.c, state.Q.s, state.y
    xp, xq = state.xp, state.xq

    sy, cy = s * y, c * y
    px, qx = c * xp - sy, c * xq - sy
    box = cfg.box
    _check_box(px, box)
    _check_box(qx, box)
    _check_box(s * xp + cy, box)
    _check_box(s * xq + cy, box)

    sp, sq = px.sign(), qx.sign()
    if sp == 0 or sq == 0:
        raise BranchAmbiguityError("a segment endpoint enclosure meets the singular line")

    if sp == sq:
        branch = sp
        record = CutRecord(False)
    else:
        if c.contains(0):
            raise TransversalityError("segment frame is parallel to the singular line")
        beta = s / c
        if beta.mag() > cfg.beta_max:
            raise TransversalityError(f"|beta| = {float(beta.mag()):.3g} exceeds {cfg.beta_max}")
        xs = beta * y
        tstar = (xs - xp) / (xq - xp)
        overlap = False
        weight = None
        if u < tstar.lo:
            left = True
        elif u > tstar.hi:
            left = False
        else:
            overlap = True
            if mode == ABORT:
                raise OverlapError(f"uniform draw {float(u)} inside t* = {tstar}")
            t2 = tstar.midpoint()
            left = u < t2
            weight = tstar / t2 if left else (1 - tstar) / (1 - t2)
        if left:
            xq, branch = xs, sp
        else:
            xp, branch = xs, sq
        record = CutRecord(True, tstar, left, overlap, weight, (state.Q, xs, y))

    # J = [[-branch*a, 1], [b, 0]];  M = J Q with Q = [[c, -s], [s, c]]
    ja = -a if branch > 0 else a
    m = IntervalMat2(ja * c + s, c - ja * s, b * c, -(b * s))
    Q1, R1 = qr2(m)
    c1, s1 = Q1.c, Q1.s
    r12y = R1.r12 * y
    new = SegmentState(
        Q1,
        R1.r11 * xp + r12y + c1,
        R1.r11 * xq + r12y + c1,
        R1.r22 * y - s1,
        state.direction,
        state.step_count + 1,
    )
    fw = max(new.y.width(), c1.width(), s1.width())
    if fw > cfg.frame_width_max:
        raise StabilityError(f"frame width {float(fw):.3g} exceeds {cfg.frame_width_max}")
    ew = max(new.xp.width(), new.xq.width())
    if ew > cfg.endpoint_width_max:
        raise StabilityError(f"endpoint width {float(ew):.3g} exceeds {cfg.endpoint_width_max}")
    return new, record


_DEFAULT_CFG = SegmentConfig()


def slice_sample(state: SegmentState, x0: float) -> WeightedSample | None:
    """Intersection of the segment with ``{x = x0}`` and its weight ``1/length``.

    Returns None when the segment does not reach the line.
    """
    px, qx = state.real_x()
    if px.contains(x0) or qx.contains(x0):
        raise BranchAmbiguityError("segment endpoint enclosure meets the sampling line")
    if not ((px.hi < x0 < qx.lo) or (qx.hi < x0 < px.lo)):
        return None
    c, s = state.Q.c, state.Q.s
    prec = state.y.prec
    x0i = Interval(x0, prec=prec)
    # rotated abscissa x' solves c x' - s y' = x0, so y_real = (s x0 + y') / c
    y = (s * x0i + state.y) / c
    return WeightedSample(IntervalVec2(x0i, y), 1 / state.length())


# -- runs ---------------------------------------------------------------------

def spin_up(params: LoziParams, rng, cfg: SegmentConfig | None = None,
            reverse: bool = False) -> SegmentState:
    """Initial segment advanced ``cfg.n_init`` steps with draws from ``rng``."""
    cfg = cfg or _DEFAULT_CFG
    state = init_segment(params, cfg, reverse=reverse)
    for _ in range(cfg.n_init):
        state, _ = segment_step(state, rng.uniform_mpfr(), params, cfg=cfg)
    return state


def segment_series(params: LoziParams, n_steps: int, rng, cfg: SegmentConfig | None = None,
                   reverse: bool = False) -> Iterator[tuple[SegmentState, CutRecord]]:
    """Yield ``(state, record)`` for ``n_steps`` post-spin-up steps.

    ``state`` is the segment before the step, ``record`` describes what the
    step did to it.
    """
    cfg = cfg or _DEFAULT_CFG
    state = spin_up(params, rng, cfg, reverse=reverse)
    for _ in range(n_steps):
        nxt, record = segment_step(state, rng.uniform_mpfr(), params, cfg=cfg)
        yield state, record
        state = nxt


TRAJECTORY_COLUMNS = ["step", "p_x", "p_y", "q_x", "q_y", "was_cut", "tstar_lo", "tstar_hi",
                      "frame_width", "endpoint_width"]


def trajectory_rows(params: LoziParams, n_steps: int, rng, cfg: SegmentConfig | None = None):
    """Debug rows (real-frame endpoint midpoints, cut info, widths) for CSV export."""
    for state, rec in segment_series(params, n_steps, rng, cfg):
        p, q = state.p_real(), state.q_real()
        yield [state.step_count, *map(_fmt, p.midpoint()), *map(_fmt, q.midpoint()),
               int(rec.was_cut),
               _fmt(float(rec.tstar.lo)) if rec.was_cut else "",
               _fmt(float(rec.tstar.hi)) if rec.was_cut else "",
               _fmt(state.frame_width()), _fmt(state.endpoint_width())]


def _fmt(v: float) -> str:
    return repr(float(v))


# -- conditional-measure experiments ---------------------------------------------

@dataclass
class ConditionalHistogram:
    edges: list[float]
    mass: list[float]
    samples: int
    steps: int
    lo_bound: float
    hi_bound: float


def conditional_histogram(params: LoziParams, x0: float, n_steps: int, bin_width: float,
                          seed: int, replica: int = 0,
                          cfg: SegmentConfig | None = None) -> ConditionalHistogram:
    """Histogram of ``rho(y | x0)`` from slice samples weighted by ``1/length``."""
    from .stats import RngStream

    cfg = cfg or _DEFAULT_CFG
    rng = RngStream(seed, "lozi-cond-hist", replica)
    ys: list[float] = []
    ws: list[float] = []
    lo_b, hi_b = math.inf, -math.inf
    for state, _ in segment_series(params, n_steps, rng, cfg):
        smp = slice_sample(state, x0)
        if smp is None:
            continue
        ys.append(float(smp.point.y.midpoint()))
        ws.append(float(smp.weight.midpoint()))
        lo_b = min(lo_b, float(smp.point.y.lo))
        hi_b = max(hi_b, float(smp.point.y.hi))
    if not ys:
        return ConditionalHistogram([], [], 0, n_steps, lo_b, hi_b)
    k0 = math.floor(min(ys) / bin_width)
    k1 = math.floor(max(ys) / bin_width)
    bins = [[] for _ in range(k1 - k0 + 1)]
    for yv, wv in zip(ys, ws):
        bins[math.floor(yv / bin_width) - k0].append(wv)
    total = math.fsum(ws)
    mass = [math.fsum(b) / total for b in bins]
    edges = [(k0 + i) * bin_width for i in range(len(bins) + 1)]
    return ConditionalHistogram(edges, mass, len(ys), n_steps, lo_b, hi_b)


@dataclass
class ReplicaCorrelation:
    """Per-replica interval estimates, stored as (midpoint, radius) floats."""

    estimate: list[tuple[float, float]]
    conditional: list[tuple[float, float]]
    rho_A: tuple[float, float]
    samples: int
    steps: int
    cuts: int


def _midrad(v: Interval) -> tuple[float, float]:
    return float(v.midpoint()), float(v.radius())


def conditional_mixing_replica(params: LoziParams, x0: float, observable: str, n_max: int,
                               n_steps: int, seed: int, replica: int,
                               cfg: SegmentConfig | None = None,
                               experiment: str = "lozi-cond-mix") -> ReplicaCorrelation:
    """One time series of ``rho(A o f^n | x0) - rho(A)`` for n = 0..n_max.

    ``rho(A)`` comes from the same segment series, evaluating ``A`` at a
    uniformly placed point on each segment (the SRB measure is uniform
    along unstable segments).  The uniform placements use their own stream
    so they never perturb the branch choices.
    """
    from .stats import RngStream

    cfg = cfg or _DEFAULT_CFG
    A = get_observable(observable)
    rng = RngStream(seed, experiment, replica)
    trng = RngStream(seed, experiment + "/uniform-point", replica)
    prec = cfg.precision
    zero = Interval(0, prec=prec)
    sum_w = zero
    sums = [zero] * (n_max + 1)
    sum_A = zero
    samples = cuts = 0
    for state, rec in segment_series(params, n_steps, rng, cfg):
        cuts += rec.was_cut
        pt = state.point_at(trng.uniform_mpfr())
        sum_A = sum_A + A(pt.x, pt.y)
        smp = slice_sample(state, x0)
        if smp is None:
            continue
        samples += 1
        w = smp.weight
        sum_w = sum_w + w
        for n, z in enumerate(orbit_series(smp.point, n_max, params)):
            sums[n] = sums[n] + w * A(z.x, z.y)
    rho_A = sum_A / n_steps
    if samples == 0:
        nan = (math.nan, math.nan)
        return ReplicaCorrelation([nan] * (n_max + 1), [nan] * (n_max + 1), _midrad(rho_A),
                                  0, n_steps, cuts)
    cond = [s / sum_w for s in sums]
    est = [cn - rho_A for cn in cond]
    return ReplicaCorrelation([_midrad(e) for e in est], [_midrad(c) for c in cond],
                              _midrad(rho_A), samples, n_steps, cuts)


@dataclass
class CorrelationRow:
    n: int
    estimate_mid: float
    det_err: float
    stat_err: float
    replicas: int
    samples: int


def conditional_mixing(params: LoziParams, x0: float = 0.0, observable: str = "2x",
                       n_max: int = 15, n_steps: int = 10_000, replicas: int = 4,
                       seed: int = 0, threads: int = 1, level: float = 0.99,
                       cfg: SegmentConfig | None = None):
    """Replica estimate of ``|rho(A o f^n | x0) - rho(A)|`` with both error kinds.

    Returns ``(rows, replica_results)``; ``det_err`` is the radius of the
    enclosure of the replica mean, ``stat_err`` the Student-t CI halfwidth.
    """
    from .parallel import map_replicas
    from .stats import ReplicaEstimate, student_ci

    cfg = cfg or _DEFAULT_CFG
    tasks = [(params, x0, observable, n_max, n_steps, seed, r, cfg) for r in range(replicas)]
    results = map_replicas(conditional_mixing_replica, tasks, threads)
    samples = sum(r.samples for r in results)
    rows = []
    for n in range(n_max + 1):
        est = ReplicaEstimate([r.estimate[n][0] for r in results],
                              [r.estimate[n][1] for r in results])
        mean, half = student_ci(est, level) if est.R >= 2 else (est.means[0], math.nan)
        rows.append(CorrelationRow(n, mean, est.det_err, half, est.R, samples))
    return rows, results
