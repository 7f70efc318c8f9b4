"""Independent reference computations used by the tests.

None of these reuse the package's interval code: they work on plain MPFR
numbers at a much higher precision, on exact rationals, or on brute force.
"""

from __future__ import annotations

import math
import random

import gmpy2
import numpy as np
from gmpy2 import mpfr

from condmix.errors import DomainError
from condmix.interval import Interval, atan2, hypot

ORACLE_BITS = 4 * 196
ORACLE_CTX = gmpy2.context(precision=ORACLE_BITS)

# -- random expression trees --------------------------------------------------

UNARY = ("neg", "abs", "sqrt_abs", "sin", "cos", "sqr")
BINARY = ("add", "sub", "mul", "div", "hypot", "atan2")


def random_leaf(rnd: random.Random):
    """A random interval (sometimes a point) plus a random exact point inside it."""
    lo = rnd.uniform(-10.0, 10.0)
    kind = rnd.random()
    if kind < 0.3:
        hi = lo
    elif kind < 0.6:
        hi = lo + rnd.uniform(0.0, 1e-12) * max(1.0, abs(lo))
    else:
        hi = lo + rnd.uniform(0.0, 3.0)
    pt = rnd.choice([lo, hi, lo + (hi - lo) * rnd.random()])
    pt = min(max(pt, lo), hi)
    return ("leaf", lo, hi, pt)


def random_tree(rnd: random.Random, depth: int):
    if depth == 0 or rnd.random() < 0.2:
        return random_leaf(rnd)
    if rnd.random() < 0.35:
        return (rnd.choice(UNARY), random_tree(rnd, depth - 1))
    return (rnd.choice(BINARY), random_tree(rnd, depth - 1), random_tree(rnd, depth - 1))


def eval_interval(tree, prec: int = 196) -> Interval:
    op = tree[0]
    if op == "leaf":
        return Interval(tree[1], tree[2], prec=prec)
    args = [eval_interval(t, prec) for t in tree[1:]]
    if op == "neg":
        return -args[0]
    if op == "abs":
        return abs(args[0])
    if op == "sqrt_abs":
        return abs(args[0]).sqrt()
    if op == "sin":
        return args[0].sin()
    if op == "cos":
        return args[0].cos()
    if op == "sqr":
        return args[0] ** 2
    a, b = args
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "hypot":
        return hypot(a, b)
    if op == "atan2":
        return atan2(a, b)
    raise ValueError(op)


def eval_point(tree) -> mpfr:
    """Round-to-nearest evaluation at the chosen leaf points, ``ORACLE_BITS`` bits."""
    op = tree[0]
    ctx = ORACLE_CTX
    if op == "leaf":
        return ctx.plus(mpfr(tree[3]))
    args = [eval_point(t) for t in tree[1:]]
    if op == "neg":
        return ctx.minus(args[0])
    if op == "abs":
        return ctx.abs(args[0])
    if op == "sqrt_abs":
        return ctx.sqrt(ctx.abs(args[0]))
    if op == "sin":
        return ctx.sin(args[0])
    if op == "cos":
        return ctx.cos(args[0])
    if op == "sqr":
        return ctx.mul(args[0], args[0])
    a, b = args
    if op == "add":
        return ctx.add(a, b)
    if op == "sub":
        return ctx.sub(a, b)
    if op == "mul":
        return ctx.mul(a, b)
    if op == "div":
        return ctx.div(a, b)
    if op == "hypot":
        return ctx.hypot(a, b)
    if op == "atan2":
        return ctx.atan2(a, b)
    raise ValueError(op)


def contained(value: mpfr, iv: Interval) -> bool:
    """``value`` in ``iv`` up to the oracle's own rounding (relative 2**-(ORACLE_BITS - 64))."""
    ctx = ORACLE_CTX
    eps = ctx.div_2exp(mpfr(1), ORACLE_BITS - 64)
    slack = ctx.add(ctx.mul(ctx.abs(value), eps), eps)
    return ctx.sub(iv.lo, slack) <= value <= ctx.add(iv.hi, slack)


def fuzz_containment(trials: int, seed: int, depth: int = 4):
    """Return ``(checked, skipped, violations)`` over ``trials`` random trees."""
    rnd = random.Random(seed)
    checked = skipped = 0
    bad = []
    for _ in range(trials):
        tree = random_tree(rnd, depth)
        try:
            iv = eval_interval(tree)
        except DomainError:
            skipped += 1
            continue
        try:
            pt = eval_point(tree)
        except (ZeroDivisionError, ValueError):
            skipped += 1
            continue
        if gmpy2.is_nan(pt) or not gmpy2.is_finite(pt):
            skipped += 1
            continue
        checked += 1
        if not contained(pt, iv):
            bad.append(tree)
    return checked, skipped, bad


# -- naive unrotated segment dynamics -----------------------------------------

def naive_segment_run(a: float, b: float, us, prec: int = 800):
    """Segment dynamics on real-frame endpoints in plain MPFR (no frame, no intervals).

    Returns the list of ``(p, q)`` pairs *before* each step, followed by
    the final pair, so entry ``i`` matches the state after ``i`` steps.
    """
    ctx = gmpy2.context(precision=prec)
    A, B = mpfr(a), mpfr(b)
    with ctx:
        x0 = mpfr(2) / (2 + A - A * A + 4 * B)
        p = (x0, mpfr(0))
        q = (1 + p[1] - A * abs(p[0]), B * p[0])
    out = []
    with ctx:
        for u in us:
            out.append((p, q))
            if (p[0] > 0) != (q[0] > 0):
                t = p[0] / (p[0] - q[0])
                s = (mpfr(0), p[1] + t * (q[1] - p[1]))
                if u < t:
                    q = s
                else:
                    p = s
            p = (1 + p[1] - A * abs(p[0]), B * p[0])
            q = (1 + q[1] - A * abs(q[0]), B * q[0])
    out.append((p, q))
    return out


# -- exact nu0 quadrature for linear baker maps -------------------------------

def nu0_atoms(mu: float, offsets, depth: int) -> np.ndarray:
    """All ``k**depth`` equally weighted points ``v_{i1} o ... o v_{iD}(1/2)``."""
    y = np.array([0.5])
    for _ in range(depth):
        y = np.concatenate([mu * y + o for o in offsets])
    return y


# -- brute-force Hausdorff distance -------------------------------------------

def hausdorff_bruteforce(P: np.ndarray, Q: np.ndarray) -> float:
    d = np.sqrt(((P[:, None, :] - Q[None, :, :]) ** 2).sum(-1))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


# -- Student-t quantile by series evaluation -----------------------------------

def t_cdf_series(t: float, nu: int) -> float:
    """Student-t CDF for integer ``nu`` by the classical finite trigonometric series."""
    theta = math.atan(t / math.sqrt(nu))
    c2 = math.cos(theta) ** 2
    if nu % 2 == 1:
        s, term = 0.0, math.cos(theta)
        if nu > 1:
            s = term
            for k in range(1, (nu - 3) // 2 + 1):
                term *= c2 * (2 * k) / (2 * k + 1)
                s += term
        a = (2.0 / math.pi) * (theta + math.sin(theta) * s)
    else:
        s, term = 1.0, 1.0
        for k in range(1, (nu - 2) // 2 + 1):
            term *= c2 * (2 * k - 1) / (2 * k)
            s += term
        a = math.sin(theta) * s
    return 0.5 * (1.0 + a)


def point_in(value: mpfr, iv: Interval, slack: str = "1e-150") -> bool:
    """``value`` in ``iv`` widened by an absolute ``slack`` (compared at 900 bits)."""
    ctx = gmpy2.context(precision=900)
    s = mpfr(slack)
    return ctx.sub(iv.lo, s) <= value <= ctx.add(iv.hi, s)
