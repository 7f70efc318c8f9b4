"""Quick invariant checks bundled with the CLI (a few seconds in total)."""

from __future__ import annotations

import math
import random
from fractions import Fraction
from typing import Callable

import gmpy2
import numpy as np

from . import baker, bayes, geometry, lozi
from .interval import Interval, IntervalMat2, qr2
from .stats import ReplicaEstimate, RngStream, student_ci, t_quantile


def check_interval_containment(trials: int = 2000, seed: int = 0) -> bool:
    """Random expressions of point intervals contain their exact rational value."""
    rnd = random.Random(seed)
    for _ in range(trials):
        a, b, c = (rnd.uniform(-4, 4) for _ in range(3))
        ia, ib, ic = (Interval(v) for v in (a, b, c))
        fa, fb, fc = (Fraction(v) for v in (a, b, c))
        exact = (fa * fb - fc) * (fa + fc)
        if fb != 0:
            exact -= fc / fb
            res = (ia * ib - ic) * (ia + ic) - ic / ib
        else:
            res = (ia * ib - ic) * (ia + ic)
        if exact not in res:
            return False
    return True


def check_qr2(trials: int = 200, seed: int = 1) -> bool:
    rnd = random.Random(seed)
    for _ in range(trials):
        m = IntervalMat2.from_rows([[rnd.uniform(-2, 2) for _ in range(2)] for _ in range(2)])
        if m.a11.mag() == 0 and m.a21.mag() == 0:
            continue
        Q, R = qr2(m)
        if not Q.is_orthogonal():
            return False
        prod = Q.matrix() @ R.matrix()
        if not all(x in y for x, y in zip(m.entries(), prod.entries())):
            return False
    return True


def check_segment_dynamics(steps: int = 300) -> bool:
    params = lozi.LoziParams(1.8, 0.35)
    rng = RngStream(0, "selftest")
    cfg = lozi.SegmentConfig(n_init=50)
    cuts = 0
    for state, rec in lozi.segment_series(params, steps, rng, cfg):
        cuts += rec.was_cut
        if state.frame_width() > 1e-30:
            return False
    return cuts > 0.01 * steps


def check_baker() -> bool:
    bm = baker.BakerMap.linear(2, 0.4, [0.0, 0.6])
    if baker.baker_step(0.3, 0.5, bm) != (0.6, 0.2):
        return False
    x, y = baker.baker_step(0.7, 0.5, bm)
    if not (math.isclose(x, 0.4) and math.isclose(y, 0.8)):
        return False
    ys = baker.Nu0Sampler(bm, RngStream(0, "selftest-nu0")).sample(10_000)
    if np.any((ys > 0.4) & (ys < 0.6)):
        return False
    return math.isclose(baker.predicted_xi(2, 0.5, 0.5, 1.0), 2 ** -0.2, rel_tol=1e-12)


def check_stats() -> bool:
    if abs(t_quantile(0.995, 99) - 2.6264) > 1e-3:
        return False
    return student_ci(ReplicaEstimate([1.5] * 5))[1] == 0.0


def check_geometry() -> bool:
    a = geometry.GridCover.empty(0.01).insert(np.array([0.0]), np.array([0.0]))
    return geometry.hausdorff(a, a) == 0.0


def check_bayes() -> bool:
    params = lozi.LoziParams(1.8, 0.35)
    prior = bayes.prior_from_srb(params, 2000, 0)
    post = bayes.bayes_update(prior, bayes.Observation("x", 0.1, 0.3))
    return abs(math.fsum(post.weights) - 1.0) < 1e-12


CHECKS: dict[str, Callable[[], bool]] = {
    "interval containment": check_interval_containment,
    "qr2 orthogonality and enclosure": check_qr2,
    "segment dynamics stability": check_segment_dynamics,
    "baker map and nu0 support": check_baker,
    "student-t quantile": check_stats,
    "grid hausdorff identity": check_geometry,
    "posterior normalization": check_bayes,
}


def run_selftest(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        try:
            passed = bool(fn())
        except Exception as exc:  # report, keep going
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return ok
