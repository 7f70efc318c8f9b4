import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from condmix.errors import EmptyEstimate, FitError
from condmix.interval import Interval
from condmix.stats import (BirkhoffAccumulator, ReplicaEstimate, RngStream, fit_rate, merge_tree,
                           rng_stream, student_ci, t_cdf, t_quantile)

import oracles


def test_ratio_examples():
    acc = BirkhoffAccumulator()
    for v in (1.0, 2.0, 3.0):
        acc.add(1.0, v)
    assert acc.ratio() == 2.0
    assert BirkhoffAccumulator().add(0.7, 5.0).ratio() == 5.0
    with pytest.raises(EmptyEstimate):
        BirkhoffAccumulator().ratio()
    with pytest.raises(ValueError):
        BirkhoffAccumulator().add(-1.0, 1.0)


def test_interval_merge_matches_single_pass():
    g = np.random.default_rng(0)
    ws, vs = g.random(200), g.normal(size=200)
    single = BirkhoffAccumulator(Interval(0), Interval(0))
    halves = [BirkhoffAccumulator(Interval(0), Interval(0)) for _ in range(2)]
    for i, (w, v) in enumerate(zip(ws, vs)):
        single.add(Interval(w), Interval(v))
        halves[i % 2].add(Interval(w), Interval(v))
    merged = halves[0].merge(halves[1])
    assert merged.count == single.count
    assert not merged.ratio().intersect(single.ratio()).is_empty()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.integers(-1000, 1000)), min_size=1, max_size=40))
def test_merge_tree_is_exact_on_integers(pairs):
    accs = [BirkhoffAccumulator(float(v) * w, w, 1) for w, v in pairs]
    flat = BirkhoffAccumulator()
    for w, v in pairs:
        flat.add(w, float(v))
    tree = merge_tree(accs)
    assert tree.count == flat.count
    assert math.isclose(tree.sum_w, flat.sum_w, rel_tol=1e-12, abs_tol=1e-12)


def test_merge_tree_shape_is_fixed():
    accs = [BirkhoffAccumulator(0.1 * i, 1.0, 1) for i in range(7)]
    assert merge_tree(accs).sum_wA == merge_tree(list(accs)).sum_wA


def test_student_ci_examples():
    mean, half = student_ci(ReplicaEstimate([0.5] * 6))
    assert mean == 0.5 and half == 0.0
    with pytest.raises(ValueError):
        student_ci([1.0])


@pytest.mark.parametrize("df", [1, 2, 5, 19, 99])
def test_t_quantile_against_series_and_scipy(df):
    q = t_quantile(0.995, df)
    assert abs(oracles.t_cdf_series(q, df) - 0.995) < 1e-10
    assert math.isclose(q, sps.t.ppf(0.995, df), rel_tol=1e-9)


def test_t_quantile_reference_value():
    assert abs(t_quantile(0.995, 99) - 2.6264) < 1e-4
    assert t_quantile(0.005, 99) == -t_quantile(0.995, 99)
    assert math.isclose(t_cdf(0.0, 7), 0.5)


def test_ci_coverage_synthetic():
    g = RngStream(2024, "coverage").generator
    hits = 0
    for _ in range(200):
        mean, half = student_ci(g.uniform(0, 1, 20))
        hits += abs(mean - 0.5) <= half
    assert hits >= 190


def test_det_err_is_mean_radius():
    est = ReplicaEstimate.from_intervals([Interval(1, 1.2), Interval(2, 2.4)])
    assert math.isclose(est.det_err, 0.15)
    assert est.R == 2


def test_fit_rate_examples():
    ns = list(range(6))
    f = fit_rate(ns, [10.0 ** -n for n in ns])
    assert math.isclose(f.slope, -math.log(10), rel_tol=1e-12) and f.r2 > 1 - 1e-12
    f = fit_rate(ns, [3.0] * 6)
    assert abs(f.slope) < 1e-12
    with pytest.raises(FitError):
        fit_rate([0, 1, 2], [1.0, 0.5, 0.25])


def test_fit_rate_noisy_synthetic():
    g = np.random.default_rng(7)
    ns = np.arange(30)
    noise = 1e-4
    vals = 0.7 ** ns + g.normal(0, noise, ns.size)
    f = fit_rate(ns, vals, ci=[3 * noise] * ns.size)
    assert 0.6 < f.xi < 0.8


def test_fit_rate_stops_at_floor():
    vals = [1.0, 0.5, 0.25, 0.125, 0.01, 0.2]
    f = fit_rate(range(6), vals, floor=0.05)
    assert f.n_used == 4


def test_rng_streams():
    a = [RngStream(1, "exp", 0).uniform() for _ in range(3)]
    s1, s2 = RngStream(1, "exp", 0), RngStream(1, "exp", 0)
    assert [s1.bits64() for _ in range(1000)] == [s2.bits64() for _ in range(1000)]
    r0, r1 = rng_stream(1, "exp", 0), rng_stream(1, "exp", 1)
    assert [r0.bits64() for _ in range(1000)] != [r1.bits64() for _ in range(1000)]
    assert len(set(a)) == 1


def test_rng_uniformity_ks():
    s = RngStream(3, "ks")
    u = np.array([s.uniform() for _ in range(100_000)])
    assert sps.kstest(u, "uniform").pvalue > 0.01


def test_uniform_mpfr_is_exact_dyadic_in_open_unit_interval():
    s = RngStream(4, "dyadic")
    for _ in range(100):
        u = s.uniform_mpfr()
        assert 0 < u < 1
        num, den = u.as_integer_ratio()
        assert den == 2 ** 65 and num % 2 == 1
