"""Particle Bayes filter for one noisy partial observation of a Lozi state.

The prior is the SRB measure, represented by points of a long burnt-in
orbit.  A scalar observation ``y = H(x) + noise`` reweights the particles,
and forecasts ``E[A(f^n(x)) | y]`` relax back to the climatological mean
``rho(A)`` as ``n`` grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DegeneratePosteriorError, DomainError, EscapeError
from .lozi import LoziParams, get_observable
from .stats import RngStream, student_ci, t_quantile

DEFAULT_TOL = 1e-3


@dataclass
class Ensemble:
    particles: np.ndarray  # shape (count, 2)
    weights: np.ndarray

    def __post_init__(self):
        self.particles = np.asarray(self.particles, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.particles) < 1 or len(self.weights) != len(self.particles):
            raise DomainError("an ensemble needs at least one particle and one weight per particle")
        if np.any(self.weights < 0):
            raise DomainError("weights must be non-negative")

    @property
    def count(self) -> int:
        return len(self.weights)

    def normalized(self) -> "Ensemble":
        s = math.fsum(self.weights)
        if not s > 0:
            raise DegeneratePosteriorError("all weights are zero")
        return Ensemble(self.particles, self.weights / s)

    def ess(self) -> float:
        """Effective sample size ``1 / sum(w^2)`` of the normalized weights."""
        w = self.normalized().weights
        return float(1.0 / np.dot(w, w))


@dataclass(frozen=True)
class Observation:
    H: str
    y: float
    sigma: float
    tol: float = DEFAULT_TOL


def _iterate(x: np.ndarray, y: np.ndarray, params: LoziParams):
    return 1.0 + y - params.a * np.abs(x), params.b * x


def prior_from_srb(params: LoziParams, count: int, seed: int, burn_in: int = 1000,
                   thin: int = 1, box: float = 1.5) -> Ensemble:
    """Equal-weight particles from one burnt-in orbit (every ``thin``-th point)."""
    if not params.chaotic:
        raise DomainError(f"parameters a={params.a}, b={params.b} are outside the chaotic region")
    g = RngStream(seed, "bayes-prior").generator
    x, y = (float(v) for v in g.uniform(-0.1, 0.1, 2))
    a, b = params.a, params.b
    for _ in range(burn_in):
        x, y = 1.0 + y - a * abs(x), b * x
    n = count * thin
    xs = np.empty(n)
    ys = np.empty(n)
    for i in range(n):
        x, y = 1.0 + y - a * abs(x), b * x
        xs[i] = x
        ys[i] = y
    pts = np.stack([xs[thin - 1::thin], ys[thin - 1::thin]], axis=1)
    if np.any(np.abs(pts) > box):
        raise EscapeError(f"prior orbit left the box [-{box}, {box}]^2")
    return Ensemble(pts, np.full(count, 1.0 / count))


def bayes_update(e: Ensemble, obs: Observation) -> Ensemble:
    """Posterior weights ``w_i * p(y - H(x_i))``, renormalized.

    ``sigma = inf`` leaves the prior unchanged; ``sigma = 0`` keeps the
    particles with ``|y - H(x)| < tol`` (a band standing in for the delta
    kernel) and reweights them by their prior weights.
    """
    H = get_observable(obs.H)
    r = obs.y - H(e.particles[:, 0], e.particles[:, 1])
    if math.isinf(obs.sigma):
        return e.normalized()
    if obs.sigma == 0:
        w = np.where(np.abs(r) < obs.tol, e.weights, 0.0)
    elif obs.sigma > 0:
        logw = np.full(e.count, -np.inf)
        pos = e.weights > 0
        logw[pos] = np.log(e.weights[pos]) - 0.5 * (r[pos] / obs.sigma) ** 2
        top = logw.max()
        if not np.isfinite(top):
            raise DegeneratePosteriorError("all weights are zero")
        w = np.exp(logw - top)
    else:
        raise DomainError("sigma must be >= 0")
    if not w.any():
        raise DegeneratePosteriorError(
            f"no particle within tol={obs.tol} of y={obs.y}" if obs.sigma == 0
            else "all posterior weights underflowed")
    return Ensemble(e.particles, w).normalized()


def forecast_values(e: Ensemble, A: str, n_max: int, params: LoziParams) -> np.ndarray:
    """``A(f^n(x_i))`` for every particle, shape ``(n_max + 1, count)``."""
    fa = get_observable(A)
    x = e.particles[:, 0].copy()
    y = e.particles[:, 1].copy()
    out = np.empty((n_max + 1, e.count))
    for n in range(n_max + 1):
        out[n] = fa(x, y)
        x, y = _iterate(x, y, params)
    return out


def _weighted(w: np.ndarray, vals: np.ndarray):
    """Weighted means and standard errors of each row of ``vals``.

    Means are ratios of sums so a constant row gives back the constant exactly.
    """
    total = np.dot(np.ones_like(w), w)
    est = np.array([np.dot(row, w) for row in vals]) / total
    w2 = w * w
    var = np.array([np.dot((row - m) ** 2, w2) for row, m in zip(vals, est)])
    return est, np.sqrt(var / (total * total))


def forecast(e: Ensemble, A: str, n: int, params: LoziParams) -> tuple[float, float]:
    """``sum_i w_i A(f^n(x_i))`` and its standard error ``sqrt(sum w_i^2 (A_i - est)^2)``."""
    e = e.normalized()
    vals = forecast_values(e, A, n, params)[n:n + 1]
    est, se = _weighted(e.weights, vals)
    return float(est[0]), float(se[0])


@dataclass
class ForecastRow:
    sigma: float
    n: int
    abs_error: float
    stat_err: float


@dataclass
class ForecastDecay:
    rows: list[ForecastRow]
    srb_mean: float
    srb_se: float
    truths: np.ndarray
    posterior_h_error: dict[float, float]
    signed: dict[float, np.ndarray] = field(default_factory=dict)
    stderr: dict[float, np.ndarray] = field(default_factory=dict)


def truth_points(params: LoziParams, K: int, seed: int, spacing: int = 97,
                 burn_in: int = 1000) -> np.ndarray:
    """``K`` hidden states taken every ``spacing`` steps along a separate orbit."""
    g = RngStream(seed, "bayes-truth").generator
    x, y = (float(v) for v in g.uniform(-0.1, 0.1, 2))
    a, b = params.a, params.b
    for _ in range(burn_in):
        x, y = 1.0 + y - a * abs(x), b * x
    out = []
    for _ in range(K):
        for _ in range(spacing):
            x, y = 1.0 + y - a * abs(x), b * x
        out.append((x, y))
    return np.asarray(out)


def forecast_decay_experiment(params: LoziParams, H: str = "x", A: str = "2x",
                              sigmas: Sequence[float] = (0.5, 0.1, 0.02, 0.0), n_max: int = 30,
                              truth_seed: int = 0, count: int = 500_000, K: int = 20,
                              seed: int = 0, tol: float = DEFAULT_TOL,
                              level: float = 0.99) -> ForecastDecay:
    """Forecast error ``|E[A o f^n | y] - rho(A)|`` against ``n`` per noise level.

    For each of ``K`` hidden truths and each ``sigma`` an observation is
    drawn, the SRB prior is updated and forecasts are made for n = 0..n_max.
    ``abs_error`` averages ``|forecast - rho(A)|`` over the truths and
    ``stat_err`` averages the per-forecast CI halfwidths at ``level``.
    ``rho(A)`` at lead time n is the prior mean of ``A o f^n``, so an
    uninformative observation gives an error of exactly 0.
    """
    prior = prior_from_srb(params, count, seed)
    vals = forecast_values(prior, A, n_max, params)
    srb_mean = float(vals[0].mean())
    srb_se = float(vals[0].std(ddof=1) / math.sqrt(count))
    # climatological forecast at each lead time: the prior's own A o f^n mean
    clim, _ = _weighted(prior.weights, vals)
    fh = get_observable(H)
    hvals = fh(prior.particles[:, 0], prior.particles[:, 1])
    truths = truth_points(params, K, truth_seed)
    z = -t_quantile(0.5 * (1.0 - level), 1e9)
    rows, herr, signed, stderr = [], {}, {}, {}
    for sigma in sigmas:
        noise = RngStream(truth_seed, f"bayes-noise/{sigma!r}").generator
        errs = np.empty((K, n_max + 1))
        ses = np.empty((K, n_max + 1))
        hdiff = []
        for k, (tx, ty) in enumerate(truths):
            ht = float(fh(tx, ty))
            zeta = 0.0 if sigma == 0 or math.isinf(sigma) else float(noise.normal(0.0, sigma))
            post = bayes_update(prior, Observation(H, ht + zeta, sigma, tol))
            est, se = _weighted(post.weights, vals)
            errs[k] = est - clim
            ses[k] = se
            hdiff.append(abs(float(hvals @ post.weights) - ht))
        signed[sigma] = errs
        stderr[sigma] = ses
        herr[sigma] = math.fsum(hdiff) / K
        for n in range(n_max + 1):
            rows.append(ForecastRow(sigma, n, float(np.abs(errs[:, n]).mean()),
                                    float(z * ses[:, n].mean())))
    return ForecastDecay(rows, srb_mean, srb_se, truths, herr, signed, stderr)


@dataclass
class SliceComparison:
    n: int
    bayes: float
    bayes_ci: float
    slice_est: float
    slice_ci: float
    band_allowance: float

    @property
    def consistent(self) -> bool:
        diff = abs(self.bayes - self.slice_est)
        return diff <= math.hypot(self.bayes_ci, self.slice_ci) + self.band_allowance


def compare_with_slice(params: LoziParams, x0: float, A: str = "2x", n_max: int = 3,
                       count: int = 500_000, seed: int = 0, tol: float = DEFAULT_TOL,
                       replicas: int = 4, n_steps: int = 5000, level: float = 0.99,
                       threads: int = 1) -> list[SliceComparison]:
    """Zero-noise posterior forecasts versus slice-sampled ``rho(A o f^n | x0)``.

    The band ``|x - x0| < tol`` is not the slice itself; its images differ
    from the slice images by at most ``Lip(A) * tol * L^n`` with ``L`` the
    Jacobian norm bound, which is added to the joint CI.
    """
    from .lozi import conditional_mixing

    prior = prior_from_srb(params, count, seed)
    post = bayes_update(prior, Observation("x", x0, 0.0, tol))
    vals = forecast_values(post, A, n_max, params)
    est, se = _weighted(post.weights, vals)
    z = -t_quantile(0.5 * (1.0 - level), 1e9)
    _, reps = conditional_mixing(params, x0, A, n_max, n_steps, replicas, seed, threads, level)
    lip = _lipschitz(A)
    L = params.expansion_bound()
    out = []
    for n in range(n_max + 1):
        mean, half = student_ci([r.conditional[n][0] for r in reps], level)
        out.append(SliceComparison(n, float(est[n]), float(z * se[n]), mean, half,
                                   lip * tol * L ** n))
    return out


def _lipschitz(A: str) -> float:
    return {"2x": 2.0, "x": 1.0, "abs_x": 1.0, "one": 0.0}.get(A, math.inf)
