"""Generalized baker's maps and their conditional measures.

The map is the skew product ``b(x, y) = (k x mod 1, v_i(y))`` with branch
``i = ceil(k x)`` and contractions ``v_1..v_k`` whose open images are
disjoint.  Its SRB measure is ``Leb x nu0`` where ``nu0`` is the measure of
maximal entropy of the IFS ``{v_i}``.  Conditional measures live on the
curves ``t -> {(psi(y) - t, y)}`` of a transversal foliation.

Everything here is plain floating point: the experiments are statistical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FitError
from .stats import RngStream, student_ci

_CHECK_GRID = np.linspace(0.0, 1.0, 1001)


@dataclass(frozen=True)
class Contraction:
    """One branch ``v_i``: linear ``mu*y + offset`` or a C^2 plug-in."""

    mu: float | None = None
    offset: float | None = None
    func: Callable | None = None
    deriv: Callable | None = None

    @property
    def is_linear(self) -> bool:
        return self.func is None

    def __call__(self, y):
        if self.is_linear:
            return self.mu * y + self.offset
        return self.func(y)

    def derivative(self, y):
        if self.is_linear:
            return np.full_like(np.asarray(y, dtype=float), self.mu)
        return self.deriv(y)


@dataclass(frozen=True)
class BakerMap:
    k: int
    branches: tuple[Contraction, ...]
    mu_bound: float

    def __post_init__(self):
        if self.k < 2 or len(self.branches) != self.k:
            raise DomainError("need k >= 2 and one contraction per branch")
        if not 0.0 < self.mu_bound < 1.0:
            raise DomainError("contraction bound must lie in (0, 1)")
        images = []
        for v in self.branches:
            if v.is_linear:
                if abs(v.mu) > self.mu_bound:
                    raise DomainError(f"|mu| = {abs(v.mu)} exceeds the bound {self.mu_bound}")
                ends = (v.offset, v.offset + v.mu)
            else:
                d = np.abs(v.derivative(_CHECK_GRID))
                if d.max() > self.mu_bound:
                    raise DomainError(f"sampled |v'| = {d.max()} exceeds the bound {self.mu_bound}")
                vals = v(_CHECK_GRID)
                ends = (float(vals.min()), float(vals.max()))
            lo, hi = min(ends), max(ends)
            if lo < 0.0 or hi > 1.0:
                raise DomainError("contraction image leaves [0, 1]")
            images.append((lo, hi))
        images.sort()
        for (_, h0), (l1, _) in zip(images, images[1:]):
            if l1 < h0:
                raise DomainError("contraction images overlap")

    @classmethod
    def linear(cls, k: int, mu: float, offsets: Sequence[float]) -> "BakerMap":
        """All branches ``y -> mu*y + o_i``."""
        return cls(k, tuple(Contraction(mu=mu, offset=float(o)) for o in offsets), abs(mu))

    @property
    def is_linear(self) -> bool:
        return all(v.is_linear for v in self.branches)

    def apply_branches(self, idx: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``v_{idx+1}(y)`` elementwise (0-based branch indices)."""
        if self.is_linear:
            mus = np.array([v.mu for v in self.branches])
            offs = np.array([v.offset for v in self.branches])
            return mus[idx] * y + offs[idx]
        out = np.empty_like(y)
        for i, v in enumerate(self.branches):
            m = idx == i
            out[m] = v(y[m])
        return out


def branch_index(x, k: int):
    """0-based branch ``ceil(k x) - 1``; a boundary ``x = i/k`` goes to the lower cell."""
    return np.clip(np.ceil(np.asarray(x, dtype=float) * k).astype(np.int64) - 1, 0, k - 1)


def baker_step(x, y, bmap: BakerMap):
    """One application of the baker's map (scalar or array arguments).

    The first coordinate is ``k x - i`` for 0-based branch ``i``; this is
    ``k x mod 1`` except on cell boundaries, where the lower cell's closure
    is used (so ``x = 1/k`` maps to 1, not 0).
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    idx = branch_index(xa, bmap.k)
    x1 = bmap.k * xa - idx
    y1 = bmap.apply_branches(idx, ya)
    if scalar:
        return float(x1[0]), float(y1[0])
    return x1, y1


# -- nu0 and the SRB measure -----------------------------------------------------

def nu0_depth(mu: float, tol: float = 1e-12) -> int:
    return max(1, math.ceil(math.log(tol) / math.log(mu)))


@dataclass
class Nu0Sampler:
    """Depth-truncated random IFS compositions ``v_{i1} o ... o v_{iD}(y_seed)``.

    With uniform branch choice the law is within ``mu**D`` (sup-CDF) of nu0.
    """

    bmap: BakerMap
    rng: RngStream
    depth: int | None = None
    tol: float = 1e-12
    y_seed: float = 0.5

    def __post_init__(self):
        need = nu0_depth(self.bmap.mu_bound, self.tol)
        if self.depth is None:
            self.depth = need
        elif self.depth < need:
            raise DomainError(f"depth {self.depth} below the {need} needed for tolerance {self.tol}")

    def sample(self, count: int, return_branches: bool = False):
        gen = self.rng.generator
        y = np.full(count, self.y_seed)
        idx = None
        for _ in range(self.depth):
            idx = gen.integers(0, self.bmap.k, size=count)
            y = self.bmap.apply_branches(idx, y)
        if return_branches:
            # the last branch applied decides which image interval y lies in
            return y, idx
        return y


def sample_nu0(sampler: Nu0Sampler, count: int) -> np.ndarray:
    return sampler.sample(count)


def srb_sample(bmap: BakerMap, count: int, rng: RngStream, depth: int | None = None):
    """``count`` points of ``Leb x nu0``: x uniform, y from nu0, independent."""
    x = rng.generator.random(count)
    y = Nu0Sampler(bmap, rng, depth).sample(count)
    return x, y


# -- foliations and conditional measures -----------------------------------------

@dataclass(frozen=True)
class Foliation:
    """Leaves ``{(psi(y) - t, y) : y in [0, 1]}`` for ``t`` in ``[-t_star, t_star]``."""

    psi: Callable
    dpsi: Callable
    d2psi: Callable
    t_star: float = math.inf
    name: str = ""

    def leaf_x(self, y, t: float):
        return self.psi(y) - t

    def t_bounds(self) -> tuple[float, float]:
        """Range of ``t`` whose leaves meet the unit square."""
        vals = self.psi(_CHECK_GRID)
        return float(vals.min()) - 1.0, float(vals.max())

    def check_transversal(self) -> bool:
        d = self.dpsi(_CHECK_GRID)
        return bool(np.all(d > 0) or np.all(d < 0))


@dataclass(frozen=True)
class _Poly:
    """``c0 + c1 y + c2 y^2`` on arrays; module level so foliations pickle."""

    c0: float
    c1: float
    c2: float = 0.0

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return self.c0 + self.c1 * y + self.c2 * y * y

    def derivative(self) -> "_Poly":
        return _Poly(self.c1, 2.0 * self.c2)


def _poly_foliation(p: _Poly, t_star: float, name: str) -> Foliation:
    d = p.derivative()
    return Foliation(p, d, d.derivative(), t_star, name)


def affine_foliation(c0: float, c1: float, t_star: float = math.inf) -> Foliation:
    return _poly_foliation(_Poly(c0, c1), t_star, f"{c0}+{c1}y")


def quadratic_foliation(t_star: float = math.inf) -> Foliation:
    """``psi(y) = y^2/2 + y/2`` (``psi' > 0`` and ``psi'' = 1``)."""
    return _poly_foliation(_Poly(0.0, 0.5, 0.5), t_star, "y^2/2+y/2")


FOLIATIONS = {
    "identity": lambda: affine_foliation(0.0, 1.0),
    "quadratic": quadratic_foliation,
}


def get_foliation(name: str) -> Foliation:
    try:
        return FOLIATIONS[name]()
    except KeyError:
        raise DomainError(f"unknown foliation {name!r}; choose from {sorted(FOLIATIONS)}") from None


def conditional_sample(bmap: BakerMap, fol: Foliation, t: float, count: int, rng: RngStream,
                       depth: int | None = None):
    """``count`` points of ``rho_t``: ``(psi(y) - t, y)`` with ``y ~ nu0``."""
    if abs(t) > fol.t_star:
        raise DomainError(f"t = {t} outside [-{fol.t_star}, {fol.t_star}]")
    y = Nu0Sampler(bmap, rng, depth).sample(count)
    x = fol.leaf_x(y, t)
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError(f"leaf t = {t} leaves the unit square")
    return x, y


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def indicator(self, x, y):
        return (x >= self.x0) & (x < self.x1) & (y >= self.y0) & (y < self.y1)


def disintegration_check(bmap: BakerMap, fol: Foliation, rect: Rect, M: int, rng: RngStream):
    """Monte Carlo of both sides of ``rho(E) = int rho_t(E) dt``.

    Left side: fraction of ``M`` SRB points in ``E``.  Right side: ``t``
    uniform over the leaves that meet the square, ``y ~ nu0`` independent,
    ``L * mean(1_E(psi(y) - t, y))``.  Returns ``(lhs, se_lhs, rhs, se_rhs)``.
    """
    x, y = srb_sample(bmap, M, rng)
    ind = rect.indicator(x, y)
    p = ind.mean()
    se_l = math.sqrt(p * (1 - p) / M)
    t0, t1 = fol.t_bounds()
    L = t1 - t0
    t = t0 + L * rng.generator.random(M)
    yy = Nu0Sampler(bmap, rng).sample(M)
    q = rect.indicator(fol.leaf_x(yy, t), yy).mean()
    se_r = L * math.sqrt(q * (1 - q) / M)
    return float(p), se_l, float(L * q), se_r


# -- conditional mixing and Fourier decay ----------------------------------------

def sin2pi_x(x, y):
    return np.sin(2.0 * np.pi * x)


def const_one(x, y):
    return np.ones_like(x)


OBSERVABLES = {"sin2pix": sin2pi_x, "one": const_one}


def get_observable(name: str) -> Callable:
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise DomainError(f"unknown observable {name!r}; choose from {sorted(OBSERVABLES)}") from None


@dataclass
class MixingRow:
    n: int
    estimate: float
    ci_halfwidth: float
    replicas: int
    samples: int


def mixing_correlation_replica(bmap: BakerMap, fol: Foliation, t: float, A: str, B: str,
                               n_max: int, M: int, seed: int, replica: int) -> list[float]:
    """One replica of ``rho_t(A o b^n * B) - rho_t(B) rho(A)`` for n = 0..n_max."""
    fa, fb = get_observable(A), get_observable(B)
    rng = RngStream(seed, "baker-mix", replica)
    x, y = conditional_sample(bmap, fol, t, M, rng)
    bvals = fb(x, y)
    sx, sy = srb_sample(bmap, M, RngStream(seed, "baker-mix/srb", replica))
    rho_a = float(np.mean(fa(sx, sy)))
    mean_b = float(np.mean(bvals))
    out = []
    for _ in range(n_max + 1):
        out.append(float(np.mean(fa(x, y) * bvals)) - mean_b * rho_a)
        x, y = baker_step(x, y, bmap)
    return out


def mixing_correlation(bmap: BakerMap, fol: Foliation, t: float, A: str = "sin2pix",
                       B: str = "sin2pix", n_max: int = 20, M: int = 100_000, R: int = 10,
                       seed: int = 0, threads: int = 1, level: float = 0.99) -> list[MixingRow]:
    """Replica estimates with Student-t CIs of the conditional correlation."""
    from .parallel import map_replicas

    tasks = [(bmap, fol, t, A, B, n_max, M, seed, r) for r in range(R)]
    reps = map_replicas(mixing_correlation_replica, tasks, threads)
    rows = []
    for n in range(n_max + 1):
        mean, half = student_ci([r[n] for r in reps], level)
        rows.append(MixingRow(n, mean, half, R, R * M))
    return rows


@dataclass
class FourierResult:
    j: np.ndarray
    coeffs: np.ndarray
    eta: float
    intercept: float
    floor: float
    n_used: int


def fourier_coefficients(values: np.ndarray, j_max: int, chunk: int = 16) -> np.ndarray:
    """``|M^-1 sum_m exp(2 pi i j v_m)|`` for ``j = 0..j_max``."""
    out = np.empty(j_max + 1)
    ph = 2.0 * np.pi * values
    for j0 in range(0, j_max + 1, chunk):
        js = np.arange(j0, min(j0 + chunk, j_max + 1))
        ang = np.outer(js, ph)
        out[js] = np.hypot(np.cos(ang).mean(axis=1), np.sin(ang).mean(axis=1))
    return out


def fourier_decay(bmap: BakerMap, fol: Foliation, j_max: int, M: int, rng: RngStream,
                  min_points: int = 4) -> FourierResult:
    """Empirical Fourier coefficients of ``psi_* nu0`` and a power-law fit.

    ``eta`` is minus the least-squares slope of ``log|nu_j|`` on ``log j``
    over ``j >= 1`` with ``|nu_j|`` above the noise floor ``3/sqrt(M)``.
    """
    if j_max < 8:
        raise DomainError("j_max must be at least 8")
    y = Nu0Sampler(bmap, rng).sample(M)
    coeffs = fourier_coefficients(fol.psi(y), j_max)
    js = np.arange(j_max + 1)
    floor = 3.0 / math.sqrt(M)
    mask = (js >= 1) & (coeffs > floor)
    if mask.sum() < min_points:
        raise FitError(f"only {int(mask.sum())} coefficients above the floor {floor:.3g}")
    slope, intercept = np.polyfit(np.log(js[mask]), np.log(coeffs[mask]), 1)
    return FourierResult(js, coeffs, float(-slope), float(intercept), floor, int(mask.sum()))


def predicted_xi(k: int, mu: float, eta: float, beta: float) -> float:
    """Decay rate ``k ** (-eta / (beta + (1 + eta) log k / log(1/mu)))``."""
    if not (k >= 2 and 0.0 < mu < 1.0 and 0.0 < eta <= 1.0 and 0.0 < beta <= 1.0):
        raise DomainError("need k >= 2, mu in (0,1), eta in (0,1], beta in (0,1]")
    return k ** (-eta / (beta + (1.0 + eta) * math.log(k) / math.log(1.0 / mu)))


def srb_moment_check(bmap: BakerMap, M: int, rng: RngStream, max_power: int = 4):
    """Paired moments ``E[x^p y^q]`` before and after one step.

    Returns rows ``(p, q, before, after, diff, se_diff)`` for ``p, q <= max_power``
    and ``p + q > 0``.
    """
    x, y = srb_sample(bmap, M, rng)
    x1, y1 = baker_step(x, y, bmap)
    rows = []
    for p in range(max_power + 1):
        for q in range(max_power + 1):
            if p + q == 0:
                continue
            a0 = x ** p * y ** q
            a1 = x1 ** p * y1 ** q
            d = a1 - a0
            rows.append((p, q, float(a0.mean()), float(a1.mean()), float(d.mean()),
                         float(d.std(ddof=1) / math.sqrt(M))))
    return rows
