"""Maximum-likelihood estimation of (p, r) from observed genealogies.

The observation schemes are the full genealogy, a Bernoulli(y) tip sample
with known y, or a uniform k-sample (whose likelihood marginalizes the
thinning probability, so no conditioning switch applies).  Fitting is a
two-phase search: a coarse scan of the feasible triangle 0 < p < r <= 1
followed by a derivative-free simplex in a logistic reparametrization that
cannot leave the triangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .errors import NoFeasiblePointError, OutOfRangeError
from .likelihood import bernoulli_loglik, full_tree_loglik, ksample_marginal_loglik
from .model import (
    LFParams,
    log_coalescent_pmf,
    log_coalescent_tail,
    log_thinned_pmf,
    log_thinned_tail,
)
from .trees import DepthSeq

__all__ = [
    "ObservationSet",
    "FitResult",
    "total_loglik",
    "fit",
    "loglik_surface",
]

SCHEMES = ("full", "bernoulli", "uniform")
_BOUNDARY_MARGIN = 1e-6


@dataclass(frozen=True)
class ObservationSet:
    """A dataset of depth sequences plus how they were observed.

    conditioned_on_count selects the likelihood conditioned on the number
    of observed tips (the default: it is what a practitioner holding only
    a sample can justify).  The uniform scheme always uses the marginal
    mixture likelihood.
    """

    trees: tuple
    scheme: str = "full"
    y: float | None = None
    conditioned_on_count: bool = True

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if self.scheme not in SCHEMES:
            raise OutOfRangeError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "bernoulli":
            if self.y is None or not 0.0 < self.y < 1.0:
                raise OutOfRangeError("bernoulli scheme needs y in (0, 1)")
        for tree in self.trees:
            if not isinstance(tree, DepthSeq):
                raise OutOfRangeError(f"expected DepthSeq, got {type(tree)!r}")

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class FitResult:
    """Point estimates with convergence diagnostics.

    (p_hat, r_hat) is a valid supercritical parameter pair unless
    boundary_flag is set, in which case the optimum pressed against the
    edge of the feasible triangle.  grid_* record the coarse-phase seed so
    callers can verify the refinement only improved on it.
    """

    p_hat: float
    r_hat: float
    loglik_at_optimum: float
    converged: bool
    iterations: int
    boundary_flag: bool
    grid_p: float
    grid_r: float
    grid_loglik: float

    def params(self) -> LFParams:
        return LFParams(self.p_hat, self.r_hat)


@lru_cache(maxsize=64)
def _depth_histograms(obs: ObservationSet):
    """Per-height depth counts and tree counts, ordered by height.

    Cached: the optimizer evaluates the same observation set thousands of
    times and only the parameters change."""
    hists = {}
    for tree in obs.trees:
        counts, n_trees = hists.get(tree.T, (None, 0))
        if counts is None:
            counts = np.zeros(tree.T + 1, dtype=np.int64)
        for d in tree.depths:
            counts[d] += 1
        hists[tree.T] = (counts, n_trees + 1)
    return dict(sorted(hists.items()))


def total_loglik(params: LFParams, obs: ObservationSet) -> float:
    """Sum of per-tree log-likelihoods under the observation scheme.

    Trees are independent; full and Bernoulli schemes reduce to histogram
    dot products per distinct height, so the cost per evaluation does not
    grow with the number of trees.
    """
    params.require_supercritical()
    if obs.n_trees == 0:
        return 0.0
    if obs.scheme == "uniform":
        cache = {}
        values = []
        for tree in obs.trees:
            key = (tree.T, tree.depths)
            if key not in cache:
                cache[key] = ksample_marginal_loglik(params, tree)
            values.append(cache[key])
        return math.fsum(values)

    pieces = []
    for t, (counts, n_trees) in _depth_histograms(obs).items():
        depths = np.nonzero(counts)[0]
        n_depths = int(counts.sum())
        if obs.scheme == "full":
            if depths.size:
                log_pmf = log_coalescent_pmf(params, depths)
                pieces.append(float(np.dot(counts[depths], np.atleast_1d(log_pmf))))
            if obs.conditioned_on_count:
                log_p0 = math.log1p(-math.exp(log_coalescent_tail(params, t)))
                pieces.append(-n_depths * log_p0)
            else:
                pieces.append(n_trees * log_coalescent_tail(params, t))
        else:
            if depths.size:
                log_pmf = log_thinned_pmf(params, obs.y, depths)
                pieces.append(float(np.dot(counts[depths], np.atleast_1d(log_pmf))))
            if obs.conditioned_on_count:
                log_f = math.log1p(-math.exp(log_thinned_tail(params, obs.y, t)))
                pieces.append(-n_depths * log_f)
            else:
                pieces.append(n_trees * log_thinned_tail(params, obs.y, t))
    return math.fsum(pieces)


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _logit(x: float) -> float:
    return math.log(x) - math.log1p(-x)


def _decode(u: float, v: float) -> LFParams:
    # p = expit(u), r = p + (1-p) * expit(v): the whole plane maps into the
    # open feasible triangle, so the simplex can never step outside
    p = _expit(u)
    s = _expit(v)
    return LFParams(p, p + (1.0 - p) * s)


def fit(
    obs: ObservationSet,
    grid_size: int = 50,
    max_iterations: int = 2000,
    tol: float = 1e-7,
) -> FitResult:
    """Two-phase maximum-likelihood search over the feasible triangle.

    Phase one scans a grid_size x grid_size lattice of the triangle
    {0 < p < 1, p < r <= 1} (ties broken toward the smallest p, then r);
    phase two runs Nelder-Mead from the best lattice point in logistic
    coordinates, stopping at simplex diameter tol or max_iterations.
    """
    if obs.n_trees == 0:
        raise NoFeasiblePointError("cannot fit an empty observation set")
    if grid_size < 2:
        raise OutOfRangeError("grid_size must be at least 2")

    best = None
    for i in range(grid_size):
        p = (i + 0.5) / grid_size
        for j in range(grid_size):
            s = (j + 0.5) / grid_size
            params = LFParams(p, p + (1.0 - p) * s)
            ll = total_loglik(params, obs)
            key = (-ll, p, params.r)
            if best is None or key < best[0]:
                best = (key, params, ll)
    _, grid_params, grid_ll = best

    def objective(x):
        return -total_loglik(_decode(x[0], x[1]), obs)

    x0 = np.array(
        [
            _logit(grid_params.p),
            _logit((grid_params.r - grid_params.p) / (1.0 - grid_params.p)),
        ]
    )
    result = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": tol,
            "fatol": 1e-8,
            "maxiter": max_iterations,
            "maxfev": 4 * max_iterations,
        },
    )
    refined = _decode(result.x[0], result.x[1])
    refined_ll = -float(result.fun)
    converged = bool(result.success)
    if refined_ll < grid_ll:
        # never hand back anything worse than the seed
        refined, refined_ll, converged = grid_params, grid_ll, False
    p_hat, r_hat = refined.p, refined.r
    s_hat = (r_hat - p_hat) / (1.0 - p_hat)
    boundary = (
        min(p_hat, 1.0 - p_hat) < _BOUNDARY_MARGIN
        or min(s_hat, 1.0 - s_hat) < _BOUNDARY_MARGIN
    )
    return FitResult(
        p_hat=p_hat,
        r_hat=r_hat,
        loglik_at_optimum=refined_ll,
        converged=converged,
        iterations=int(result.nit),
        boundary_flag=bool(boundary),
        grid_p=grid_params.p,
        grid_r=grid_params.r,
        grid_loglik=grid_ll,
    )


def loglik_surface(obs: ObservationSet, p_range, r_range, steps: int):
    """Dense (p, r, loglik) table over a rectangle.

    Rows with r <= p (outside the feasible triangle) carry None as the
    likelihood marker.  Returns a list of (p, r, loglik-or-None) rows in
    row-major order, p varying slowest.
    """
    p_lo, p_hi = map(float, p_range)
    r_lo, r_hi = map(float, r_range)
    if not (0.0 < p_lo <= p_hi < 1.0):
        raise OutOfRangeError(f"p range must sit inside (0, 1), got {p_range!r}")
    if not (0.0 < r_lo <= r_hi <= 1.0):
        raise OutOfRangeError(f"r range must sit inside (0, 1], got {r_range!r}")
    if steps < 1:
        raise OutOfRangeError("steps must be >= 1")
    ps = np.linspace(p_lo, p_hi, steps)
    rs = np.linspace(r_lo, r_hi, steps)
    rows = []
    for p in ps:
        for r in rs:
            if r <= p:
                rows.append((float(p), float(r), None))
            else:
                rows.append((float(p), float(r), total_loglik(LFParams(p, r), obs)))
    return rows
