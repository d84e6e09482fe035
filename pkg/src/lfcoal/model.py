"""Closed-form probability kernels of the linear-fractional branching model.

The offspring law mixes extinction (probability 1 - r) with a geometric
number of children (success parameter p), so the mean is m = r / p.  For
this family the coalescent times between consecutive tips of the planar
genealogy are i.i.d., which is what makes every distribution in this
module available in closed form: the coalescent tail, its Bernoulli-thinned
counterpart, the mixing measure that converts Bernoulli sampling into
uniform k-sampling, and the birth/death rates of the continuous-time
embedding.

All functions are pure; log-space variants stay finite for horizons of at
least 10**4 generations.  Array arguments broadcast in the numpy sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEqualError,
    NotSupercriticalError,
    OutOfRangeError,
)

__all__ = [
    "LFParams",
    "ThinnedParams",
    "MuKMeasure",
    "BDRates",
    "validate_params",
    "offspring_pmf",
    "offspring_pgf",
    "survival_probability",
    "coalescent_tail",
    "coalescent_cdf",
    "coalescent_pmf",
    "log_coalescent_tail",
    "log_coalescent_pmf",
    "thinned_tail",
    "thinned_cdf",
    "thinned_pmf",
    "log_thinned_tail",
    "log_thinned_pmf",
    "thinned_params",
    "thinned_conditional_cdf",
    "mixing_measure",
    "bd_embedding_rates",
]


@dataclass(frozen=True)
class LFParams:
    """Validated offspring parameters (p, r) with derived mean m = r/p.

    Requires 0 < p < 1, 0 <= r <= 1 and p != r.  The boundary values
    r = 0 (certain extinction in one step) and r = 1 (pure geometric)
    are allowed; equality r = p is rejected because the coalescent tail
    divides by r - p.
    """

    p: float
    r: float

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and 0.0 < self.p < 1.0):
            raise OutOfRangeError(f"p must lie in (0, 1), got {self.p!r}")
        if not (isinstance(self.r, (int, float)) and 0.0 <= self.r <= 1.0):
            raise OutOfRangeError(f"r must lie in [0, 1], got {self.r!r}")
        if self.p == self.r:
            raise DegenerateEqualError(
                f"p == r == {self.p} is degenerate (r - p divides the tail formula)"
            )

    @property
    def m(self) -> float:
        """Mean offspring number r / p."""
        return self.r / self.p

    @property
    def supercritical(self) -> bool:
        return self.r > self.p

    def require_supercritical(self):
        if not self.supercritical:
            raise NotSupercriticalError(
                f"requires mean offspring m = r/p > 1, got m = {self.m:.6g}"
            )


def validate_params(p, r) -> LFParams:
    """Validate and package raw (p, r) values."""
    return LFParams(float(p), float(r))


@dataclass(frozen=True)
class ThinnedParams:
    """The (p_y, r_y) parameter pair induced by Bernoulli(y) tip thinning.

    ``p_y = 1 - y(1-p)`` and ``r_y = p_y + (r - p)``, so r_y - p_y = r - p
    always, but r_y may exceed 1.  ``valid_lf`` records whether the pair is
    an admissible LFParams; ``tail_consistent`` records whether the plain
    coalescent tail evaluated at (p_y, r_y) reproduces the thinned tail on
    n in {0, ..., check_horizon}.  For y < 1 it does not: the thinned tail
    keeps the original growth rate m = r/p, not r_y/p_y, so the pair is
    reported, never silently substituted.
    """

    base: LFParams
    y: float
    p_y: float
    r_y: float
    valid_lf: bool
    tail_consistent: bool
    max_tail_gap: float
    check_horizon: int


@dataclass(frozen=True)
class MuKMeasure:
    """Mixing measure on the thinning probability y for a k-tip sample.

    density(y) = k * d * y**(k-1) / (d + (1-d)*y)**(k+1) with d = P(H > T),
    whose distribution function is F(y) = (y / (d + (1-d)*y))**k.  Mixing
    Bernoulli(y) sampling over this measure reproduces the uniform k-sample
    tree law.
    """

    delta_t: float
    k: int

    def __post_init__(self):
        if not 0.0 < self.delta_t < 1.0:
            raise OutOfRangeError(f"delta_t must lie in (0, 1), got {self.delta_t!r}")
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise OutOfRangeError(f"k must be a positive integer, got {self.k!r}")

    def density(self, y):
        d = self.delta_t
        y = np.asarray(y, dtype=float)
        out = self.k * d * y ** (self.k - 1) / (d + (1.0 - d) * y) ** (self.k + 1)
        return out if out.ndim else float(out)

    def cdf(self, y):
        d = self.delta_t
        y = np.asarray(y, dtype=float)
        out = (y / (d + (1.0 - d) * y)) ** self.k
        return out if out.ndim else float(out)

    def ppf(self, u):
        """Exact inverse of cdf: v = u**(1/k), y = d*v / (1 - (1-d)*v)."""
        d = self.delta_t
        u = np.asarray(u, dtype=float)
        v = u ** (1.0 / self.k)
        out = d * v / (1.0 - (1.0 - d) * v)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        """Draw by inverse-CDF from a numpy Generator (exact, branch-free)."""
        return self.ppf(rng.random(size))


def mixing_measure(params: LFParams, t: int, k: int) -> MuKMeasure:
    """MuKMeasure for a height-t genealogy under the given offspring law."""
    return MuKMeasure(coalescent_tail(params, t), k)


@dataclass(frozen=True)
class BDRates:
    """Birth and death rates of the continuous-time embedding."""

    birth: float
    death: float


# ---------------------------------------------------------------------------
# offspring law


def offspring_pmf(params: LFParams, k):
    """P(offspring = k): 1 - r at k = 0, r*p*(1-p)**(k-1) for k >= 1."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise OutOfRangeError("offspring count must be nonnegative")
    kf = k_arr.astype(float)
    with np.errstate(invalid="ignore"):
        pos = params.r * params.p * (1.0 - params.p) ** (kf - 1.0)
    out = np.where(k_arr == 0, 1.0 - params.r, pos)
    return out if out.ndim else float(out)


def offspring_pgf(params: LFParams, s):
    """Generating function E[s**offspring] = 1 - r + r*p*s / (1 - (1-p)*s)."""
    s = np.asarray(s, dtype=float)
    out = 1.0 - params.r + params.r * params.p * s / (1.0 - (1.0 - params.p) * s)
    return out if out.ndim else float(out)


def survival_probability(params: LFParams, t: int) -> float:
    """P(population alive at generation t), by iterating the pgf at 0."""
    if t < 0:
        raise OutOfRangeError("generation must be nonnegative")
    q = 0.0
    for _ in range(int(t)):
        q = offspring_pgf(params, q)
    return 1.0 - q


# ---------------------------------------------------------------------------
# coalescent-time law H

def _check_n(n, minimum):
    n_arr = np.asarray(n)
    if not np.issubdtype(n_arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(n_arr, 1), 0)):
            raise OutOfRangeError(f"n must be integer, got {n!r}")
    if np.any(n_arr < minimum):
        raise OutOfRangeError(f"n must be >= {minimum}, got {n!r}")
    return n_arr


def coalescent_tail(params: LFParams, n):
    """P(H > n) = (r-p) / ((1-p) m**n - (1-r)) for n >= 0.

    Evaluated with m**(-n) so that no intermediate overflows; exactly 1 at
    n = 0 and strictly decreasing to 0.
    """
    params.require_supercritical()
    n_arr = _check_n(n, 0)
    w = params.m ** (-n_arr.astype(float))
    num = (params.r - params.p) * w
    den = (1.0 - params.p) * (1.0 - w) + num
    out = num / den
    return out if out.ndim else float(out)


def coalescent_cdf(params: LFParams, n):
    """P(H <= n) = 1 - coalescent_tail(params, n)."""
    return 1.0 - coalescent_tail(params, n)


def coalescent_pmf(params: LFParams, n):
    """P(H = n) = P(H > n-1) - P(H > n), defined for n >= 1."""
    n_arr = _check_n(n, 1)
    out = coalescent_tail(params, n_arr - 1) - coalescent_tail(params, n_arr)
    return out if np.ndim(out) else float(out)


def log_coalescent_tail(params: LFParams, n):
    """log P(H > n), finite for arbitrarily large n."""
    params.require_supercritical()
    n_arr = _check_n(n, 0)
    rp = params.r - params.p
    lw = -n_arr.astype(float) * math.log(params.m)
    w = np.exp(lw)
    den = (1.0 - params.p) * (-np.expm1(lw)) + rp * w
    out = math.log(rp) + lw - np.log(den)
    return out if out.ndim else float(out)


def _log_pmf_from_log_tail(log_tail_prev, log_tail_cur):
    # log(exp(a) - exp(b)) with a > b
    return log_tail_prev + np.log1p(-np.exp(log_tail_cur - log_tail_prev))


def log_coalescent_pmf(params: LFParams, n):
    """log P(H = n) for n >= 1, stable far into the tail."""
    n_arr = _check_n(n, 1)
    out = _log_pmf_from_log_tail(
        log_coalescent_tail(params, n_arr - 1), log_coalescent_tail(params, n_arr)
    )
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Bernoulli(y)-thinned coalescent law H_y

def _check_y(y, allow_one=True):
    if not (0.0 < y <= 1.0 if allow_one else 0.0 < y < 1.0):
        hi = "1]" if allow_one else "1)"
        raise OutOfRangeError(f"y must lie in (0, {hi}, got {y!r}")
    return float(y)


def thinned_tail(params: LFParams, y, n):
    """P(H_y > n): tail between consecutive tips kept by Bernoulli(y) thinning.

    Equals (r-p) / (y(1-p) m**n - [y(1-p) - (r-p)]) with the original
    m = r/p, i.e. the tail of the maximum of a Geometric(y)-sized block of
    independent coalescent times.  At y = 1 it reduces to coalescent_tail.
    """
    params.require_supercritical()
    y = _check_y(y)
    n_arr = _check_n(n, 0)
    a = y * (1.0 - params.p)
    rp = params.r - params.p
    w = params.m ** (-n_arr.astype(float))
    num = rp * w
    den = a * (1.0 - w) + num
    out = num / den
    return out if out.ndim else float(out)


def thinned_cdf(params: LFParams, y, n):
    """P(H_y <= n)."""
    return 1.0 - thinned_tail(params, y, n)


def thinned_pmf(params: LFParams, y, n):
    """P(H_y = n) for n >= 1."""
    n_arr = _check_n(n, 1)
    out = thinned_tail(params, y, n_arr - 1) - thinned_tail(params, y, n_arr)
    return out if np.ndim(out) else float(out)


def log_thinned_tail(params: LFParams, y, n):
    """log P(H_y > n), finite for arbitrarily large n."""
    params.require_supercritical()
    y = _check_y(y)
    n_arr = _check_n(n, 0)
    a = y * (1.0 - params.p)
    rp = params.r - params.p
    lw = -n_arr.astype(float) * math.log(params.m)
    w = np.exp(lw)
    den = a * (-np.expm1(lw)) + rp * w
    out = math.log(rp) + lw - np.log(den)
    return out if out.ndim else float(out)


def log_thinned_pmf(params: LFParams, y, n):
    """log P(H_y = n) for n >= 1."""
    n_arr = _check_n(n, 1)
    out = _log_pmf_from_log_tail(
        log_thinned_tail(params, y, n_arr - 1), log_thinned_tail(params, y, n_arr)
    )
    return out if np.ndim(out) else float(out)


def _lf_tail_formula(p: float, r: float, n) -> float:
    # Raw tail expression with m = r/p, no parameter validation.  Used to
    # evaluate the formula at (p_y, r_y) pairs that may not be admissible.
    n = np.asarray(n, dtype=float)
    m = r / p
    out = (r - p) / ((1.0 - p) * m**n - (1.0 - r))
    return out if out.ndim else float(out)


def thinned_params(params: LFParams, y, check_horizon: int = 20) -> ThinnedParams:
    """The induced (p_y, r_y) pair plus a consistency report.

    The report compares the plain coalescent tail evaluated at (p_y, r_y)
    against thinned_tail on n in {0, ..., check_horizon}.  Agreement holds
    only in the y -> 1 limit; for y < 1 the two disagree (and r_y may
    exceed 1), which is surfaced rather than fixed.
    """
    params.require_supercritical()
    y = _check_y(y)
    p_y = 1.0 - y * (1.0 - params.p)
    r_y = p_y + (params.r - params.p)
    valid_lf = (0.0 < p_y < 1.0) and (0.0 <= r_y <= 1.0) and p_y != r_y
    ns = np.arange(check_horizon + 1)
    gap = np.max(
        np.abs(_lf_tail_formula(p_y, r_y, ns) - thinned_tail(params, y, ns))
    )
    return ThinnedParams(
        base=params,
        y=y,
        p_y=p_y,
        r_y=r_y,
        valid_lf=valid_lf,
        tail_consistent=bool(gap < 1e-9),
        max_tail_gap=float(gap),
        check_horizon=check_horizon,
    )


def thinned_conditional_cdf(params: LFParams, y, t: int, j):
    """P(H_y <= j | H_y <= t) for 1 <= j <= t.

    Computed as ((m**j - 1) / (m**t - 1)) * (r-p + y(1-p)(m**t - 1)) /
    (r-p + y(1-p)(m**j - 1)), rearranged in powers of m**(-1) so that no
    term overflows; identical to the ratio of thinned CDFs.
    """
    params.require_supercritical()
    y = _check_y(y)
    if t < 1:
        raise OutOfRangeError(f"t must be >= 1, got {t!r}")
    j_arr = _check_n(j, 1)
    if np.any(j_arr > t):
        raise OutOfRangeError(f"j must lie in [1, {t}], got {j!r}")
    a = y * (1.0 - params.p)
    rp = params.r - params.p
    jf = j_arr.astype(float)
    wj = params.m ** (-jf)
    wt = params.m ** (-float(t))
    out = ((1.0 - wj) / (1.0 - wt)) * (rp * wt + a * (1.0 - wt)) / (
        rp * wj + a * (1.0 - wj)
    )
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# continuous-time embedding

def bd_embedding_rates(params: LFParams) -> BDRates:
    """Rates of the birth-death process in which the chain embeds.

    birth = (1-p) (log p - log r) / (p - r) and
    death = (1-r) (log p - log r) / (p - r); both positive, and
    exp(birth - death) = m.
    """
    factor = (math.log(params.p) - math.log(params.r)) / (params.p - params.r)
    return BDRates(birth=(1.0 - params.p) * factor, death=(1.0 - params.r) * factor)
