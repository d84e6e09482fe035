"""Exact tree likelihoods for full, Bernoulli-sampled and k-sampled data.

The full-tree and Bernoulli likelihoods are plain products over node
depths.  The uniform k-sample likelihood exists in three routes: a
composition sum over the placements of unsampled tips, a closed form for
the joint distribution function, and a one-dimensional mixture integral
over the thinning probability.  The composition sum and the closed form
are contested: the printed versions disagree with their own derivations,
so both are implemented verbatim and in derivation-corrected form, tagged
by FormulaVariant, and adjudicated elsewhere against exact enumeration.
This module never decides which variant is right.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDepthError, MTooLargeError, OutOfRangeError
from .model import (
    LFParams,
    MuKMeasure,
    coalescent_cdf,
    coalescent_tail,
    log_coalescent_pmf,
    log_coalescent_tail,
    log_thinned_pmf,
    log_thinned_tail,
    thinned_cdf,
    thinned_pmf,
)
from .quadrature import quadrature
from .trees import DepthSeq

__all__ = [
    "FormulaVariant",
    "CompositionVector",
    "DistinctDepthSummary",
    "ClosedCdfValue",
    "compositions",
    "composition_count",
    "full_tree_loglik",
    "bernoulli_loglik",
    "ksample_lik_direct",
    "ksample_cdf_direct",
    "ksample_cdf_closed",
    "ksample_marginal_loglik",
]

COMPOSITION_CAP = 10_000_000


class FormulaVariant(enum.Enum):
    """Which reading of a contested formula an evaluation used."""

    PAPER_STATED = "paper-stated"
    DERIVATION_CORRECTED = "derivation-corrected"


CompositionVector = tuple  # m_0..m_{k-1}, nonnegative, summing to m


def compositions(total: int, parts: int):
    """Yield all nonnegative integer vectors of the given length summing to
    total, in lexicographic order."""
    if parts < 1:
        raise OutOfRangeError("parts must be >= 1")
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def composition_count(total: int, parts: int) -> int:
    return math.comb(total + parts - 1, parts - 1)


# ---------------------------------------------------------------------------
# product likelihoods


def full_tree_loglik(params: LFParams, seq: DepthSeq, conditioned_on_n: bool = True):
    """Log-likelihood of a full height-T genealogy.

    Unconditioned: log P(H > T) + sum_i log P(H = x_i).  Conditioned on the
    tip count: sum_i log[P(H = x_i) / P(H <= T)].
    """
    params.require_supercritical()
    depths = np.asarray(seq.depths, dtype=int)
    total = float(np.sum(log_coalescent_pmf(params, depths))) if depths.size else 0.0
    if conditioned_on_n:
        log_p0 = math.log1p(-coalescent_tail(params, seq.T))
        return total - depths.size * log_p0
    return total + log_coalescent_tail(params, seq.T)


def bernoulli_loglik(
    params: LFParams, y: float, seq: DepthSeq, conditioned_on_k: bool = True
):
    """Log-likelihood of a Bernoulli(y)-sampled genealogy: the full-tree
    form with the thinned coalescent law in place of the plain one."""
    params.require_supercritical()
    depths = np.asarray(seq.depths, dtype=int)
    total = float(np.sum(log_thinned_pmf(params, y, depths))) if depths.size else 0.0
    if conditioned_on_k:
        log_p0 = math.log1p(-float(np.exp(log_thinned_tail(params, y, seq.T))))
        return total - depths.size * log_p0
    return total + log_thinned_tail(params, y, seq.T)


# ---------------------------------------------------------------------------
# uniform k-sample: composition sum


def _log_diff(a: float, b: float) -> float:
    # log(exp(a) - exp(b)); b may be -inf
    if b == -math.inf:
        return a
    return a + math.log1p(-math.exp(b - a))


def ksample_lik_direct(
    params: LFParams,
    seq: DepthSeq,
    m: int,
    variant: FormulaVariant = FormulaVariant.DERIVATION_CORRECTED,
) -> float:
    """Joint probability that a uniform k-sample shows the given depths while
    the genealogy carries m extra unsampled tips.

    Sums over the compositions assigning the m unsampled tips to the gap
    before/after the sample (m_0) and the k-1 between-sample gaps; each gap
    of size m_i contributes P(H <= x_i)**(m_i+1) - P(H < x_i)**(m_i+1).
    PAPER_STATED evaluates the sum exactly as printed.
    DERIVATION_CORRECTED multiplies each term by m_0 + 1, the number of
    ways to split the outer gap between the two ends.  Terms accumulate in
    log space.
    """
    params.require_supercritical()
    if m < 0:
        raise OutOfRangeError(f"m must be >= 0, got {m!r}")
    k = seq.n
    n_terms = composition_count(m, k)
    if n_terms > COMPOSITION_CAP:
        raise MTooLargeError(
            f"{n_terms} compositions exceed the cap of {COMPOSITION_CAP}"
        )
    log_delta = log_coalescent_tail(params, seq.T)
    log_p0 = math.log1p(-math.exp(log_delta))
    log_le = [float(np.log(coalescent_cdf(params, x))) for x in seq.depths]
    log_lt = [
        float(np.log(coalescent_cdf(params, x - 1))) if x > 1 else -math.inf
        for x in seq.depths
    ]
    acc = -math.inf
    for comp in compositions(m, k):
        term = log_delta + comp[0] * log_p0
        if variant is FormulaVariant.DERIVATION_CORRECTED:
            term += math.log(comp[0] + 1)
        for i in range(k - 1):
            term += _log_diff((comp[i + 1] + 1) * log_le[i], (comp[i + 1] + 1) * log_lt[i])
        acc = np.logaddexp(acc, term)
    return float(math.exp(acc) / math.comb(k + m, k))


# ---------------------------------------------------------------------------
# uniform k-sample: joint distribution function


@dataclass(frozen=True)
class DistinctDepthSummary:
    """Distinct depth values of a k-sample with multiplicities and CDF values.

    y_values are the strictly increasing distinct depths, r_counts their
    multiplicities (summing to k-1), cdf_values the corresponding
    P(H <= y_j), and cdf_t = P(H <= T).
    """

    t: int
    y_values: tuple[int, ...]
    r_counts: tuple[int, ...]
    cdf_values: tuple[float, ...]
    cdf_t: float

    @classmethod
    def from_depths(cls, params: LFParams, t: int, depths) -> "DistinctDepthSummary":
        depths = tuple(int(d) for d in depths)
        if not depths:
            raise OutOfRangeError("need at least one sampled depth (k >= 2)")
        for d in depths:
            if not 1 <= d <= t:
                raise InvalidDepthError(f"depth {d} outside [1, {t}]")
        values = sorted(set(depths))
        counts = [depths.count(v) for v in values]
        return cls(
            t=t,
            y_values=tuple(values),
            r_counts=tuple(counts),
            cdf_values=tuple(float(coalescent_cdf(params, v)) for v in values),
            cdf_t=float(coalescent_cdf(params, t)),
        )

    @property
    def d(self) -> int:
        return len(self.y_values)

    @property
    def k(self) -> int:
        return sum(self.r_counts) + 1

    def is_degenerate(self) -> bool:
        """True when some cdf value coincides with another or with cdf_t."""
        return any(v == self.cdf_t for v in self.cdf_values)

    def expanded_depths(self) -> tuple[int, ...]:
        out = []
        for v, c in zip(self.y_values, self.r_counts):
            out.extend([v] * c)
        return tuple(out)


@dataclass(frozen=True)
class ClosedCdfValue:
    """Result of the closed-form CDF: value plus how it was obtained."""

    value: float
    variant: FormulaVariant
    routed_to_direct: bool


def ksample_cdf_direct(params: LFParams, summary: DistinctDepthSummary, m: int) -> float:
    """Composition sum for P(N_T = k+m, sample depths <= x componentwise).

    This is the distribution-function form of the composition sum as
    printed (no outer-gap multiplicity): summing the printed density over
    the box below x telescopes each bracket to P(H <= x_i)**(m_i+1).
    """
    if m < 0:
        raise OutOfRangeError(f"m must be >= 0, got {m!r}")
    k = summary.k
    n_terms = composition_count(m, k)
    if n_terms > COMPOSITION_CAP:
        raise MTooLargeError(
            f"{n_terms} compositions exceed the cap of {COMPOSITION_CAP}"
        )
    p0 = summary.cdf_t
    p_by_slot = []
    for value, count in zip(summary.cdf_values, summary.r_counts):
        p_by_slot.extend([value] * count)
    total = 0.0
    for comp in compositions(m, k):
        term = p0 ** comp[0]
        for i in range(k - 1):
            term *= p_by_slot[i] ** (comp[i + 1] + 1)
        total += term
    return total * (1.0 - p0) / math.comb(k + m, k)


def ksample_cdf_closed(
    summary: DistinctDepthSummary,
    m: int,
    variant: FormulaVariant = FormulaVariant.DERIVATION_CORRECTED,
    params: LFParams | None = None,
) -> ClosedCdfValue:
    """Closed form for the joint distribution function of a k-sample.

    PAPER_STATED uses the printed exponents p_j**(d-2) (p_j**(m+2) -
    p0**(m+2)); DERIVATION_CORRECTED redoes the final geometric sum of the
    same derivation, which gives p_j**(d-1) (p_j**(m+1) - p0**(m+1)).
    Degenerate inputs (some p_j equal to p0, so a denominator vanishes)
    are routed to the composition sum, which requires ``params``.
    """
    if summary.is_degenerate():
        if params is None:
            raise OutOfRangeError("degenerate summary needs params for the direct sum")
        return ClosedCdfValue(
            value=ksample_cdf_direct(params, summary, m),
            variant=variant,
            routed_to_direct=True,
        )
    k = summary.k
    d = summary.d
    p0 = summary.cdf_t
    ps = summary.cdf_values
    if variant is FormulaVariant.PAPER_STATED:
        e_node, e_geom = d - 2, m + 2
    else:
        e_node, e_geom = d - 1, m + 1
    prefactor = (1.0 - p0) / math.comb(k + m, k)
    for p, r in zip(ps, summary.r_counts):
        prefactor *= p**r
    total = 0.0
    for j in range(d):
        denom = ps[j] - p0
        for i in range(d):
            if i != j:
                denom *= ps[j] - ps[i]
        total += ps[j] ** e_node * (ps[j] ** e_geom - p0**e_geom) / denom
    return ClosedCdfValue(
        value=prefactor * total, variant=variant, routed_to_direct=False
    )


# ---------------------------------------------------------------------------
# uniform k-sample: mixture integral


def ksample_marginal_loglik(
    params: LFParams, seq: DepthSeq, rel_tol: float = 1e-9
) -> float:
    """Log of the k-sample likelihood as a mixture over the thinning
    probability: integral of mu_k(dy) times the product of thinned
    conditional depth probabilities.  Adaptive quadrature to rel_tol."""
    params.require_supercritical()
    k = seq.n
    meas = MuKMeasure(coalescent_tail(params, seq.T), k)
    depths = seq.depths
    t = seq.T

    def integrand(y):
        product = meas.density(y)
        if depths:
            denom = thinned_cdf(params, y, t)
            for x in depths:
                product *= thinned_pmf(params, y, x) / denom
        return product

    value, _ = quadrature(integrand, 0.0, 1.0, rel_tol=rel_tol)
    return math.log(value)
