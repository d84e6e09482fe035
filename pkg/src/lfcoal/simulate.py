"""Random generation: height-T genealogies, forward branching populations,
tip sampling, and the two-stage mixture sampler for uniform k-samples.

All draws go through an explicit inverse-CDF so a fixed numpy Generator
seed pins every output bit.  Parallel Monte Carlo should give each worker
its own stream, derived as base_seed XOR worker_index (or an equivalent
spawned SeedSequence); streams are never shared between workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyMaskError,
    KTooLargeError,
    OutOfRangeError,
    PopulationOverflowError,
)
from .model import (
    LFParams,
    coalescent_cdf,
    coalescent_tail,
    mixing_measure,
    thinned_conditional_cdf,
)
from .trees import DepthSeq

__all__ = [
    "SampleMask",
    "ForwardGenealogy",
    "simulate_cpp",
    "simulate_forward_bgw",
    "coalescent_depths_of",
    "bernoulli_mask",
    "uniform_mask",
    "subsample_depths",
    "simulate_ksample_mixture",
    "POPULATION_CAP",
]

POPULATION_CAP = 10_000_000


@dataclass(frozen=True)
class SampleMask:
    """Per-tip selection flags for one genealogy."""

    selected: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(bool(s) for s in self.selected))

    @property
    def n(self) -> int:
        return len(self.selected)

    @property
    def count(self) -> int:
        return sum(self.selected)

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.selected) if s)


@dataclass
class ForwardGenealogy:
    """A forward-grown branching population with its planar embedding.

    ``parents[g][i]`` is the index within generation g-1 of the mother of
    individual i in generation g (g = 1..T); children of one mother are
    consecutive, so index order within a generation is the planar order.
    """

    T: int
    generation_sizes: list
    parents: list  # parents[0] is None

    @property
    def n_tips(self) -> int:
        return self.generation_sizes[self.T]


def _draw_depths(params: LFParams, cdf_table, rng, size):
    """Inverse-CDF draws from the coalescent law truncated at len(cdf_table);
    values beyond the table come back as len(cdf_table)+1 (an overshoot)."""
    u = rng.random(size)
    return np.searchsorted(cdf_table, u, side="left") + 1


def simulate_cpp(params: LFParams, t: int, rng) -> DepthSeq:
    """Draw one height-t genealogy: i.i.d. coalescent depths until the first
    one exceeds t.  The tip count is geometric with success P(H > t)."""
    params.require_supercritical()
    if not t >= 1:
        raise OutOfRangeError(f"height t must be >= 1, got {t!r}")
    cdf_table = coalescent_cdf(params, np.arange(1, t + 1))
    cdf_table = np.atleast_1d(cdf_table)
    depths = []
    block = 64
    while True:
        values = _draw_depths(params, cdf_table, rng, block)
        stop = np.nonzero(values > t)[0]
        if stop.size:
            depths.extend(int(v) for v in values[: stop[0]])
            return DepthSeq(T=t, depths=tuple(depths))
        depths.extend(int(v) for v in values)


def _offspring_counts(params: LFParams, size: int, rng) -> np.ndarray:
    """Inverse-CDF draws from the offspring law: 0 with probability 1 - r,
    otherwise 1 + Geometric(p) failures-free count."""
    u = rng.random(size)
    if params.r == 0.0:
        return np.zeros(size, dtype=np.int64)
    alive = u >= 1.0 - params.r
    v = np.clip((u - (1.0 - params.r)) / params.r, 0.0, 1.0 - 1e-16)
    counts = np.floor(np.log1p(-v) / np.log1p(-params.p)).astype(np.int64) + 1
    return np.where(alive, counts, 0)


def simulate_forward_bgw(
    params: LFParams, t: int, rng, max_population: int = POPULATION_CAP
):
    """Grow a single-root population for t generations.

    Returns a ForwardGenealogy, or None if the line dies out before
    generation t.  Raises PopulationOverflowError beyond max_population.
    Works for any admissible offspring parameters; subcritical runs are
    simply extinct with high probability.
    """
    if not t >= 1:
        raise OutOfRangeError(f"horizon t must be >= 1, got {t!r}")
    sizes = [1]
    parents = [None]
    current = 1
    for _ in range(t):
        counts = _offspring_counts(params, current, rng)
        total = int(counts.sum())
        if total == 0:
            return None
        if total > max_population:
            raise PopulationOverflowError(
                f"population {total} exceeds the cap {max_population}"
            )
        parents.append(np.repeat(np.arange(current, dtype=np.int64), counts))
        sizes.append(total)
        current = total
    return ForwardGenealogy(T=t, generation_sizes=sizes, parents=parents)


def coalescent_depths_of(fwd: ForwardGenealogy) -> DepthSeq:
    """Depths between consecutive surviving tips: generations back to the
    most recent common ancestor, walked through the parent arrays."""
    n = fwd.n_tips
    if n < 1:
        raise OutOfRangeError("no survivors at the observation generation")
    if n == 1:
        return DepthSeq(T=fwd.T, depths=())
    left = np.arange(0, n - 1, dtype=np.int64)
    right = np.arange(1, n, dtype=np.int64)
    depths = np.zeros(n - 1, dtype=np.int64)
    open_pairs = depths == 0
    for back in range(1, fwd.T + 1):
        parent = fwd.parents[fwd.T - back + 1]
        left = parent[left]
        right = parent[right]
        met = open_pairs & (left == right)
        depths[met] = back
        open_pairs &= ~met
        if not open_pairs.any():
            break
    return DepthSeq(T=fwd.T, depths=tuple(int(d) for d in depths))


def bernoulli_mask(n: int, y: float, rng) -> SampleMask:
    """Independent Bernoulli(y) selection flag per tip."""
    if not 0.0 < y < 1.0:
        raise OutOfRangeError(f"y must lie in (0, 1), got {y!r}")
    if n < 1:
        raise OutOfRangeError(f"tip count must be >= 1, got {n!r}")
    return SampleMask(selected=tuple(rng.random(n) < y))


def uniform_mask(n: int, k: int, rng) -> SampleMask:
    """Uniformly random k-subset of n tips via a partial Fisher-Yates pass."""
    if k < 1:
        raise OutOfRangeError(f"sample size must be >= 1, got {k!r}")
    if k > n:
        raise KTooLargeError(f"sample size {k} exceeds tip count {n}")
    pool = np.arange(n)
    for i in range(k):
        j = i + int(rng.integers(n - i))
        pool[i], pool[j] = pool[j], pool[i]
    selected = np.zeros(n, dtype=bool)
    selected[pool[:k]] = True
    return SampleMask(selected=tuple(selected))


def subsample_depths(seq: DepthSeq, mask: SampleMask) -> DepthSeq:
    """Reduce a genealogy to the selected tips.

    The depth between consecutive selected tips is the maximum of the
    original depths over the gap, including the later tip's own depth; the
    stem stays at the original height regardless of which tips survive.
    """
    if mask.n != seq.n:
        raise OutOfRangeError(
            f"mask length {mask.n} does not match tip count {seq.n}"
        )
    picked = mask.indices()
    if not picked:
        raise EmptyMaskError("at least one tip must be selected")
    depths = seq.depths
    reduced = tuple(
        max(depths[picked[i - 1] : picked[i]]) for i in range(1, len(picked))
    )
    return DepthSeq(T=seq.T, depths=reduced)


def simulate_ksample_mixture(params: LFParams, t: int, k: int, rng) -> DepthSeq:
    """Two-stage sampler for the uniform k-sample law: draw the thinning
    probability from the mixing measure, then k-1 i.i.d. depths from the
    thinned law conditioned below the height."""
    params.require_supercritical()
    if not t >= 1:
        raise OutOfRangeError(f"height t must be >= 1, got {t!r}")
    if k < 1:
        raise OutOfRangeError(f"sample size must be >= 1, got {k!r}")
    y = mixing_measure(params, t, k).sample(rng)
    if k == 1:
        return DepthSeq(T=t, depths=())
    cdf_table = np.atleast_1d(thinned_conditional_cdf(params, y, t, np.arange(1, t + 1)))
    u = rng.random(k - 1)
    depths = np.searchsorted(cdf_table, u, side="left") + 1
    return DepthSeq(T=t, depths=tuple(int(d) for d in depths))
