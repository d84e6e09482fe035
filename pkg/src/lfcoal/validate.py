"""Validation suites: every closed-form claim checked against an oracle.

Each suite pits a formula against an independent route: the coalescent
tail against a forward-grown branching population, the thinned tail
against its geometric-block series and a run-maximum Monte Carlo, the
mixing measure against quadrature and its sampler, the mixture identity
against exact enumeration, and the two contested sampling formulas
against the enumeration oracle.  Suites return report objects that render
as text or JSON; a failed statistical check is reported, never patched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    LFParams,
    MuKMeasure,
    coalescent_cdf,
    coalescent_pmf,
    coalescent_tail,
    thinned_cdf,
    thinned_params,
    thinned_tail,
    _lf_tail_formula,
)
from .oracle import (
    AdjudicationReport,
    MixtureIdentityReport,
    adjudicate,
    chi_square_gof,
    exact_sampled_law,
    verify_mixture_identity,
)
from .quadrature import quadrature
from .simulate import (
    _offspring_counts,
    bernoulli_mask,
    simulate_cpp,
    simulate_ksample_mixture,
    subsample_depths,
)

__all__ = [
    "SUITE_NAMES",
    "run_suite",
    "run_all",
    "run_eq3_suite",
    "run_eq4_suite",
    "run_muk_suite",
    "run_mixture_suite",
    "run_density_suite",
    "run_cdf_suite",
    "forward_depth_harvest",
]

DEFAULT_PARAM_GRID = ((0.5, 0.8), (0.3, 0.6), (0.2, 0.9))


# ---------------------------------------------------------------------------
# forward-population harvest (vectorized forest)


def forward_depth_harvest(params: LFParams, t: int, n_surviving: int, rng,
                          batch_roots: int = 16384):
    """Consecutive-tip depths and tip counts from forward-grown populations.

    Grows independent single-root populations in batches (one offspring
    draw per generation for a whole batch) until n_surviving of them reach
    generation t; returns (tip_counts, pooled_depths) over exactly the
    first n_surviving survivors.  The per-batch planar order matches the
    per-tree simulator draw for draw when the batch holds one root.
    """
    tip_counts = []
    pooled = []
    collected = 0
    while collected < n_surviving:
        parents = [None]
        root_of = np.arange(batch_roots, dtype=np.int64)
        current = batch_roots
        for _ in range(t):
            counts = _offspring_counts(params, current, rng)
            parent_idx = np.repeat(np.arange(current, dtype=np.int64), counts)
            parents.append(parent_idx)
            root_of = root_of[parent_idx]
            current = parent_idx.size
            if current == 0:
                break
        if current == 0:
            continue
        counts_per_root = np.bincount(root_of, minlength=batch_roots)
        surviving_roots = np.nonzero(counts_per_root)[0]
        keep = surviving_roots[: n_surviving - collected]
        keep_set = np.zeros(batch_roots, dtype=bool)
        keep_set[keep] = True
        tip_counts.extend(int(c) for c in counts_per_root[keep])
        collected += keep.size
        # consecutive same-root pairs, restricted to the kept roots
        same = (root_of[:-1] == root_of[1:]) & keep_set[root_of[:-1]]
        left = np.nonzero(same)[0]
        right = left + 1
        depth = np.zeros(left.size, dtype=np.int64)
        open_pairs = np.ones(left.size, dtype=bool)
        for back in range(1, t + 1):
            parent = parents[t - back + 1]
            left = parent[left]
            right = parent[right]
            met = open_pairs & (left == right)
            depth[met] = back
            open_pairs &= ~met
            if not open_pairs.any():
                break
        pooled.append(depth)
    depths = np.concatenate(pooled) if pooled else np.zeros(0, dtype=np.int64)
    return np.asarray(tip_counts, dtype=np.int64), depths


# ---------------------------------------------------------------------------
# report plumbing


@dataclass
class CheckRow:
    name: str
    value: float
    bound: float
    direction: str = "<"  # value < bound passes; ">" for p-values

    @property
    def passed(self) -> bool:
        return self.value < self.bound if self.direction == "<" else self.value > self.bound

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "direction": self.direction,
            "passed": self.passed,
        }

    def to_text(self) -> str:
        mark = "pass" if self.passed else "FAIL"
        return f"    [{mark}] {self.name}: {self.value:.6g} {self.direction} {self.bound:g}"


@dataclass
class SuiteReport:
    suite: str
    title: str
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "title": self.title,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "notes": list(self.notes),
            **self.extra,
        }

    def to_text(self) -> str:
        lines = [f"== {self.suite}: {self.title} =="]
        lines.extend(check.to_text() for check in self.checks)
        lines.extend(f"    note: {note}" for note in self.notes)
        lines.append(f"    suite result: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# suites


def run_eq3_suite(
    params: LFParams = LFParams(0.5, 0.8),
    t: int = 6,
    n_surviving: int = 100_000,
    seed: int = 20_240_601,
) -> SuiteReport:
    """Forward-population oracle for the coalescent tail law.

    Consecutive-tip depths of surviving populations must follow the
    conditional coalescent law, and tip counts the geometric law with the
    stem tail as success probability.
    """
    rng = np.random.default_rng(seed)
    tip_counts, depths = forward_depth_harvest(params, t, n_surviving, rng)
    report = SuiteReport(
        suite="eq3",
        title="coalescent tail vs forward branching populations",
    )

    observed_depths = np.bincount(depths, minlength=t + 1)[1:]
    pmf = coalescent_pmf(params, np.arange(1, t + 1))
    stat_d, p_depths = chi_square_gof(observed_depths, pmf / pmf.sum())
    report.checks.append(
        CheckRow("depth-histogram chi-square p-value", p_depths, 0.001, ">")
    )

    delta = coalescent_tail(params, t)
    top = int(tip_counts.max())
    observed_counts = np.bincount(tip_counts, minlength=top + 1)[1:]
    n_grid = np.arange(1, top + 1)
    expected = (1.0 - delta) ** (n_grid - 1) * delta
    expected[-1] += (1.0 - delta) ** top
    stat_n, p_counts = chi_square_gof(observed_counts, expected)
    report.checks.append(
        CheckRow("tip-count geometric chi-square p-value", p_counts, 0.001, ">")
    )
    report.extra = {
        "params": {"p": params.p, "r": params.r},
        "T": t,
        "n_surviving": int(len(tip_counts)),
        "chi_square": {"depths": stat_d, "tip_counts": stat_n},
    }
    return report


def _thinned_series(params: LFParams, y: float, n: int, tol: float = 1e-16) -> float:
    jmax = 1 + int(math.ceil(math.log(tol) / math.log(1.0 - y)))
    j = np.arange(1, jmax + 1)
    c = coalescent_cdf(params, n)
    return float(np.sum(y * (1.0 - y) ** (j - 1) * (1.0 - c**j)))


def run_eq4_suite(
    params: LFParams = LFParams(0.5, 0.8),
    t: int = 10,
    ys=(0.1, 0.5),
    reps: int = 100_000,
    seed: int = 20_240_602,
) -> SuiteReport:
    """Thinned tail three ways, plus the induced-parameter discrepancy.

    The closed form must match the geometric-block series analytically and
    a run-maximum Monte Carlo over Bernoulli-masked genealogies (whose
    collected depths follow the thinned law conditioned below the height).
    The induced pair (p_y, r_y) is documented as inconsistent: the plain
    tail evaluated there does not reproduce the thinned tail.
    """
    rng = np.random.default_rng(seed)
    report = SuiteReport(suite="eq4", title="thinned coalescent tail, three routes")

    worst_series = 0.0
    for y in ys:
        for n in range(0, 21):
            gap = abs(thinned_tail(params, y, n) - _thinned_series(params, y, n))
            worst_series = max(worst_series, gap)
    report.checks.append(
        CheckRow("geometric-block series max abs gap (n <= 20)", worst_series, 1e-10)
    )

    for y in ys:
        tally = np.zeros(t + 1, dtype=np.int64)
        total = 0
        for _ in range(reps):
            seq = simulate_cpp(params, t, rng)
            mask = bernoulli_mask(seq.n, y, rng)
            if mask.count == 0:
                continue
            sub = subsample_depths(seq, mask)
            for d in sub.depths:
                tally[d] += 1
                total += 1
        # empirical tail of collected depths vs the thinned law conditioned
        # below the height
        cum = np.cumsum(tally[1:])
        empirical_tail = 1.0 - cum / total
        n_grid = np.arange(1, t + 1)
        cdf = thinned_cdf(params, y, n_grid)
        conditional_tail = (thinned_cdf(params, y, t) - cdf) / thinned_cdf(params, y, t)
        worst = float(np.max(np.abs(empirical_tail - conditional_tail)))
        report.checks.append(
            CheckRow(f"run-maximum Monte-Carlo tail max abs gap (y={y})", worst, 0.005)
        )

    # the induced (p_y, r_y) pair: document, do not repair
    y_doc = 0.5
    induced = thinned_params(params, y_doc)
    rows = []
    for n in range(0, 6):
        rows.append(
            {
                "n": n,
                "plain_tail_at_induced_pair": _lf_tail_formula(
                    induced.p_y, induced.r_y, n
                ),
                "thinned_tail": thinned_tail(params, y_doc, n),
            }
        )
    report.checks.append(
        CheckRow(
            "induced-pair discrepancy is real (max gap over n <= 20)",
            -induced.max_tail_gap,
            -1e-3,
        )
    )
    report.notes.append(
        f"y={y_doc}: induced pair p_y={induced.p_y:.6g}, r_y={induced.r_y:.6g} "
        f"(admissible: {induced.valid_lf}); at n=1 the plain tail there gives "
        f"{rows[1]['plain_tail_at_induced_pair']:.6g} while the thinned tail "
        f"gives {rows[1]['thinned_tail']:.6g}: a documented erratum, not a failure"
    )
    report.extra = {
        "params": {"p": params.p, "r": params.r},
        "T": t,
        "induced_pair": {
            "y": y_doc,
            "p_y": induced.p_y,
            "r_y": induced.r_y,
            "valid_lf": induced.valid_lf,
            "tail_consistent": induced.tail_consistent,
            "rows": rows,
        },
    }
    return report


def run_muk_suite(
    ks=tuple(range(1, 9)),
    deltas=(0.1, 0.5, 0.9),
    draws: int = 100_000,
    seed: int = 20_240_603,
) -> SuiteReport:
    """Mixing-measure checks: endpoints, normalization, inverse sampler."""
    rng = np.random.default_rng(seed)
    report = SuiteReport(suite="muk", title="mixing measure and its sampler")

    endpoint_ok = all(
        MuKMeasure(d, k).cdf(0.0) == 0.0 and MuKMeasure(d, k).cdf(1.0) == 1.0
        for k in ks
        for d in deltas
    )
    report.checks.append(
        CheckRow("cdf endpoints exact (0 failures)", 0.0 if endpoint_ok else 1.0, 0.5)
    )

    worst_norm = 0.0
    for k in ks:
        for d in deltas:
            value, _ = quadrature(MuKMeasure(d, k).density, rel_tol=1e-10)
            worst_norm = max(worst_norm, abs(value - 1.0))
    report.checks.append(
        CheckRow("density normalization max abs gap", worst_norm, 1e-8)
    )

    worst_ks = 0.0
    for k in ks:
        for d in deltas:
            meas = MuKMeasure(d, k)
            sample = np.sort(meas.sample(rng, size=draws))
            grid = np.arange(1, draws + 1) / draws
            cdf = meas.cdf(sample)
            dist = max(
                float(np.max(np.abs(grid - cdf))),
                float(np.max(np.abs(grid - 1.0 / draws - cdf))),
            )
            worst_ks = max(worst_ks, dist)
    # 0.01 is the contract at 1e5 draws; smaller smoke runs scale as 1/sqrt(n)
    ks_bound = max(0.01, 2.2 / math.sqrt(draws))
    report.checks.append(
        CheckRow("sampler Kolmogorov distance (worst cell)", worst_ks, ks_bound)
    )
    report.extra = {"ks": list(ks), "deltas": list(deltas), "draws": draws}
    return report


def run_mixture_suite(
    param_grid=((0.5, 0.8), (0.3, 0.6)),
    ts=(2, 3),
    ks=(2, 3),
    quad_tol: float = 1e-9,
    sampler_draws: int = 100_000,
    seed: int = 20_240_604,
) -> SuiteReport:
    """Uniform-sample law as a thinning mixture, plus the two-stage sampler."""
    rng = np.random.default_rng(seed)
    report = SuiteReport(
        suite="mixture",
        title="uniform k-sample law vs thinning mixture and sampler",
    )
    identity_reports = []
    worst = 0.0
    worst_residual = 0.0
    for p, r in param_grid:
        params = LFParams(p, r)
        for t in ts:
            for k in ks:
                rep = verify_mixture_identity(params, t, k, quad_tol=quad_tol)
                identity_reports.append(rep)
                worst = max(worst, rep.max_abs_diff)
                worst_residual = max(worst_residual, rep.residual)
    report.checks.append(
        CheckRow("mixture identity max abs diff (all cells)", worst, 1e-6)
    )
    report.checks.append(
        CheckRow("enumeration residual (worst cell)", worst_residual, 1e-12)
    )

    params = LFParams(0.5, 0.8)
    t = k = 2
    law = exact_sampled_law(params, t, k)
    tally = {}
    for _ in range(sampler_draws):
        key = simulate_ksample_mixture(params, t, k, rng).depths
        tally[key] = tally.get(key, 0) + 1
    tvd = 0.5 * sum(
        abs(tally.get(vec, 0) / sampler_draws - prob)
        for vec, prob in law.probs.items()
    )
    tvd += 0.5 * sum(
        count / sampler_draws for vec, count in tally.items() if vec not in law.probs
    )
    report.checks.append(
        CheckRow("two-stage sampler total variation (T=2, k=2)", tvd, 0.01)
    )
    report.extra = {
        "identities": [rep.to_dict() for rep in identity_reports],
        "sampler": {"draws": sampler_draws, "tvd": tvd},
    }
    return report


def _density_grid_reports(param_grid, ts=(1, 2), k_max=3, m_max=3):
    for p, r in param_grid:
        params = LFParams(p, r)
        for t in ts:
            for k in range(1, k_max + 1):
                yield adjudicate(params, t, k, m_grid=tuple(range(m_max + 1)))


def run_density_suite(param_grid=DEFAULT_PARAM_GRID) -> SuiteReport:
    """Adjudicate the k-sample density composition sum on the desk grid."""
    report = SuiteReport(
        suite="density",
        title="k-sample density: printed formula vs corrected vs enumeration",
    )
    worst_corrected = 0.0
    headline = None
    reports = []
    for adj in _density_grid_reports(param_grid):
        reports.append(adj)
        errors = adj.max_density_errors()
        worst_corrected = max(worst_corrected, errors["derivation-corrected"])
        for cell in adj.density_cells:
            if cell.t == 1 and cell.k == 1 and cell.m == 1:
                if adj.params.p == 0.5 and adj.params.r == 0.8:
                    headline = cell
    paper_fails_somewhere = any(
        adj.density_verdicts["paper-stated"] == "fails" for adj in reports
    )
    corrected_everywhere = all(
        adj.density_verdicts["derivation-corrected"] == "matches" for adj in reports
    )
    report.checks.append(
        CheckRow(
            "corrected variant max abs error vs enumeration",
            worst_corrected,
            1e-10,
        )
    )
    report.checks.append(
        CheckRow(
            "exactly one variant matches every cell",
            0.0 if (corrected_everywhere and paper_fails_somewhere) else 1.0,
            0.5,
        )
    )
    if headline is not None:
        report.checks.append(
            CheckRow(
                "headline cell exact minus 0.25 (T=1,k=1,m=1)",
                abs(headline.reference - 0.25),
                1e-12,
            )
        )
        report.checks.append(
            CheckRow(
                "headline cell printed minus 0.125",
                abs(headline.paper_stated - 0.125),
                1e-12,
            )
        )
        report.notes.append(
            "matching variant: derivation-corrected (the printed sum omits the "
            "outer-gap multiplicity m_0 + 1)"
        )
    report.extra = {"grids": [adj.to_dict() for adj in reports]}
    return report


def run_cdf_suite(param_grid=DEFAULT_PARAM_GRID) -> SuiteReport:
    """Adjudicate the closed-form joint distribution function."""
    report = SuiteReport(
        suite="cdf",
        title="k-sample joint CDF: closed forms vs direct composition sum",
    )
    worst_corrected = 0.0
    hand_case = None
    grids = []
    for p, r in param_grid:
        params = LFParams(p, r)
        for t in (2, 3):
            for k in (2, 3):
                adj = adjudicate(params, t, k, m_grid=(0, 1, 2, 3))
                grids.append(adj)
                worst_corrected = max(
                    worst_corrected, adj.max_cdf_errors()["derivation-corrected"]
                )
                for cell in adj.cdf_cells:
                    if (
                        hand_case is None
                        and cell.k == 2
                        and cell.m == 0
                        and not cell.routed
                        and params.p == 0.5
                    ):
                        hand_case = cell
    report.checks.append(
        CheckRow(
            "corrected closed form max abs error vs direct sum",
            worst_corrected,
            1e-12,
        )
    )
    if hand_case is not None:
        p1 = hand_case.reference / (1.0 - coalescent_cdf(LFParams(0.5, 0.8), hand_case.t))
        report.notes.append(
            f"hand case d=1, m=0 (T={hand_case.t}, x={list(hand_case.depths)}): "
            f"direct {hand_case.reference:.6g} = p_1(1-p_0); printed closed form "
            f"{hand_case.paper_stated:.6g} = (1-p_0)(p_1+p_0); corrected "
            f"{hand_case.corrected:.6g}"
        )
        report.checks.append(
            CheckRow(
                "hand case corrected equals direct",
                abs(hand_case.corrected - hand_case.reference),
                1e-14,
            )
        )
        report.checks.append(
            CheckRow(
                "hand case printed disagrees (gap must exceed 1e-3)",
                -abs(hand_case.paper_stated - hand_case.reference),
                -1e-3,
            )
        )
    routed_cells = sum(
        1 for adj in grids for cell in adj.cdf_cells if cell.routed
    )
    report.notes.append(
        f"{routed_cells} degenerate cells (a depth equal to the height) "
        "routed-to-direct"
    )
    report.extra = {"grids": [adj.to_dict() for adj in grids]}
    return report


SUITE_NAMES = ("eq3", "eq4", "muk", "mixture", "density", "cdf")

_RUNNERS = {
    "eq3": run_eq3_suite,
    "eq4": run_eq4_suite,
    "muk": run_muk_suite,
    "mixture": run_mixture_suite,
    "density": run_density_suite,
    "cdf": run_cdf_suite,
}


def run_suite(name: str, params: LFParams | None = None, seed: int | None = None):
    """Run one named suite; params/seed apply where the suite accepts them."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITE_NAMES}")
    kwargs = {}
    if name in ("eq3", "eq4") and params is not None:
        kwargs["params"] = params
    if name in ("eq3", "eq4", "muk", "mixture") and seed is not None:
        kwargs["seed"] = seed
    return _RUNNERS[name](**kwargs)


def run_all(params: LFParams | None = None, seed: int | None = None, fast: bool = False):
    """Run every suite; fast=True shrinks Monte-Carlo sizes for smoke runs."""
    reports = []
    for name in SUITE_NAMES:
        if fast and name == "eq3":
            reports.append(
                run_eq3_suite(
                    params or LFParams(0.5, 0.8),
                    n_surviving=20_000,
                    seed=seed or 20_240_601,
                )
            )
        elif fast and name == "eq4":
            reports.append(
                run_eq4_suite(
                    params or LFParams(0.5, 0.8),
                    reps=20_000,
                    seed=seed or 20_240_602,
                )
            )
        elif fast and name == "muk":
            reports.append(run_muk_suite(draws=20_000, seed=seed or 20_240_603))
        elif fast and name == "mixture":
            reports.append(
                run_mixture_suite(sampler_draws=20_000, seed=seed or 20_240_604)
            )
        else:
            reports.append(run_suite(name, params=params, seed=seed))
    return reports
