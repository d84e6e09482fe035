"""Command-line front end: simulate, sample, evaluate, fit, validate, export.

Every randomized subcommand either receives --seed or generates one and
prints it, so any run can be reproduced verbatim.  Output files are
written atomically (temp file, then rename) and start with a format
header (a JSON header line, or the CSV header row).  Exit codes: 0 on
success, 1 on a usage error, 2 on a computational error.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import LfcoalError
from .fileio import (
    FORMAT_VERSION,
    atomic_write,
    read_depths_auto,
    write_depths_jsonl,
    write_newick_file,
)
from .inference import ObservationSet, fit as run_fit, loglik_surface, total_loglik
from .likelihood import bernoulli_loglik, full_tree_loglik, ksample_marginal_loglik
from .model import (
    LFParams,
    coalescent_pmf,
    coalescent_tail,
    thinned_pmf,
    thinned_tail,
)
from .simulate import (
    bernoulli_mask,
    simulate_cpp,
    subsample_depths,
    uniform_mask,
)
from .trees import DepthSeq
from .validate import SUITE_NAMES, run_all, run_suite

MAX_SEED = 2**64 - 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting with code 2."""

    def error(self, message):
        raise _UsageError(message)


def _seed_type(text):
    value = int(text)
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def _probability(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return value


def _rate(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _scheme(text):
    if text == "full":
        return ("full", None)
    if text == "uniform":
        return ("uniform", None)
    if text.startswith("bernoulli:"):
        return ("bernoulli", _probability(text.split(":", 1)[1]))
    if text.startswith("uniform:"):
        k = int(text.split(":", 1)[1])
        if k < 1:
            raise argparse.ArgumentTypeError("uniform:k needs k >= 1")
        return ("uniform", k)
    raise argparse.ArgumentTypeError(
        f"unknown scheme {text!r}; use full, bernoulli:y or uniform[:k]"
    )


def _ensure_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}")
    return args.seed


def _params(args) -> LFParams:
    return LFParams(args.p, args.r)


def _fmt(value) -> str:
    return "nan" if value is None else format(value, ".17g")


# ---------------------------------------------------------------------------
# subcommand implementations


def _simulate_chunk(task):
    p, r, t, seed_entropy, rep_indices = task
    params = LFParams(p, r)
    out = []
    for i in rep_indices:
        rng = np.random.default_rng(np.random.SeedSequence(seed_entropy, spawn_key=(i,)))
        out.append(simulate_cpp(params, t, rng).depths)
    return out


def _cmd_simulate(args):
    params = _params(args)
    params.require_supercritical()
    seed = _ensure_seed(args)
    tasks = list(range(args.reps))
    if args.threads > 1:
        chunks = [tasks[i :: args.threads] for i in range(args.threads)]
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(
                pool.map(
                    _simulate_chunk,
                    [(args.p, args.r, args.T, seed, chunk) for chunk in chunks],
                )
            )
        by_index = {}
        for chunk, depths_list in zip(chunks, results):
            for i, depths in zip(chunk, depths_list):
                by_index[i] = depths
        seqs = [DepthSeq(T=args.T, depths=by_index[i]) for i in tasks]
    else:
        depths_list = _simulate_chunk((args.p, args.r, args.T, seed, tasks))
        seqs = [DepthSeq(T=args.T, depths=d) for d in depths_list]
    write_depths_jsonl(args.out, seqs)
    print(f"wrote {len(seqs)} trees to {args.out}")
    return 0


def _cmd_sample(args):
    scheme, value = args.scheme
    if scheme == "full":
        raise _UsageError("sample needs bernoulli:y or uniform:k")
    if scheme == "uniform" and value is None:
        raise _UsageError("uniform sampling needs an explicit k (uniform:k)")
    seed = _ensure_seed(args)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    trees = read_depths_auto(getattr(args, "in"), fmt=args.format)
    out = []
    skipped = 0
    for index, seq in enumerate(trees):
        if scheme == "bernoulli":
            mask = bernoulli_mask(seq.n, value, rng)
            if mask.count == 0:
                skipped += 1
                continue
        else:
            if value > seq.n:
                raise LfcoalError(
                    f"tree {index} has {seq.n} tips, fewer than k={value}; "
                    "filter the input or lower k"
                )
            mask = uniform_mask(seq.n, value, rng)
        out.append(subsample_depths(seq, mask))
    write_depths_jsonl(args.out, out)
    message = f"wrote {len(out)} sampled trees to {args.out}"
    if skipped:
        message += f" ({skipped} trees had no tip selected and were dropped)"
    print(message)
    return 0


def _build_observation(args, trees) -> ObservationSet:
    scheme, value = args.scheme
    if scheme == "bernoulli":
        return ObservationSet(
            trees=trees,
            scheme="bernoulli",
            y=value,
            conditioned_on_count=not args.unconditioned,
        )
    if scheme == "uniform":
        return ObservationSet(trees=trees, scheme="uniform")
    return ObservationSet(
        trees=trees, scheme="full", conditioned_on_count=not args.unconditioned
    )


def _cmd_likelihood(args):
    params = _params(args)
    trees = read_depths_auto(getattr(args, "in"), fmt=args.format)
    scheme, value = args.scheme
    conditioned = not args.unconditioned
    rows = []
    for index, seq in enumerate(trees):
        if scheme == "full":
            ll = full_tree_loglik(params, seq, conditioned_on_n=conditioned)
        elif scheme == "bernoulli":
            ll = bernoulli_loglik(params, value, seq, conditioned_on_k=conditioned)
        else:
            ll = ksample_marginal_loglik(params, seq)
        rows.append({"index": index, "T": seq.T, "n_tips": seq.n, "loglik": ll})
    total = math.fsum(row["loglik"] for row in rows)
    if args.out:
        with atomic_write(args.out) as handle:
            handle.write(
                json.dumps(
                    {
                        "format": "lfcoal.likelihood",
                        "version": FORMAT_VERSION,
                        "p": params.p,
                        "r": params.r,
                        "scheme": scheme if value is None else f"{scheme}:{value}",
                        "conditioned": conditioned,
                    }
                )
                + "\n"
            )
            for row in rows:
                handle.write(json.dumps(row) + "\n")
    print(f"total loglik over {len(rows)} trees: {total:.12g}")
    return 0


def _cmd_fit(args):
    trees = read_depths_auto(getattr(args, "in"), fmt=args.format)
    obs = _build_observation(args, trees)
    result = run_fit(
        obs, grid_size=args.grid, max_iterations=args.max_iterations, tol=args.tol
    )
    body = {
        "format": "lfcoal.fit",
        "version": FORMAT_VERSION,
        "p_hat": result.p_hat,
        "r_hat": result.r_hat,
        "m_hat": result.r_hat / result.p_hat,
        "loglik_at_optimum": result.loglik_at_optimum,
        "converged": result.converged,
        "iterations": result.iterations,
        "boundary_flag": result.boundary_flag,
        "grid": {
            "p": result.grid_p,
            "r": result.grid_r,
            "loglik": result.grid_loglik,
        },
        "n_trees": obs.n_trees,
    }
    if args.out:
        with atomic_write(args.out) as handle:
            handle.write(json.dumps(body, indent=2) + "\n")
    print(
        f"p_hat={result.p_hat:.6f} r_hat={result.r_hat:.6f} "
        f"loglik={result.loglik_at_optimum:.6f} converged={result.converged}"
    )
    return 0


def _surface_chunk(task):
    trees_payload, scheme, y, conditioned, p_values, r_values = task
    trees = [DepthSeq(T=t, depths=tuple(d)) for t, d in trees_payload]
    obs = ObservationSet(
        trees=trees, scheme=scheme, y=y, conditioned_on_count=conditioned
    )
    rows = []
    for p in p_values:
        for r in r_values:
            if r <= p:
                rows.append((p, r, None))
            else:
                rows.append((p, r, total_loglik(LFParams(p, r), obs)))
    return rows


def _cmd_surface(args):
    trees = read_depths_auto(getattr(args, "in"), fmt=args.format)
    obs = _build_observation(args, trees)
    if args.threads > 1:
        ps = np.linspace(args.p_min, args.p_max, args.steps)
        rs = [float(r) for r in np.linspace(args.r_min, args.r_max, args.steps)]
        payload = [(seq.T, list(seq.depths)) for seq in obs.trees]
        scheme, value = args.scheme
        chunks = [
            (payload, scheme, value if scheme == "bernoulli" else None,
             not args.unconditioned, [float(p)], rs)
            for p in ps
        ]
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = [row for chunk in pool.map(_surface_chunk, chunks) for row in chunk]
    else:
        rows = loglik_surface(
            obs, (args.p_min, args.p_max), (args.r_min, args.r_max), args.steps
        )
    with atomic_write(args.out) as handle:
        handle.write("p,r,loglik\n")
        for p, r, ll in rows:
            handle.write(f"{_fmt(p)},{_fmt(r)},{_fmt(ll)}\n")
    print(f"wrote {len(rows)} surface rows to {args.out}")
    return 0


def _cmd_emit_dist(args):
    params = _params(args)
    params.require_supercritical()
    n = np.arange(1, args.max_n + 1)
    if args.y is not None:
        pmf = np.atleast_1d(thinned_pmf(params, args.y, n))
        tail = np.atleast_1d(thinned_tail(params, args.y, n))
    else:
        pmf = np.atleast_1d(coalescent_pmf(params, n))
        tail = np.atleast_1d(coalescent_tail(params, n))
    with atomic_write(args.out) as handle:
        handle.write("n,pmf,tail\n")
        for i, value in enumerate(n):
            handle.write(f"{value},{_fmt(float(pmf[i]))},{_fmt(float(tail[i]))}\n")
    print(f"wrote {args.max_n} rows to {args.out}")
    return 0


def _cmd_convert(args):
    trees = read_depths_auto(getattr(args, "in"), fmt=args.format)
    if args.to == "jsonl":
        write_depths_jsonl(args.out, trees)
    else:
        write_newick_file(args.out, trees)
    print(f"wrote {len(trees)} trees to {args.out} as {args.to}")
    return 0


def _cmd_validate(args):
    params = LFParams(args.p, args.r)
    if args.suite == "all":
        reports = run_all(params=params, seed=args.seed, fast=args.fast)
    else:
        reports = [run_suite(args.suite, params=params, seed=args.seed)]
    for report in reports:
        print(report.to_text())
    if args.out:
        with atomic_write(args.out) as handle:
            handle.write(
                json.dumps(
                    {
                        "format": "lfcoal.validate",
                        "version": FORMAT_VERSION,
                        "reports": [report.to_dict() for report in reports],
                    },
                    indent=2,
                )
                + "\n"
            )
    return 0 if all(report.passed for report in reports) else 2


# ---------------------------------------------------------------------------
# parser


def _add_io_arguments(parser, needs_out=True):
    parser.add_argument("--in", required=True, help="input tree file")
    parser.add_argument(
        "--format",
        choices=("jsonl", "newick"),
        default=None,
        help="input format (default: sniffed from the first byte)",
    )
    if needs_out:
        parser.add_argument("--out", required=True, help="output path")


def build_parser() -> _Parser:
    parser = _Parser(prog="lfcoal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw height-T genealogies")
    sim.add_argument("--p", type=_probability, required=True)
    sim.add_argument("--r", type=_rate, required=True)
    sim.add_argument("--T", type=int, required=True)
    sim.add_argument("--reps", type=int, default=1)
    sim.add_argument("--seed", type=_seed_type, default=None)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    samp = sub.add_parser("sample", help="subsample tips of existing genealogies")
    samp.add_argument("--scheme", type=_scheme, required=True,
                      help="bernoulli:y or uniform:k")
    samp.add_argument("--seed", type=_seed_type, default=None)
    _add_io_arguments(samp)
    samp.set_defaults(func=_cmd_sample)

    lik = sub.add_parser("likelihood", help="per-tree log-likelihood values")
    lik.add_argument("--p", type=_probability, required=True)
    lik.add_argument("--r", type=_rate, required=True)
    lik.add_argument("--scheme", type=_scheme, default=("full", None))
    lik.add_argument("--unconditioned", action="store_true",
                     help="do not condition on the observed tip count")
    lik.add_argument("--out", default=None)
    _add_io_arguments(lik, needs_out=False)
    lik.set_defaults(func=_cmd_likelihood)

    fit_p = sub.add_parser("fit", help="maximum-likelihood estimate of (p, r)")
    fit_p.add_argument("--scheme", type=_scheme, default=("full", None))
    fit_p.add_argument("--unconditioned", action="store_true")
    fit_p.add_argument("--grid", type=int, default=50)
    fit_p.add_argument("--max-iterations", type=int, default=2000)
    fit_p.add_argument("--tol", type=float, default=1e-7)
    fit_p.add_argument("--out", default=None)
    _add_io_arguments(fit_p, needs_out=False)
    fit_p.set_defaults(func=_cmd_fit)

    surf = sub.add_parser("surface", help="log-likelihood surface as CSV")
    surf.add_argument("--scheme", type=_scheme, default=("full", None))
    surf.add_argument("--unconditioned", action="store_true")
    surf.add_argument("--p-min", type=_probability, required=True)
    surf.add_argument("--p-max", type=_probability, required=True)
    surf.add_argument("--r-min", type=float, required=True)
    surf.add_argument("--r-max", type=float, required=True)
    surf.add_argument("--steps", type=int, required=True)
    surf.add_argument("--threads", type=int, default=1)
    _add_io_arguments(surf)
    surf.set_defaults(func=_cmd_surface)

    dist = sub.add_parser("emit-dist", help="tabulate the coalescent law as CSV")
    dist.add_argument("--p", type=_probability, required=True)
    dist.add_argument("--r", type=_rate, required=True)
    dist.add_argument("--y", type=_probability, default=None,
                      help="tabulate the Bernoulli(y)-thinned law instead")
    dist.add_argument("--max-n", type=int, default=20)
    dist.add_argument("--out", required=True)
    dist.set_defaults(func=_cmd_emit_dist)

    conv = sub.add_parser("convert", help="convert between Newick and JSON lines")
    conv.add_argument("--to", choices=("jsonl", "newick"), required=True)
    _add_io_arguments(conv)
    conv.set_defaults(func=_cmd_convert)

    val = sub.add_parser("validate", help="run oracle validation suites")
    val.add_argument("--suite", choices=SUITE_NAMES + ("all",), required=True)
    val.add_argument("--p", type=_probability, default=0.5)
    val.add_argument("--r", type=_rate, default=0.8)
    val.add_argument("--seed", type=_seed_type, default=None)
    val.add_argument("--fast", action="store_true",
                     help="shrink Monte-Carlo sizes for a quick smoke run")
    val.add_argument("--out", default=None, help="also write a JSON report")
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(
            "remedy: run 'lfcoal --help' or 'lfcoal <command> --help' for usage",
            file=sys.stderr,
        )
        return 1
    except (LfcoalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
