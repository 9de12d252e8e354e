"""Command-line workflow: test for clustering first, then estimate its range.

Exit codes: 0 success, 1 analysis or input error, 2 usage error,
3 range estimation refused for lack of clustering evidence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import THREADS_ENV, resolve_threads
from .bootstrap import METHODS, central_envelope, run_bootstrap
from .core import DistanceBandSet, RelatednessRule, RngPolicy
from .errors import TauStatError, TauStatWarning, TooFewReplicates, WorkflowGateError
from .intervals import areal_ratio, calibrate_window, estimate_endpoint, summarise_crossings
from .io import convert_hagelloch, file_sha256, ingest_csv, write_json, write_table
from .nulltest import extreme_rank_envelope, null_matrix
from .pairwise import band_counts, build_pair_table
from .tau import tau_odds

EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_REFUSED = 3


class UsageError(Exception):
    """Invalid or missing command-line options."""


def _bands_from_arg(choice):
    if choice == "overlapping":
        return DistanceBandSet.overlapping()
    if choice == "non-overlapping":
        return DistanceBandSet.non_overlapping()
    rows = []
    with open(choice, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("d_low"):
                continue
            a, b = line.split(",")[:2]
            rows.append((float(a), float(b)))
    return DistanceBandSet(rows)


# analysis fields that may be restored from a previous result's config echo
_ECHO_FIELDS = {
    "t_lower": ("relatedness", "t_lower"),
    "t_upper": ("relatedness", "t_upper"),
    "seed": ("seed",),
    "n_sims": ("n_sims",),
    "alpha": ("alpha",),
    "n_boot": ("n_boot",),
    "method": ("method",),
    "ci": ("ci_method",),
    "coverage": ("coverage",),
}


def _apply_config(args):
    if not getattr(args, "config", None):
        return
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    cfg = doc.get("config", doc)
    for name, path in _ECHO_FIELDS.items():
        if not hasattr(args, name) or getattr(args, name) is not None:
            continue
        node = cfg
        for key in path:
            node = node.get(key) if isinstance(node, dict) else None
        if node is not None:
            setattr(args, name, node)
    rel = cfg.get("relatedness", {})
    if args.relatedness is None and "directional" in rel:
        args.relatedness = "directional" if rel["directional"] else "symmetric"
    if args.bands is None and "bands" in cfg:
        args.bands = "__echo__"
        args._echo_bands = cfg["bands"]["bands"]
        args._echo_bands_kind = cfg["bands"]["kind"]


def _common(args):
    _apply_config(args)
    missing = [f"--{n.replace('_', '-')}" for n in ("t_lower", "t_upper", "relatedness") if getattr(args, n) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")
    if args.bands is None:
        args.bands = "overlapping"
    if args.seed is None:
        args.seed = 0
    if args.bands == "__echo__":
        bands = DistanceBandSet([tuple(b) for b in args._echo_bands])
        kind = args._echo_bands_kind
    else:
        bands = _bands_from_arg(args.bands)
        kind = args.bands if args.bands in ("overlapping", "non-overlapping") else "file"
    rule = RelatednessRule(float(args.t_lower), float(args.t_upper), args.relatedness == "directional")
    cs = ingest_csv(args.data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "data": {"path": str(args.data), "sha256": file_sha256(args.data), "n": cs.n},
        "relatedness": rule.to_dict(),
        "bands": {"kind": kind, "bands": bands.to_list()},
        "seed": int(args.seed),
    }
    return cs, rule, bands, out, config


def _document(command, config, results, notes=()):
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "results": results,
        "warnings": list(notes),
    }


def _capture_warnings():
    ctx = warnings.catch_warnings(record=True)
    caught = ctx.__enter__()
    warnings.simplefilter("always")
    return ctx, caught


def _report(caught):
    msgs = []
    for w in caught:
        if issubclass(w.category, TauStatWarning):
            msgs.append(f"{w.category.__name__}: {w.message}")
    for m in msgs:
        print(f"warning: {m}", file=sys.stderr)
    return msgs


def cmd_envelope_test(args):
    cs, rule, bands, out, config = _common(args)
    n_sims = int(args.n_sims if args.n_sims is not None else 2500)
    alpha = float(args.alpha if args.alpha is not None else 0.05)
    config.update({"n_sims": n_sims, "alpha": alpha})
    ctx, caught = _capture_warnings()
    try:
        pt = build_pair_table(cs, rule)
        observed = tau_odds(band_counts(pt, bands), bands, rule)
        sims = null_matrix(pt, bands, cs.onset, n_sims, RngPolicy(int(args.seed)), args.threads)
        res = extreme_rank_envelope(observed, sims, alpha)
    finally:
        ctx.__exit__(None, None, None)
    notes = _report(caught)
    results = {
        "p_interval": list(res.p_interval),
        "erl_p_value": res.erl_p,
        "critical_rank": res.critical_rank,
        "observed_extreme_rank": int(res.extreme_ranks[0]),
        "clustering_detected": res.clustering,
        "inhibition_detected": res.inhibition,
        "exceedance": [r.to_dict() for r in res.exceedance],
        "dropped_bands": res.dropped_bands,
        "envelope": {
            "midpoint": bands.midpoints,
            "observed": observed.values,
            "lower": res.lower,
            "upper": res.upper,
            "median": res.median,
        },
    }
    write_json(_document("envelope-test", config, results, notes), out / "envelope_test.json")
    write_table(
        out / "envelope_plot.csv",
        ["midpoint", "d_low", "d_high", "observed", "lower", "upper", "median"],
        zip(bands.midpoints, bands.lows, bands.highs, observed.values, res.lower, res.upper, res.median),
    )
    if args.svg:
        from .plotting import envelope_figure

        envelope_figure(res, out / "envelope_test.svg")
    lo, hi = res.p_interval
    print(f"p-value interval [{lo:.4g}, {hi:.4g}]; regions: " + (", ".join(
        f"{r.kind} {r.d_from:g}-{r.d_to:g} m" for r in res.exceedance) or "none"))
    return 0


def _check_evidence(args, config):
    if args.allow_unverified_clustering:
        return "overridden"
    if not args.evidence:
        raise WorkflowGateError(
            "range estimation needs evidence of clustering: pass --evidence <envelope_test.json> "
            "from envelope-test, or --allow-unverified-clustering"
        )
    doc = json.loads(Path(args.evidence).read_text(encoding="utf-8"))
    if doc.get("command") != "envelope-test":
        raise WorkflowGateError(f"{args.evidence} is not an envelope-test result")
    ecfg = doc["config"]
    if ecfg["data"]["sha256"] != config["data"]["sha256"]:
        raise WorkflowGateError("evidence was computed on different data")
    if ecfg["relatedness"] != config["relatedness"]:
        raise WorkflowGateError("evidence used a different relatedness window")
    if not doc["results"]["clustering_detected"]:
        raise WorkflowGateError("the envelope test found no region above the null envelope")
    return "verified"


def _envelope(run, coverage, notes):
    """Central bootstrap envelope, or all-NaN bounds with a note when a band has no usable values."""
    try:
        return central_envelope(run, coverage)
    except TooFewReplicates as e:
        notes.append(f"no central envelope: {e}")
        print(f"warning: no central envelope: {e}", file=sys.stderr)
        nan = np.full(len(run.bands), np.nan)
        return nan, nan.copy()


def cmd_estimate_range(args):
    cs, rule, bands, out, config = _common(args)
    method = (args.method or "mmpsb").lower()
    if method == "mpsb" and not args.i_understand_not_recommended:
        raise UsageError("--method mpsb requires --i-understand-not-recommended")
    N = int(args.n_boot if args.n_boot is not None else 2500)
    ci_method = args.ci or "bca"
    coverage = float(args.coverage if args.coverage is not None else 0.95)
    config.update({"method": method, "n_boot": N, "ci_method": ci_method, "coverage": coverage,
                   "nonfinite": args.nonfinite, "reference_range": args.reference_range})
    gate = _check_evidence(args, config)
    config["workflow_gate"] = gate
    ctx, caught = _capture_warnings()
    try:
        pt = build_pair_table(cs, rule)
        curve = tau_odds(band_counts(pt, bands), bands, rule)
        d_hat = estimate_endpoint(curve)
        run = run_bootstrap(cs, rule, bands, method, N, RngPolicy(int(args.seed)), threads=args.threads,
                            nonfinite=args.nonfinite, pair_table=pt)
        est = summarise_crossings(d_hat, run, ci_method, coverage)
    finally:
        ctx.__exit__(None, None, None)
    notes = _report(caught)
    lower, upper = _envelope(run, coverage, notes)
    areal = None
    if args.reference_range is not None and d_hat is not None:
        areal = {"reference_range": args.reference_range, "d_hat": d_hat,
                 "radial_ratio": d_hat / args.reference_range,
                 "area_ratio": areal_ratio(d_hat, args.reference_range)}
    results = {
        "d_hat": d_hat,
        "ci": {"low": est.ci.low, "high": est.ci.high, "method": est.ci.method,
               "coverage": est.ci.coverage, "fallback_to_percentile": est.ci.fallback},
        "proportion_used": est.proportion_used,
        "validity": {"all_replicates_used": est.proportion_used == 1.0,
                     "bimodal_crossing_sample": est.bimodality["bimodal"]},
        "crossing_counts": est.counts,
        "skew": est.skew,
        "bimodality": est.bimodality,
        "retention": {"mean_distinct_cases": float(run.distinct.mean()),
                      "mean_pair_retention": float(run.retention.mean())},
        "areal_ratio": areal,
        "central_envelope": {"midpoint": bands.midpoints, "tau": curve.values, "lower": lower, "upper": upper},
    }
    write_json(_document("estimate-range", config, results, notes), out / "estimate_range.json")
    write_table(out / "crossings.csv", ["replicate_crossing", "proportion_used"],
                ((v, est.proportion_used) for v in est.crossing_sample))
    edges = np.arange(math.floor(est.crossing_sample.min()), math.ceil(est.crossing_sample.max()) + 2, 2.0)
    counts, edges = np.histogram(est.crossing_sample, bins=edges)
    write_table(out / "crossing_histogram.csv", ["bin_low", "bin_high", "count"], zip(edges[:-1], edges[1:], counts))
    write_table(out / "range_plot.csv", ["midpoint", "tau", "lower", "upper"],
                zip(bands.midpoints, curve.values, lower, upper))
    if args.svg:
        from .plotting import range_figure

        range_figure(curve, lower, upper, est, out / "estimate_range.svg")
    d_txt = "none" if d_hat is None else f"{d_hat:.1f} m"
    print(f"D_hat = {d_txt}; {est.ci.coverage:.0%} {est.ci.method} CI ({est.ci.low:.1f}, {est.ci.high:.1f}); "
          f"{est.proportion_used:.1%} of replicates used")
    return 0


def cmd_bootstrap(args):
    cs, rule, bands, out, config = _common(args)
    method = (args.method or "mmpsb").lower()
    if method == "mpsb" and not args.i_understand_not_recommended:
        raise UsageError("--method mpsb requires --i-understand-not-recommended")
    N = int(args.n_boot if args.n_boot is not None else 2500)
    coverage = float(args.coverage if args.coverage is not None else 0.95)
    config.update({"method": method, "n_boot": N, "coverage": coverage, "nonfinite": args.nonfinite})
    ctx, caught = _capture_warnings()
    try:
        run = run_bootstrap(cs, rule, bands, method, N, RngPolicy(int(args.seed)), threads=args.threads,
                            nonfinite=args.nonfinite)
    finally:
        ctx.__exit__(None, None, None)
    notes = _report(caught)
    lower, upper = _envelope(run, coverage, notes)
    results = {
        "mean_distinct_cases": float(run.distinct.mean()),
        "mean_pair_retention": float(run.retention.mean()),
        "failed_fraction": run.failed_fraction,
        "finite_fraction": run.finite_fraction,
        "central_envelope": {"midpoint": bands.midpoints, "lower": lower, "upper": upper},
    }
    write_json(_document("bootstrap", config, results, notes), out / "bootstrap_summary.json")
    header = ["replicate", "distinct_cases"] + [f"band_{k}" for k in range(len(bands))]
    write_table(out / "bootstrap_curves.csv", header,
                ([k, int(run.distinct[k]), *run.values[k]] for k in range(run.N)))
    print(f"{run.N} {method.upper()} replicates; mean retention {run.retention.mean():.1%}")
    return 0


def cmd_plot(args):
    cs = ingest_csv(args.data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "epicurve":
        days = np.arange(math.floor(cs.onset.min()), math.floor(cs.onset.max()) + 1)
        counts = np.array([np.count_nonzero(np.floor(cs.onset) == d) for d in days])
        write_table(out / "epicurve.csv", ["day", "cases"], zip(days, counts))
        if args.svg:
            from .plotting import epicurve_figure

            epicurve_figure(days, counts, out / "epicurve.svg")
        print(f"{counts.sum()} cases over {len(days)} days")
    else:
        gen = RngPolicy(int(args.seed)).generator("jitter", 0)
        jx = gen.uniform(-args.jitter, args.jitter, cs.n)
        jy = gen.uniform(-args.jitter, args.jitter, cs.n)
        write_table(out / "spacetime.csv", ["id", "x", "y", "onset", "x_jittered", "y_jittered"],
                    zip(cs.ids, cs.x, cs.y, cs.onset, cs.x + jx, cs.y + jy))
        if args.svg:
            from .plotting import spacetime_figure

            spacetime_figure(cs.x + jx, cs.y + jy, cs.onset, out / "spacetime.svg")
        print(f"{cs.n} cases jittered by up to {args.jitter:g} m")
    return 0


def cmd_oracle_check(args):
    from .oracle import oracle_band_counts, oracle_tau
    from .synthetic import random_case_set

    gen = np.random.default_rng(args.seed)
    bad = 0
    for k in range(args.instances):
        n = int(gen.integers(2, args.max_n + 1))
        cs = random_case_set(gen, n, lattice=bool(k % 2))
        rule = RelatednessRule(float(gen.integers(0, 4)), float(gen.integers(4, 12)), bool(gen.integers(2)))
        edges = np.unique(gen.integers(0, 120, 6).astype(float))
        if len(edges) < 2:
            continue
        bands = DistanceBandSet(list(zip(edges[:-1], edges[1:])))
        counts = band_counts(build_pair_table(cs, rule), bands)
        rel, unrel, tr, tu = oracle_band_counts(cs, rule, bands)
        same = list(counts.related) == rel and list(counts.unrelated) == unrel
        if same and tr and tu:
            fast = tau_odds(counts, bands).values
            slow = np.array(oracle_tau(cs, rule, bands))
            same = np.allclose(fast, slow, rtol=1e-12, atol=0, equal_nan=True)
        bad += not same
    print(f"{args.instances - bad}/{args.instances} instances agree with the reference oracle")
    return 0 if bad == 0 else EXIT_ERROR


def cmd_calibrate(args):
    cs = ingest_csv(args.data)
    bands = _bands_from_arg(args.bands or "overlapping")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = calibrate_window(cs, bands, args.target, t_max=args.t_max)
    write_table(out / "calibration.csv", ["t_lower", "t_upper", "directional", "d_hat", "abs_error"],
                ((r.t_lower, r.t_upper, r.directional, d, abs(d - args.target)) for r, d in rows))
    for r, d in rows[:10]:
        mode = "directional" if r.directional else "symmetric"
        print(f"[{r.t_lower:g}, {r.t_upper:g}] {mode}: D_hat = {d:.2f} m")
    return 0


def cmd_convert_hagelloch(args):
    cs = convert_hagelloch(args.source, args.dest, onset_column=args.onset_column)
    print(f"wrote {cs.n} cases to {args.dest}")
    return 0


def _analysis_parser(sub, name, help_):
    p = sub.add_parser(name, help=help_)
    p.add_argument("data", help="case CSV with columns id,x,y,onset")
    p.add_argument("--t-lower", type=float, help="relatedness window lower bound T1 (days)")
    p.add_argument("--t-upper", type=float, help="relatedness window upper bound T2 (days)")
    p.add_argument("--relatedness", choices=["directional", "symmetric"],
                   help="directional: T1 <= t_j - t_i <= T2; symmetric: T1 <= |t_j - t_i| <= T2")
    p.add_argument("--bands", help="overlapping, non-overlapping, or a CSV of d_low,d_high rows")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--config", help="reuse the config echo of a previous result document")
    p.add_argument("--svg", action="store_true", help="also render an SVG figure (needs matplotlib)")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="taustat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = _analysis_parser(sub, "envelope-test", "global envelope test of no clustering")
    p.add_argument("--n-sims", type=int, help="time-mark permutations (default 2500)")
    p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    p.set_defaults(func=cmd_envelope_test)

    for name, func, help_ in (
        ("estimate-range", cmd_estimate_range, "clustering endpoint and bootstrap CI"),
        ("bootstrap", cmd_bootstrap, "bootstrap tau curves and central envelope"),
    ):
        p = _analysis_parser(sub, name, help_)
        p.add_argument("--method", choices=METHODS, help="bootstrap scheme (default mmpsb)")
        p.add_argument("--i-understand-not-recommended", action="store_true", help="permit --method mpsb")
        p.add_argument("--n-boot", type=int, help="bootstrap replicates N (default 2500)")
        p.add_argument("--coverage", type=float, help="interval coverage (default 0.95)")
        p.add_argument("--nonfinite", choices=["propagate", "drop"], default="propagate",
                       help="MPSB only: keep or drop infinite/undefined local terms")
        if name == "estimate-range":
            p.add_argument("--ci", choices=["bca", "percentile"], help="interval type (default bca)")
            p.add_argument("--evidence", help="envelope-test result showing clustering")
            p.add_argument("--allow-unverified-clustering", action="store_true",
                           help="skip the test-before-estimate workflow gate")
            p.add_argument("--reference-range", type=float, help="earlier range estimate for the areal ratio report")
        p.set_defaults(func=func)

    p = sub.add_parser("plot", help="epidemic curve or space-time scatter")
    p.add_argument("kind", choices=["epicurve", "spacetime"])
    p.add_argument("data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=5.0, help="uniform jitter half-width in metres")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("oracle-check", help="compare fast counting with the brute-force oracle")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--max-n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("calibrate", help="scan relatedness windows for a target endpoint")
    p.add_argument("data")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--t-max", type=int, default=21)
    p.add_argument("--bands")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("convert-hagelloch", help="convert an R export of hagelloch.df to the case CSV")
    p.add_argument("source")
    p.add_argument("dest")
    p.add_argument("--onset-column", default="tPRO")
    p.set_defaults(func=cmd_convert_hagelloch)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None) is not None:
        resolve_threads(args.threads)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"taustat: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except WorkflowGateError as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except (TauStatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
