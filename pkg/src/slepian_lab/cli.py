"""Command-line experiment runner.

Exit status: 0 when every gated check passes, 2 when one fails, 1 on usage
or I/O errors.  ``SLEPIAN_LAB_THREADS`` overrides ``--threads``; outputs do
not depend on the thread count.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import densities, localtime, rwbridge, slepian, stats
from .paths import SeedSpec, steps_per_unit

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
# reference values of P(max|bridge|/sqrt(n) <= 1.3) for first level bridges
# of length n; rw-max-cdf gates on them at x = 1.3
REFERENCE_MAX_CDF = {100: 0.9361, 500: 0.9193, 1000: 0.9129, 2000: 0.9117, 5000: 0.9088, 10000: 0.9080}
REFERENCE_TOL = 0.01


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def json_text(payload: dict) -> str:
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.floating, float)):
            v = float(v)
            return None if math.isnan(v) or math.isinf(v) else v
        if isinstance(v, np.integer):
            return int(v)
        if isinstance(v, np.bool_):
            return bool(v)
        return v

    return json.dumps({"schema": SCHEMA, **clean(payload)}, indent=2, sort_keys=True) + "\n"


def emit(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dt(value: str) -> float:
    dt = float(value)
    if not 0 < dt < 1:
        raise argparse.ArgumentTypeError("dt must lie in (0, 1)")
    try:
        return 1.0 / steps_per_unit(dt)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(value: str) -> int:
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _epsilon(value: str):
    return "auto" if value == "auto" else float(value)


def _status(reports, extra_ok=True) -> int:
    return EXIT_OK if extra_ok and all(r.passed for r in reports) else EXIT_FAIL


# --- subcommands ---


def cmd_rw_exact(args) -> int:
    exact = None if args.arithmetic == "auto" else args.arithmetic == "exact"
    law = rwbridge.exact_bridge_law(args.n, exact=exact)
    total = law.total()
    sym = all(law.probabilities[p] == law.probabilities[p.translate(str.maketrans("+-", "-+"))]
              for p in law.probabilities)
    sums_ok = total == 1 if law.exact else abs(total - 1) < 1e-9
    if args.format == "csv":
        emit(law.to_csv(), args.out)
    else:
        ratio = rwbridge.max_min_ratio(law)
        emit(json_text({
            "n": args.n, "exact": law.exact, "support": len(law),
            "max_min_ratio": float(ratio),
            "max_min_ratio_exact": f"{ratio.numerator}/{ratio.denominator}" if law.exact else None,
            "sums_to_one": bool(sums_ok), "symmetric": bool(sym), "pass": bool(sums_ok and sym),
        }), args.out)
    return EXIT_OK if sums_ok and sym else EXIT_FAIL


def cmd_rw_max_cdf(args) -> int:
    est = rwbridge.scaled_max_cdf_at(SeedSpec(args.seed), args.n, args.x, args.replicates, args.threads)
    ks = densities.ks_cdf(args.x)
    target = REFERENCE_MAX_CDF.get(args.n) if args.x == 1.3 else None
    ok = target is None or abs(est.estimate - target) <= REFERENCE_TOL
    emit(json_text({
        "n": args.n, "x": args.x, "replicates": args.replicates, "seed": args.seed,
        "estimate": est.estimate, "stderr": est.stderr, "ks_cdf": ks,
        "gap": ks - est.estimate, "target": target, "pass": ok,
    }), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def first_passage_histogram(f, bins):
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(f[f <= 1], bins=edges)
    probs = np.diff(densities.first_passage_cdf(edges))
    return edges, counts, probs


def first_passage_gof(counts, probs, alpha):
    """Chi-square of the F histogram on (0, 1) given F <= 1."""
    return stats.chi_square_gof(counts, counts.sum() * probs / probs.sum(), alpha=alpha)


def cmd_slepian_first_passage(args) -> int:
    f = slepian.sample_first_passage(SeedSpec(args.seed), args.replicates, args.dt,
                                     detection=args.detection, threads=args.threads)
    edges, counts, probs = first_passage_histogram(f, args.bins)
    n = f.size
    rep = first_passage_gof(counts, probs, args.alpha)
    p_hat, se = stats.binomial_estimate(int(np.sum(f <= 1)), n)
    target = 0.5 + 1 / math.pi
    rate_ok = abs(p_hat - target) <= 0.01
    if args.format == "csv":
        rows = [(edges[i], edges[i + 1], int(counts[i]), n * probs[i]) for i in range(args.bins)]
        emit(csv_text(["bin_lo", "bin_hi", "count", "expected"], rows), args.out)
    else:
        emit(json_text({
            "dt": args.dt, "replicates": n, "seed": args.seed,
            "p_f_le_1": p_hat, "stderr": se, "target": target,
            "tests": [rep.to_dict()], "pass": rep.passed and rate_ok,
        }), args.out)
    return _status([rep], rate_ok)


def quadruple_gof(q, bins, alpha):
    """Chi-square of accepted (F, G) against the (x, y) marginal of the density."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    mass = densities.fg_cell_masses(edges)
    mass /= mass.sum()
    counts, _, _ = np.histogram2d(q["f"], q["g"], bins=[edges, edges])
    upper = np.triu(np.ones((bins, bins), dtype=bool))
    return stats.chi_square_gof(counts[upper], q["f"].size * mass[upper], alpha=alpha), counts, mass


def cmd_quadruple_gof(args) -> int:
    q = slepian.sample_quadruples(SeedSpec(args.seed), args.replicates, args.dt,
                                  detection=args.detection, threads=args.threads)
    rep, counts, mass = quadruple_gof(q, args.bins, args.alpha)
    if args.format == "csv":
        rows = [(i, j, int(counts[i, j]), q["f"].size * mass[i, j])
                for i in range(args.bins) for j in range(i, args.bins)]
        emit(csv_text(["f_bin", "g_bin", "count", "expected"], rows), args.out)
    else:
        emit(json_text({
            "dt": args.dt, "accepted": int(q["f"].size), "trials": q["trials"],
            "acceptance_rate": q["accepted_in_trials"] / q["trials"],
            "target_rate": 0.5 + 1 / math.pi, "seed": args.seed,
            "tests": [rep.to_dict()], "pass": rep.passed,
        }), args.out)
    return _status([rep])


def cmd_shepp(args) -> int:
    start = time.perf_counter()
    if args.t == 1:
        value = densities.shepp_survival_t1()
    else:
        value = densities.shepp_survival_integer(
            args.t, densities.QuadratureSpec(args.method, args.points))
    target = 0.5 - 1 / math.pi if args.t == 1 else None
    ok = target is None or abs(value - target) <= 1e-6
    payload = {"t": args.t, "value": value, "target": target, "pass": ok}
    if args.timing:
        payload["seconds"] = time.perf_counter() - start
    emit(json_text(payload), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def embedding_reports(r, alpha):
    ok = ~np.isnan(r["t_alloc"])
    u = r["u"]
    reports = []
    for target in (0.25, 0.5, 0.75):
        col = int(np.argmin(np.abs(u - target)))
        x = r["at_u"][ok, col]
        if x.size >= 20:
            rep = stats.ks_one_sample(x, stats.normal_cdf(target * (1 - target)), alpha)
            reports.append(rep)
    return reports


def cmd_embed(args) -> int:
    eps = localtime.default_epsilon(args.dt) if args.epsilon == "auto" else args.epsilon
    r = localtime.sample_embeddings(SeedSpec(args.seed), args.replicates, args.dt, eps,
                                    args.cap, threads=args.threads)
    reports = embedding_reports(r, args.alpha)
    if args.format == "csv":
        names = [f"w{k:02d}" for k in range(r["u"].size)]
        rows = [(r["t_alloc"][i], r["endpoint"][i], *r["at_u"][i]) for i in range(args.replicates)]
        emit(csv_text(["t_alloc", "endpoint", *names], rows), args.out)
    else:
        ok = ~np.isnan(r["t_alloc"])
        i25, i75 = (int(np.argmin(np.abs(r["u"] - v))) for v in (0.25, 0.75))
        emit(json_text({
            "dt": args.dt, "epsilon": eps, "replicates": args.replicates, "cap": args.cap,
            "found_rate": float(ok.mean()), "degenerate_rate": float(r["degenerate"].mean()),
            "median_abs_endpoint": float(np.median(np.abs(r["endpoint"][ok]))) if ok.any() else None,
            "cov_025_075": stats.empirical_cov(r["at_u"][ok, i25], r["at_u"][ok, i75]) if ok.sum() > 1 else None,
            "tests": [rep.to_dict() for rep in reports],
            "pass": all(rep.passed for rep in reports),
        }), args.out)
    return _status(reports)


def cmd_report(args) -> int:
    entries = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        entries.append({"file": path, "pass": bool(doc.get("pass", False)),
                        "tests": doc.get("tests", [])})
    ok = all(e["pass"] for e in entries)
    emit(json_text({"inputs": entries, "pass": ok}), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slepian-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, replicates, fmt_default="json", mc=True):
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        if mc:
            sp.add_argument("--seed", type=int, default=20240101)
            sp.add_argument("--replicates", type=_positive_int, default=replicates)
            sp.add_argument("--threads", type=_positive_int, default=1)
            sp.add_argument("--alpha", type=float, default=stats.DEFAULT_ALPHA)

    sp = sub.add_parser("rw-exact", help="exact first level bridge law (CSV)")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--arithmetic", choices=("auto", "exact", "float"), default="auto")
    common(sp, 0, "csv", mc=False)
    sp.set_defaults(func=cmd_rw_exact)

    sp = sub.add_parser("rw-max-cdf", help="CDF of the scaled bridge maximum (~20 s at n=1e4)")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--x", type=float, default=1.3)
    common(sp, 100_000)
    sp.set_defaults(func=cmd_rw_max_cdf)

    sp = sub.add_parser("slepian-first-passage", help="law of F on the unit interval (~15 s)")
    sp.add_argument("--dt", type=_dt, default=2.0**-10)
    sp.add_argument("--bins", type=_positive_int, default=32)
    sp.add_argument("--detection", choices=("bridge", "linear"), default="bridge")
    common(sp, 100_000)
    sp.set_defaults(func=cmd_slepian_first_passage)

    sp = sub.add_parser("quadruple-gof", help="(F, G) histogram against the joint density (~20 s)")
    sp.add_argument("--dt", type=_dt, default=2.0**-10)
    sp.add_argument("--bins", type=_positive_int, default=10)
    sp.add_argument("--detection", choices=("bridge", "linear"), default="bridge")
    common(sp, 100_000)
    sp.set_defaults(func=cmd_quadruple_gof)

    sp = sub.add_parser("shepp", help="P(F > t) from the determinant formula (t <= 3)")
    sp.add_argument("--t", type=int, choices=(1, 2, 3), default=1)
    sp.add_argument("--method", choices=("tensor", "qmc"), default="tensor")
    sp.add_argument("--points", type=int, default=40)
    sp.add_argument("--timing", action="store_true", help="include wall time (not reproducible)")
    common(sp, 0, mc=False)
    sp.set_defaults(func=cmd_shepp)

    sp = sub.add_parser("embed", help="bridge embedding at the allocation time (~3 min at 1e5)")
    sp.add_argument("--dt", type=_dt, default=2.0**-12)
    sp.add_argument("--epsilon", type=_epsilon, default="auto")
    sp.add_argument("--cap", type=int, default=localtime.DEFAULT_CAP)
    common(sp, 1000, "csv")
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("report", help="aggregate JSON outputs into one summary")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, NotImplementedError) as exc:
        print(f"slepian-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"slepian-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
