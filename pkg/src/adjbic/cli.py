"""Command line: ``adjbic {classify,score,evidence,toy,verify,experiment}``.

Every subcommand prints one JSON document on stdout.  ``--csv PATH`` writes a
table alongside (ladder rows use the columns N,ln_I,stderr).  Exit status is
0 on success, 2 on invalid input or integration failure, 3 when a
verification fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

import numpy as np

from .asymptotics import CASES, fit_law, parse_ladder, verify_case
from .classify import DEFAULT_TOL, classify_stats
from .errors import DomainError, IntegrationError, SingularityError, VerificationError
from .experiment import mf_vs_md_experiment
from .integrate import METHODS, TOY_METHODS, marginal_likelihood, toy_integral
from .mle import EmConfig
from .model import load_stats
from .score import score_stats

EXIT_OK, EXIT_DOMAIN, EXIT_VERIFY = 0, 2, 3
LADDER_COLUMNS = ("N", "ln_I", "stderr")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    p.add_argument("--csv", metavar="PATH", help="also write a CSV table")
    return p


def _build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="adjbic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="singularity class of statistics")
    p.add_argument("--stats", required=True, metavar="FILE")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--restarts", type=int, default=32)

    p = sub.add_parser("score", parents=[common], help="adjusted and standard BIC")
    p.add_argument("--stats", required=True, metavar="FILE")
    p.add_argument("-N", type=int, help="sample size (defaults to the file's N)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--restarts", type=int, default=32)

    p = sub.add_parser("evidence", parents=[common], help="estimate ln I[N, Y]")
    p.add_argument("--stats", required=True, metavar="FILE")
    p.add_argument("-N", type=float, help="sample size (defaults to the file's N)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--budget", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("toy", parents=[common], help="estimate ln J[N] of the toy integral")
    p.add_argument("-n", type=int, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("-N", type=float)
    group.add_argument("--ladder", metavar="A:B:K", help="fit the ln N slope over a ladder")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--method", choices=TOY_METHODS, default="quadrature")
    p.add_argument("--budget", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", parents=[common], help="check a coefficient law on a ladder")
    p.add_argument("--case", required=True, choices=CASES)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--ladder", required=True, metavar="A:B:K")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--budget", type=int)
    p.add_argument("--tol", type=float, help="tolerance on the fitted coefficient")
    p.add_argument("--stats", metavar="FILE", help="use these statistics instead of the canonical ones")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("experiment", parents=[common], help="M_F versus M_D selection")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-N", type=int, required=True)
    p.add_argument("--prior-p", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _ladder_rows(points):
    return [(float(p.N), float(p.ln_I), float(p.stderr)) for p in points]


def _default_json(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True, default=_default_json))


def _stats_and_N(path: str, N):
    y, file_N = load_stats(path)
    N = file_N if N is None else N
    if N is None:
        raise DomainError("sample size missing: pass -N or put N in the statistics file")
    return y, N


def _cmd_classify(args) -> int:
    y, _ = load_stats(args.stats)
    cls = classify_stats(y, args.tol, EmConfig(restarts=args.restarts, seed=args.seed))
    doc = cls.to_dict()
    _emit(doc)
    if args.csv:
        _write_csv(args.csv, ("label", "witness", "kl_gap", "tol"),
                   [(doc["label"], json.dumps(doc["witness"]), doc["kl_gap"], doc["tol"])])
    return EXIT_OK


def _cmd_score(args) -> int:
    y, N = _stats_and_N(args.stats, args.N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the warning is carried in the report
        report = score_stats(y, int(N), args.tol, EmConfig(restarts=args.restarts, seed=args.seed))
    doc = report.to_dict()
    _emit(doc)
    if args.csv:
        keys = sorted(doc)
        _write_csv(args.csv, keys, [[doc[k] for k in keys]])
    return EXIT_OK


def _cmd_evidence(args) -> int:
    y, N = _stats_and_N(args.stats, args.N)
    est = marginal_likelihood(y, float(N), args.method, args.budget, args.seed, args.workers)
    doc = {"N": float(N), **est.to_dict()}
    _emit(doc)
    if args.csv:
        _write_csv(args.csv, LADDER_COLUMNS, [(float(N), est.ln_I, est.stderr)])
    return EXIT_OK


def _cmd_toy(args) -> int:
    def run(N):
        return toy_integral(args.n, N, args.eps, args.method, args.budget, args.seed, args.workers)

    if args.ladder is None:
        est = run(args.N)
        rows = [(float(args.N), est.ln_I, est.stderr)]
        _emit({"n": args.n, "N": float(args.N), "eps": args.eps, **est.to_dict()})
    else:
        Ns = parse_ladder(args.ladder)
        ests = [run(float(N)) for N in Ns]
        rows = [(float(N), e.ln_I, e.stderr) for N, e in zip(Ns, ests)]
        fit = fit_law(rows, 0.0, "free")
        _emit({
            "n": args.n,
            "eps": args.eps,
            "method": args.method,
            "expected_slope": -args.n / 4,
            "fit": fit.to_dict(),
            "points": [dict(zip(LADDER_COLUMNS, r)) for r in rows],
        })
    if args.csv:
        _write_csv(args.csv, LADDER_COLUMNS, rows)
    return EXIT_OK


def _cmd_verify(args) -> int:
    y = load_stats(args.stats)[0] if args.stats else None
    report = verify_case(
        args.case, args.n, parse_ladder(args.ladder), args.method, args.budget,
        args.seed, args.tol, y, args.workers,
    )
    _emit(report.to_dict())
    if args.csv:
        _write_csv(args.csv, LADDER_COLUMNS, _ladder_rows(report.points))
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_experiment(args) -> int:
    report = mf_vs_md_experiment(args.n, args.N, args.prior_p, args.trials, args.seed, args.workers)
    print(report.to_json())
    if args.csv:
        cols = ("trial", "label", "md_score", "mf_standard", "mf_adjusted",
                "pick_standard", "pick_adjusted", "score_gap")
        _write_csv(args.csv, cols,
                   [[k] + [t[c] for c in cols[1:]] for k, t in enumerate(report.per_trial)])
    return EXIT_OK


COMMANDS = {
    "classify": _cmd_classify,
    "score": _cmd_score,
    "evidence": _cmd_evidence,
    "toy": _cmd_toy,
    "verify": _cmd_verify,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DomainError, IntegrationError, SingularityError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def entry() -> None:
    sys.exit(main())
