"""Command-line entry point.

Exit codes: 0 pass, 1 gate failure (or a failed check), 2 input or IO
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .causal import Dag, FactorizationSpec, factorization_consistent, is_acyclic, query_identifiable
from .convergence import convergence_report
from .draws import DrawsFormatError, Pushforward, SummaryStatistic, write_draws_csv
from .models import get_approximator, get_model, read_dataset_csv
from .report import DEFAULT_STATISTICS, InputError, RunConfig, _clean, build_report, emit
from .sbc import ecdf_diff_envelope, run_sbc, uniformity_chisq

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _print_json(obj):
    print(json.dumps(_clean(obj), sort_keys=True, indent=2))


def _input_error(problems):
    print(json.dumps({"error": "input", "problems": list(problems)}, indent=2), file=sys.stderr)
    return EXIT_INPUT


def cmd_run(args) -> int:
    config = RunConfig.load(args.config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = build_report(config)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    emit(report, args.out)
    print(f"overall: {report.overall}")
    if report.gate_failures:
        print("gate failures: " + ", ".join(report.gate_failures))
    return EXIT_FAIL if report.overall == "fail" else EXIT_PASS


def cmd_sbc(args) -> int:
    try:
        model = get_model(args.model, **dict(args.model_param))
        approx = get_approximator(args.approximator, **dict(args.approximator_param))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(str(exc).strip("'\"")) from None
    var = args.variable or model.parameter_names[0]
    if var not in model.parameter_names:
        raise InputError(f"{args.model} has no parameter {var!r}")
    result = run_sbc(model, approx, Pushforward.identity(var), args.M, args.L, thin=args.thin, seed=args.seed)
    stat, p = uniformity_chisq(result, args.bins)
    out = {"variable": var, "M": result.M, "L": result.L, "chisq": stat, "p_value": p, "n_skipped": result.n_skipped}
    env = ecdf_diff_envelope(result, seed=args.seed) if result.M >= 50 else None
    if env is not None:
        out["ecdf_violated"] = env.violated
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        result.to_csv(d / "ranks.csv")
        if env is not None:
            env.to_csv(d / "ecdf.csv")
    _print_json(out)
    failed = p <= args.alpha or (env is not None and env.violated)
    return EXIT_FAIL if failed else EXIT_PASS


def cmd_fit(args) -> int:
    try:
        model = get_model(args.model, **dict(args.model_param))
        approx = get_approximator(args.approximator, **dict(args.approximator_param))
        data = read_dataset_csv(args.data)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise InputError(str(exc).strip("'\"")) from None
    fit = approx.fit(model, data, seed=args.seed)
    rep = convergence_report(fit.draws, statistics=[SummaryStatistic.parse(t) for t in DEFAULT_STATISTICS])
    summary = {
        name: {"mean": float(np.mean(fit.draws.pooled(name))), "sd": float(np.std(fit.draws.pooled(name), ddof=1))}
        for name in fit.draws.variable_names
    }
    if args.out:
        write_draws_csv(fit.draws, args.out)
    _print_json({"model": model.id, "approximator": approx.name, "summary": summary, "convergence": rep.to_dicts()})
    return EXIT_FAIL if rep.has_flag("high_rhat") else EXIT_PASS


def cmd_causal(args) -> int:
    try:
        dag = Dag.read(args.dag)
        spec = FactorizationSpec.read(args.spec)
    except (ValueError, OSError) as exc:
        raise InputError(str(exc)) from None
    if not is_acyclic(dag):
        _print_json({"acyclic": False})
        return EXIT_FAIL
    try:
        consistent, violations = factorization_consistent(dag, spec)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = {"acyclic": True, "factorization_consistent": consistent, "violations": violations}
    ok = consistent
    if args.do:
        if not args.outcome:
            raise InputError("--do needs --outcome")
        try:
            ident = query_identifiable(dag, spec, args.do, args.outcome)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        out["query"] = {
            "identifiable": ident.identifiable,
            "adjustment_set": None if ident.adjustment_set is None else sorted(ident.adjustment_set),
            "required_conditionals_present": ident.required_conditionals_present,
        }
        ok = ident.identifiable is True and ident.required_conditionals_present
    _print_json(out)
    return EXIT_PASS if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured suites and write report.json")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    def model_args(p):
        p.add_argument("--model", required=True)
        p.add_argument("--model-param", action="append", type=_kv, default=[], metavar="KEY=VALUE")
        p.add_argument("--approximator-param", action="append", type=_kv, default=[], metavar="KEY=VALUE")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sbc", help="simulation-based calibration of an approximator")
    model_args(p)
    p.add_argument("--approximator", default="exact")
    p.add_argument("-M", type=int, default=200)
    p.add_argument("-L", type=int, default=99)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.001)
    p.add_argument("--variable")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sbc)

    p = sub.add_parser("fit", help="fit a model to a dataset and print convergence diagnostics")
    model_args(p)
    p.add_argument("--approximator", default="exact")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write the draws to this CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("causal", help="check a factorization against a DAG")
    p.add_argument("--dag", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--do")
    p.add_argument("--outcome")
    p.set_defaults(func=cmd_causal)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except DrawsFormatError as exc:
        return _input_error(exc.problems)
    except InputError as exc:
        return _input_error(exc.problems)
    except OSError as exc:
        return _input_error([str(exc)])
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(json.dumps({"error": "numerical", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
