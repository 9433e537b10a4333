"""Command-line front end.

Exit codes: 0 ok, 2 usage or parse error, 3 cycle not permissible,
4 non-convergent run, 5 sampler comparison failed.
"""

import argparse
import itertools
import json
import os
import sys

import numpy as np

from . import __version__
from .cycles import classify, enumerate_permissible, is_permissible
from .discrete import IcrConfig, Verdict, compatibility_check, icr_run
from .errors import ICRError, InconsistentMargins, NotAPermutation, NotPositiveDefinite, ScopeMismatch
from .gaussian import (
    GaussianIcrConfig,
    assemble_trivariate,
    distribution_to_dict,
    format_matrix,
    gaussian_compatibility_check,
    gaussian_icr_run,
)
from .model import DiscreteDistribution, GaussianDistribution, varset
from .modelio import ModelFormatError, load_model
from .sampler import ChainConfig, compare, run_chain, write_batches_csv, write_batches_json

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NOT_PERMISSIBLE = 3
EXIT_NONCONVERGENT = 4
EXIT_COMPARISON = 5


class CliError(Exception):
    def __init__(self, message, code=EXIT_PARSE):
        super().__init__(message)
        self.code = code


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _nonnegative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be non-negative")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _cycle_arg(text):
    try:
        return [int(t) - 1 for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"cycle {text!r} must be comma-separated conditional indices, e.g. 2,1,3"
        ) from None


def _load(path):
    try:
        return load_model(path)
    except ModelFormatError as exc:
        raise CliError(f"cannot read model: {exc}") from None


def _resolve_cycle(model, order, strict):
    if order is None:
        cycles = enumerate_permissible(model, strict=strict)
        if not cycles:
            raise CliError("model has no permissible updating cycle", EXIT_NOT_PERMISSIBLE)
        return cycles[0]
    try:
        cycle = is_permissible(model, order, strict=strict)
    except NotAPermutation as exc:
        raise CliError(str(exc)) from None
    if not cycle.permissible:
        lines = [f"updating cycle {cycle.label()} is not permissible:"]
        for pos, reason in cycle.violations:
            where = "overall" if pos is None else f"step {pos + 1}"
            lines.append(f"  {where}: {reason}")
        raise CliError("\n".join(lines), EXIT_NOT_PERMISSIBLE)
    return cycle


def _write_json(path, payload):
    text = json.dumps({"version": __version__, **payload}, indent=2)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _print_discrete(dist, model, out):
    names = model.names(dist.scope)
    for idx in np.ndindex(dist.shape):
        state = " ".join(f"{n}={v}" for n, v in zip(names, idx))
        out.write(f"    {state}  {dist.table[idx]:.12g}\n")


def _print_gaussian(dist, model, out):
    names = model.names(dist.scope)
    if np.any(dist.mean != 0):
        out.write("    mean: " + "  ".join(f"{m:.10g}" for m in dist.mean) + "\n")
    for line in format_matrix(dist.covariance, names).splitlines():
        out.write("    " + line + "\n")


def cmd_cycles(args, out):
    model = _load(args.model)
    flags = classify(model)
    out.write("conditionals:\n")
    for i, flag in enumerate(flags):
        out.write(f"  {i + 1}: {model.describe(i)}  [{flag}]\n")
    permissible, rejected = [], []
    for rest in itertools.permutations(range(1, model.L)):
        cycle = is_permissible(model, (0,) + rest, strict=args.strict)
        (permissible if cycle.permissible else rejected).append(cycle)
    out.write(f"permissible cycles ({len(permissible)}):\n")
    for cycle in permissible:
        order = " -> ".join(model.describe(j) for j in cycle.order)
        out.write(f"  {cycle.label()}  {order}\n")
    if rejected:
        out.write(f"rejected cycles ({len(rejected)}):\n")
        for cycle in rejected:
            reasons = "; ".join(
                ("overall" if p is None else f"step {p + 1}") + f": {r}" for p, r in cycle.violations
            )
            out.write(f"  {cycle.label()}  {reasons}\n")
    return EXIT_OK


def _run_icr(model, cycle, args):
    if model.family == "gaussian":
        cfg = GaussianIcrConfig(
            max_cycles=args.max_cycles or GaussianIcrConfig.max_cycles,
            frob_tol=args.tol or GaussianIcrConfig.frob_tol,
        )
        return gaussian_icr_run(model, cycle, cfg=cfg)
    cfg = IcrConfig(
        max_cycles=args.max_cycles or IcrConfig.max_cycles,
        kl_tol=args.tol or IcrConfig.kl_tol,
    )
    return icr_run(model, cycle, cfg=cfg)


def cmd_icr(args, out):
    model = _load(args.model)
    cycle = _resolve_cycle(model, args.cycle, args.strict)
    report = _run_icr(model, cycle, args)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "report.json"), report.to_dict(model))
        report.write_trace_csv(os.path.join(args.out, "trace.csv"))
    out.write(f"cycle {cycle.label()}: " + " -> ".join(model.describe(j) for j in cycle.order) + "\n")
    if not report.converged:
        status = getattr(report, "status", "max_cycles")
        out.write(f"NonConvergent ({status}) after {report.cycles_used} cycles\n")
        return EXIT_NONCONVERGENT
    out.write(f"converged after {report.cycles_used} cycles\n")
    show = _print_gaussian if model.family == "gaussian" else _print_discrete
    for i, (j, dist) in enumerate(zip(cycle.order, report.stationary)):
        out.write(f"  position {i + 1} ({model.describe(j)}), pi^{report.labels[i]} on "
                  f"{','.join(model.names(dist.scope))}:\n")
        show(dist, model, out)
    if report.compatible is not None:
        out.write(f"compatible: {str(report.compatible).lower()}\n")
    return EXIT_OK


def cmd_compat(args, out):
    model = _load(args.model)
    cycle = _resolve_cycle(model, args.cycle, args.strict)
    try:
        if model.family == "gaussian":
            cfg = GaussianIcrConfig(max_cycles=args.max_cycles or GaussianIcrConfig.max_cycles)
            verdict = gaussian_compatibility_check(model, cycle, cfg=cfg, tol=args.tol or 1e-8)
        else:
            cfg = IcrConfig(max_cycles=args.max_cycles or IcrConfig.max_cycles)
            verdict = compatibility_check(model, cycle, cfg=cfg, tol=args.tol or 1e-9)
    except ICRError as exc:
        raise CliError(str(exc)) from None
    out.write(f"cycle {cycle.label()}: {verdict.value}\n")
    return EXIT_NONCONVERGENT if verdict is Verdict.UNDECIDABLE else EXIT_OK


def _limits_from_report(path, model):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        limits = []
        for entry in doc["stationary"]:
            scope = [model.index_of(n) for n in entry["scope"]]
            if model.family == "discrete":
                perm = np.argsort(scope)
                table = np.transpose(np.array(entry["table"], dtype=float), perm)
                limits.append(DiscreteDistribution(varset(scope), table))
            else:
                perm = np.argsort(scope)
                cov = np.array(entry["covariance"], dtype=float)[np.ix_(perm, perm)]
                mean = np.array(entry["mean"], dtype=float)[perm]
                limits.append(GaussianDistribution(varset(scope), mean, cov))
        return doc.get("cycle"), limits
    except (OSError, ValueError, KeyError, TypeError, ICRError) as exc:
        raise CliError(f"cannot read ICR report {path}: {exc}") from None


def cmd_sample(args, out):
    model = _load(args.model)
    cycle = _resolve_cycle(model, args.cycle, args.strict)
    try:
        cfg = ChainConfig(
            burn_in=args.burn_in, samples=args.samples, seed=args.seed,
            thin=args.thin, chains=args.chains,
        )
        cfg.n_chains
    except ValueError as exc:
        raise CliError(str(exc)) from None
    batches = run_chain(model, cycle, cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_batches_json(batches, os.path.join(args.out, "batches.json"), model)
        write_batches_csv(batches, os.path.join(args.out, "batches.csv"), model)
    out.write(f"cycle {cycle.label()}: {cfg.samples} samples per position, seed {cfg.seed}\n")
    if not args.against:
        for b in batches:
            out.write(f"  position {b.position + 1} on {','.join(model.names(b.scope))}\n")
            if b.family == "gaussian":
                for line in format_matrix(b.empirical_cov, model.names(b.scope)).splitlines():
                    out.write("    " + line + "\n")
            else:
                _print_discrete(b.empirical_table, model, out)
        return EXIT_OK
    report_cycle, limits = _limits_from_report(args.against, model)
    if report_cycle is not None and [i + 1 for i in cycle.order] != list(report_cycle):
        out.write(f"note: report was computed for cycle <{','.join(map(str, report_cycle))}>\n")
    if len(limits) != len(batches):
        raise CliError(f"report has {len(limits)} limits, cycle has {len(batches)} positions")
    failed = False
    out.write("position  max|z|  result\n")
    for b, limit in zip(batches, limits):
        try:
            cmp = compare(b, limit)
            line = f"{b.position + 1:>8}  {cmp.max_z:6.2f}  {'pass' if cmp.passed else 'FAIL'}"
            failed |= not cmp.passed
        except ScopeMismatch as exc:
            line = f"{b.position + 1:>8}     inf  FAIL ({exc})"
            failed = True
        out.write(line + "\n")
    return EXIT_COMPARISON if failed else EXIT_OK


def _margins_from_files(paths):
    entries = []
    for path in paths:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read {path}: {exc}") from None
        if isinstance(doc, dict) and "stationary" in doc:
            entries.extend(doc["stationary"])
        elif isinstance(doc, list):
            entries.extend(doc)
        else:
            entries.append(doc)
    names = []
    for e in entries:
        for n in e.get("scope", []):
            if n not in names:
                names.append(n)
    margins = []
    try:
        for e in entries:
            scope = [names.index(n) for n in e["scope"]]
            perm = np.argsort(scope)
            cov = np.array(e["covariance"], dtype=float)[np.ix_(perm, perm)]
            mean = np.array(e.get("mean", [0.0] * len(scope)), dtype=float)[perm]
            margins.append(GaussianDistribution(varset(scope), mean, cov))
    except (KeyError, TypeError, ValueError, ICRError) as exc:
        raise CliError(f"malformed margin: {exc}") from None
    return names, margins


def cmd_assemble(args, out):
    names, margins = _margins_from_files(args.inputs)
    try:
        joint = assemble_trivariate(*margins)
    except (InconsistentMargins, NotPositiveDefinite, ScopeMismatch) as exc:
        raise CliError(str(exc)) from None
    labels = [names[v] for v in joint.scope]
    out.write(format_matrix(joint.covariance, labels) + "\n")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = distribution_to_dict(joint)
        payload["scope"] = labels
        _write_json(os.path.join(args.out, "joint.json"), payload)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="icr",
        description="Stationary distributions of conditionally specified models "
        "by iterative conditional replacement.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("model", help="JSON model file")
        p.add_argument("--strict", action="store_true",
                       help="require every step to drop a variable from the scope")
        return p

    p = model_cmd("cycles", "list permissible updating cycles")
    p.set_defaults(func=cmd_cycles)

    for name, func, help_text in (
        ("icr", cmd_icr, "run iterative conditional replacement"),
        ("compat", cmd_compat, "decide compatibility of full conditionals"),
    ):
        p = model_cmd(name, help_text)
        p.add_argument("--cycle", type=_cycle_arg, help="update order, e.g. 2,1,3 (1-based)")
        p.add_argument("--tol", type=_positive_float, help="convergence / comparison tolerance")
        p.add_argument("--max-cycles", type=_positive_int)
        if name == "icr":
            p.add_argument("--out", help="directory for report.json and trace.csv")
        p.set_defaults(func=func)

    p = model_cmd("sample", "run a seeded Gibbs-type chain and summarise batches")
    p.add_argument("--cycle", type=_cycle_arg)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--samples", type=_positive_int, default=ChainConfig.samples)
    p.add_argument("--burn-in", type=_nonnegative_int, default=ChainConfig.burn_in)
    p.add_argument("--thin", type=_positive_int, default=ChainConfig.thin)
    p.add_argument("--chains", type=_positive_int, default=ChainConfig.chains)
    p.add_argument("--against", help="ICR report.json to compare the batches with")
    p.add_argument("--out", help="directory for batches.json and batches.csv")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("assemble", help="trivariate Gaussian from three bivariate margins")
    p.add_argument("inputs", nargs="+",
                   help="a Gaussian ICR report.json, or margin files {scope, mean, covariance}")
    p.add_argument("--out", help="directory for joint.json")
    p.set_defaults(func=cmd_assemble)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except CliError as exc:
        sys.stderr.write(f"icr {args.command}: {exc}\n")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
