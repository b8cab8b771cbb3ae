"""Command-line interface: ``returntime <subcommand> ...``.

Exit status: 0 on success, 2 for usage and validation errors, 3 for
numerical failures (divergent walk sums, non-convergence), 1 otherwise.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from contextlib import contextmanager

import numpy as np

from . import approx, cycle
from ._validation import check_connected, check_horizon, check_radius
from .errors import NumericalError, ValidationError
from .exact import first_return_exact
from .experiments import EXPERIMENTS, StageError, preset, run_experiment
from .graph import DegreeLaw, format_edge_list, gen_gnm, gen_random_regular, gen_regular_sbm, read_edge_list
from .popdyn import popdyn_solve, predict_tail_slopes, write_population_csv, write_slopes_csv
from .report import fmt, write_reports_csv
from .series import DEFAULT_ORDER
from .tailfit import fit_tail_slope, slope_from_h

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as e:
            raise ValidationError(f"cannot write {path}: {e.strerror}") from e
        with fh:
            yield fh


def _load_graph(args):
    if args.graph:
        try:
            g = read_edge_list(args.graph)
        except OSError as e:
            raise ValidationError(f"cannot read graph file {args.graph}: {e.strerror}") from e
    elif args.model:
        g = _generate(args)
    else:
        raise ValidationError("give --graph FILE or generator flags (--model ...)")
    return check_connected(g)


def _generate(args):
    need = {"regular": ("n", "d"), "gnm": ("n", "m"), "sbm": ("n", "d", "c")}[args.model]
    missing = [f"--{k}" for k in need if getattr(args, k) is None]
    if missing:
        raise ValidationError(f"--model {args.model} needs {', '.join(missing)}")
    if args.model == "regular":
        return gen_random_regular(args.n, args.d, args.seed)
    if args.model == "gnm":
        return gen_gnm(args.n, args.m, args.seed)
    return gen_regular_sbm(args.n, args.d, args.c, args.in_frac, args.seed)


def _graph_flags(p):
    p.add_argument("--graph", metavar="FILE", help="edge list: one 'u v' pair per line, '#' comments")
    p.add_argument("--model", choices=("regular", "gnm", "sbm"), help="generate a graph instead of --graph")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--in-frac", type=float, default=2.0 / 3.0)
    p.add_argument("--seed", type=int, default=0)


def _common(p):
    p.add_argument("--out", metavar="FILE", help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def cmd_generate(args):
    if not args.model:
        raise ValidationError("generate needs --model")
    g = _generate(args)
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump({"n": g.n, "m": g.m, "edges": g.edges.tolist()}, fh)
            fh.write("\n")
        else:
            fh.write(format_edge_list(g))


def cmd_exact(args):
    g = _load_graph(args)
    rd = first_return_exact(g, args.node, check_horizon(args.T), with_x=True)
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump({"node": rd.node, "T": rd.T, "y": rd.y[1:].tolist(), "x": rd.x[1:].tolist()}, fh)
            fh.write("\n")
        else:
            rd.to_csv(fh)


def cmd_approx(args):
    g = _load_graph(args)
    T = check_horizon(args.T)
    if args.method == "meanfield":
        rep = approx.mean_field_report(g, args.node, T)
    elif args.method == "tree":
        rep = approx.combined_F(g, args.node, T)
    else:
        rep = cycle.final_F(g, args.node, check_radius(args.r), T, rule=args.rule)
    try:
        fit = fit_tail_slope(rep.y)
    except ValidationError:
        fit = None
    rep = dataclasses.replace(rep, fit=fit)
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump({"node": rep.node, "k": rep.k, "F1": rep.F1, "F1prime": rep.F1prime,
                       "h": rep.h.h if rep.h.enabled else None,
                       "slope": None if fit is None else fit.slope,
                       "window": None if fit is None else list(fit.window),
                       "r2": None if fit is None else fit.r2,
                       "y": rep.y[1:].tolist()}, fh)
            fh.write("\n")
        else:
            write_reports_csv([rep], fh)


def _parse_law(text):
    kind, _, rest = text.partition(":")
    if kind == "regular":
        return DegreeLaw.regular(int(rest))
    if kind == "poisson":
        return DegreeLaw.poisson(float(rest))
    if kind == "explicit":
        table = {}
        for item in rest.split(","):
            k, _, p = item.partition("=")
            try:
                table[int(k)] = float(p)
            except ValueError:
                raise ValidationError(f"bad explicit law entry {item!r}; expected k=p") from None
        return DegreeLaw.explicit(table)
    raise ValidationError(f"bad law {text!r}; use regular:D, poisson:LAMBDA or explicit:k=p,k=p,...")


def cmd_popdyn(args):
    law = _parse_law(args.law)
    pop = popdyn_solve(law, args.N, args.sweeps, args.seed, mode=args.mode)
    if args.slopes_out:
        if args.graph_n is None:
            raise ValidationError("--slopes-out needs --graph-n (node count of the target graph)")
        pred = predict_tail_slopes(pop, law, args.graph_n, args.samples, args.seed + 1)
        with _output(args.slopes_out) as fh:
            write_slopes_csv(pred, fh)
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump({"N": pop.N, "sweeps_run": pop.sweeps_run, "mean_F": float(pop.val.mean()),
                       "mean_F_der": float(pop.der.mean()), "mean_history": pop.mean_history}, fh)
            fh.write("\n")
        else:
            write_population_csv(pop, fh)


def _read_column(path, column):
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e.strerror}") from e
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or column not in rows[0]:
        raise ValidationError(f"{path} has no column {column!r}")
    try:
        vals = [float(r[column]) for r in rows]
    except ValueError:
        raise ValidationError(f"non-numeric entry in column {column!r}") from None
    # rows are t = 1..T; prepend y[0] = 0
    return np.concatenate([[0.0], vals])


def cmd_tailfit(args):
    if args.h is not None:
        result = {"slope": slope_from_h(args.h), "t_lo": None, "t_hi": None, "r2": None}
    elif args.input:
        fit = fit_tail_slope(_read_column(args.input, args.column), args.floor, args.window_frac)
        result = {"slope": fit.slope, "t_lo": fit.window[0], "t_hi": fit.window[1], "r2": fit.r2}
    else:
        raise ValidationError("tailfit needs --input FILE or --h VALUE")
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump(result, fh)
            fh.write("\n")
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slope", "t_lo", "t_hi", "r2"])
            w.writerow([fmt(result["slope"]), result["t_lo"] or "", result["t_hi"] or "",
                        "" if result["r2"] is None else fmt(result["r2"])])


def cmd_experiment(args):
    overrides = dict(T=args.T, r=args.r, nodes=args.nodes, out=args.out or f"results/{args.name}")
    if args.n:
        overrides["n"] = tuple(args.n)
    if args.no_popdyn:
        overrides["popdyn"] = False
    if args.graph:
        overrides.update(model="file", graph_path=args.graph)
    cfg = preset(args.name, args.scale, args.seed, **overrides)
    manifest = run_experiment(cfg)
    json.dump({"out": cfg.out, "runtimes_s": manifest["runtimes_s"], "notes": manifest["notes"]}, sys.stdout)
    sys.stdout.write("\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="returntime", description="First-return times of random walks on networks.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", help="sample a random graph and write its edge list")
    _graph_flags(s)
    _common(s)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("exact", help="exact first-return and return probabilities of one node")
    _graph_flags(s)
    s.add_argument("--node", type=int, required=True)
    s.add_argument("--T", type=int, default=DEFAULT_ORDER)
    _common(s)
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("approx", help="approximate first-return distribution of one node")
    _graph_flags(s)
    s.add_argument("--node", type=int, required=True)
    s.add_argument("--method", choices=("meanfield", "tree", "cycle"), default="tree")
    s.add_argument("--r", type=int, default=cycle.DEFAULT_R)
    s.add_argument("--rule", choices=cycle.RULES, default="edges")
    s.add_argument("--T", type=int, default=DEFAULT_ORDER)
    _common(s)
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("popdyn", help="population dynamics for a degree law")
    s.add_argument("--law", required=True, help="regular:D | poisson:LAMBDA | explicit:k=p,k=p,...")
    s.add_argument("--N", type=int, default=100_000)
    s.add_argument("--sweeps", type=int, default=1000)
    s.add_argument("--mode", choices=("sequential", "snapshot"), default="sequential")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--graph-n", type=int, help="node count used for slope predictions")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--slopes-out", metavar="FILE", help="write predicted (k, slope) samples here")
    _common(s)
    s.set_defaults(func=cmd_popdyn)

    s = sub.add_parser("tailfit", help="fit an exponential tail slope")
    s.add_argument("--input", metavar="FILE", help="CSV with rows t = 1..T")
    s.add_argument("--column", default="y")
    s.add_argument("--floor", type=float, default=1e-14)
    s.add_argument("--window-frac", type=float, default=0.5)
    s.add_argument("--h", type=float, help="convert a tail mean to a slope instead")
    _common(s)
    s.set_defaults(func=cmd_tailfit)

    s = sub.add_parser("experiment", help="run a figure preset")
    s.add_argument("name", choices=EXPERIMENTS)
    s.add_argument("--scale", choices=("desk", "paper"), default="desk")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", metavar="DIR")
    s.add_argument("--n", type=int, nargs="+")
    s.add_argument("--T", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--nodes", type=int)
    s.add_argument("--graph", metavar="FILE", help="edge list for the custom experiment")
    s.add_argument("--no-popdyn", action="store_true")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except StageError as e:
        print(f"returntime: error: {e}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(e.cause, (NumericalError, ArithmeticError)) else (
            EXIT_USAGE if isinstance(e.cause, ValidationError) else EXIT_ERROR)
    except ValidationError as e:
        print(f"returntime: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        print(f"returntime: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        return EXIT_OK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
