"""Command line front end.

Subcommands: ``capacities``, ``valley``, ``tunneling``, ``simulate``,
``verify-example`` and ``identities``.  Each writes one JSON report (to
stdout or ``--out``) and optionally CSV tables (``--tables DIR``).

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 failed
verdict in ``verify-example`` or ``identities``.
"""

import argparse
import re
import sys
import time

from .analysis import ValleySpec, check_valley_conditions, tunneling_analysis, valley_depth
from .errors import InputError, MetastabError, SimulationOnly
from .expr import compile_expression
from .familyio import load_family
from .fixtures import BUILTINS, builtin
from .identities import identity_battery
from .potential import capacity
from .report import build_report, to_json, write_tables
from .simulate import RNG_ALGORITHM, empirical_meta_rates, exit_law_experiment
from .verify import EXAMPLE_CHECKS, verify_example

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VERDICT = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _ints(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--family", help=f"builtin family: {', '.join(BUILTINS)}")
    src.add_argument("--file", help="family definition file (TOML)")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="builtin parameter, e.g. d=2 for torus2")
    p.add_argument("--N", type=int, dest="N", help="single value of the parameter N")
    p.add_argument("--n-grid", type=_ints, help="comma-separated grid of N values")
    p.add_argument("--theta", help="time scale expression in N, or 'auto'")
    p.add_argument("--reps", type=int, default=10_000, help="Monte Carlo replicas")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--tol", type=float, default=1e-8, help="identity tolerance")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--tables", metavar="DIR", help="also write CSV tables into DIR")


_NEGATIVE_VALUE = re.compile(r"^-\d")


def _attach_negative_values(argv):
    """Join ``--opt -1,0`` into ``--opt=-1,0`` so state lists may start with a minus sign."""
    out = []
    k = 0
    while k < len(argv):
        tok = argv[k]
        if (tok.startswith("--") and "=" not in tok and k + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[k + 1])):
            out.append(f"{tok}={argv[k + 1]}")
            k += 2
        else:
            out.append(tok)
            k += 1
    return out


def build_parser():
    parser = _Parser(prog="metastab", description="Metastability analysis of finite Markov chains.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("capacities", help="capacities between declared set pairs")
    _common(p)
    p.add_argument("--pair", action="append", default=[], metavar="A:B",
                   help="set pair, states comma separated, e.g. 3:4,5")

    p = sub.add_parser("valley", help="depth and sufficient conditions for a valley")
    _common(p)
    p.add_argument("--well")
    p.add_argument("--basin")
    p.add_argument("--xi")
    p.add_argument("--mode", choices=("general", "reversible", "auto"), default="auto")

    p = sub.add_parser("tunneling", help="inter-well rates and tunneling conditions")
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo exit-law or meta-rate experiment")
    _common(p)
    p.add_argument("--experiment", choices=("exit-law", "meta-rates"), default="exit-law")
    p.add_argument("--start")
    p.add_argument("--horizon", type=float, help="real-time horizon (default 50 theta)")
    p.add_argument("--variant", choices=("trace", "last-visit"), default="trace")
    p.add_argument("--well")
    p.add_argument("--basin")
    p.add_argument("--xi")

    p = sub.add_parser("verify-example", help="canned checks for one builtin")
    _common(p)

    p = sub.add_parser("identities", help="identity battery on one chain")
    _common(p)
    p.add_argument("--trials", type=int, default=5, help="random set draws")
    return parser


def _params(items):
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"parameter {item!r} is not KEY=VALUE")
        try:
            out[key] = int(value)
        except ValueError:
            out[key] = value
    return out


def _fixture(args):
    params = _params(args.param)
    if args.family:
        if args.family not in BUILTINS:
            raise InputError(f"unknown builtin family {args.family!r}")
        grid = args.n_grid
        if args.N is not None:
            grid = (args.N,)
        fx = builtin(args.family, n_grid=grid, **params)
        defn = {"builtin": args.family, "params": params}
    elif args.file:
        if params:
            raise InputError("--param only applies to builtin families")
        d, fx = load_family(args.file)
        if args.N is not None or args.n_grid:
            fx.family = fx.family.with_grid((args.N,) if args.N is not None else args.n_grid)
        defn = {"file": args.file, "label": d.label}
    else:
        raise InputError("give --family or --file")
    return fx, defn


def _labels(text, chain):
    lookup = {str(s): s for s in chain.states}
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok not in lookup:
            raise InputError(f"unknown state {tok!r}")
        out.append(lookup[tok])
    return out


def _valleys(args, fx, chain):
    if args.well or args.basin or args.xi:
        if not (args.well and args.xi):
            raise InputError("--well and --xi are required together")
        W = _labels(args.well, chain)
        B = _labels(args.basin, chain) if args.basin else W
        (xi,) = _labels(args.xi, chain)
        return [ValleySpec(W, B, xi)]
    if not fx.valleys:
        raise InputError("family declares no valley; use --well/--basin/--xi")
    return list(fx.valleys)


def _theta(args, fx):
    if args.theta is None:
        return fx.theta, fx.theta_text or "auto"
    if args.theta == "auto":
        return None, "auto"
    return compile_expression(args.theta), args.theta


def _analysable(fx):
    if fx.simulation_only:
        raise SimulationOnly(f"family {fx.name!r} has absorbing states; only 'simulate' applies")


def _cmd_capacities(args, fx, results, tables):
    _analysable(fx)
    rows = []
    results["capacities"] = []
    for N in fx.family.n_grid:
        chain, mu = fx.family.chain(N), fx.family.stationary(N)
        pairs = []
        for item in args.pair:
            a, sep, b = item.partition(":")
            if not sep:
                raise InputError(f"pair {item!r} is not A:B")
            pairs.append((_labels(a, chain), _labels(b, chain)))
        if not pairs:
            for v in fx.valleys:
                pairs.append((sorted(v.W, key=repr), sorted(v.outside(chain), key=repr)))
            part = fx.partition_at(N) if fx.partition or fx.partition_fn else None
            if part is not None and chain.n <= 2000:
                for x in part.labels:
                    pairs.append((sorted(part.wells[x], key=repr), sorted(part.others(x), key=repr)))
        for A, B in pairs:
            rep = capacity(chain, mu, A, B)
            rec = {"N": N, "A": A, "B": B, "capacity": rep.cap, "escape_sum": rep.escape_value,
                   "route_agreement": rep.agreement, "harmonic_residual": rep.residual}
            results["capacities"].append(rec)
            rows.append([N, " ".join(map(str, A)), " ".join(map(str, B)), rep.cap,
                         rep.escape_value, rep.agreement])
    tables["capacities"] = (["N", "A", "B", "capacity", "escape_sum", "route_agreement"], rows)
    return EXIT_OK


def _cmd_valley(args, fx, results, tables):
    _analysable(fx)
    chain0 = fx.family.chain(fx.family.n_grid[0])
    results["valleys"] = []
    rows = []
    for spec in _valleys(args, fx, chain0):
        mode = args.mode
        if mode == "auto":
            mode = "reversible" if fx.family.stationary(fx.family.n_grid[0]).reversible else "general"
        table = check_valley_conditions(fx.family, spec, mode)
        rec = table.as_dict()
        if mode == "reversible":
            rec["depth_trace_route"] = [
                valley_depth(fx.family.chain(N), fx.family.stationary(N), spec, route="trace")
                for N in fx.family.n_grid]
        results["valleys"].append(rec)
        for k, N in enumerate(table.n_grid):
            rows.append([" ".join(map(str, sorted(spec.W, key=repr))),
                         " ".join(map(str, sorted(spec.B, key=repr))), spec.xi, N, table.depth[k]]
                        + [table.sequences[c][k] for c in sorted(table.sequences)])
        header_extra = sorted(table.sequences)
    tables["valley"] = (["well", "basin", "xi", "N", "depth"] + header_extra, rows)
    return EXIT_OK


def _cmd_tunneling(args, fx, results, tables):
    _analysable(fx)
    if fx.partition is None and fx.partition_fn is None:
        raise InputError("family declares no well partition")
    theta, text = _theta(args, fx)
    part = fx.partition_fn if fx.partition_fn is not None else fx.partition
    rep = tunneling_analysis(fx.family, part, theta)
    results["theta"] = text
    results["tunneling"] = rep.as_dict()
    rows = []
    for k, N in enumerate(rep.n_grid):
        for x in rep.labels:
            for y in rep.labels:
                if x != y:
                    rows.append([N, x, y, rep.theta[k], rep.rates[k][x][y], rep.scaled[k][x][y]])
    tables["tunneling_rates"] = (["N", "x", "y", "theta", "rate", "scaled_rate"], rows)
    tables["tunneling_limits"] = (
        ["x", "y", "limit", "exponent", "verdict"],
        [[x, y, f.limit, f.exponent, f.verdict] for (x, y), f in rep.fits.items()])
    return EXIT_OK


def _cmd_simulate(args, fx, results, tables):
    N = args.N if args.N is not None else fx.family.n_grid[-1]
    fam = fx.family
    chain = fam.chain(N)
    theta, text = _theta(args, fx)
    if theta is None:
        raise InputError("simulation needs an explicit --theta")
    th = float(theta(N))
    results.update({"N": N, "theta": text, "theta_value": th, "rng": RNG_ALGORITHM})
    if args.experiment == "exit-law":
        spec = _valleys(args, fx, chain)[0]
        start = _labels(args.start, chain)[0] if args.start else None
        st = exit_law_experiment(chain, spec, th, reps=args.reps, seed=args.seed, start=start)
        results["valley"] = {"well": spec.W, "basin": spec.B, "xi": spec.xi}
        results["exit_law"] = st.as_dict()
        results["note"] = "consistency check only"
        tables["exit_law"] = (["replica", "exit_time_over_theta", "annulus_time_over_theta"],
                              [[i, a, b] for i, (a, b) in
                               enumerate(zip(st.exit_times, st.delta_occupation))])
    else:
        part = fx.partition_at(N)
        if part is None:
            raise InputError("family declares no well partition")
        est = empirical_meta_rates(chain, part, th, horizon=args.horizon, reps=args.reps,
                                   seed=args.seed, variant=args.variant)
        results["meta_rates"] = est.as_dict()
        tables["meta_rates"] = (["x", "y", "count", "rate", "stderr"],
                                [[x, y, est.counts[(x, y)], r, est.stderr[(x, y)]]
                                 for (x, y), r in est.rates.items()])
    return EXIT_OK


def _cmd_verify(args, fx, results, tables):
    if fx.name not in EXAMPLE_CHECKS:
        raise InputError(f"no canned checks for {fx.name!r}")
    checks = verify_example(fx.name, reps=args.reps, seed=args.seed, fixture=fx)
    results["checks"] = [c.as_dict() for c in checks]
    results["passed"] = all(c.passed for c in checks)
    results["note"] = "Monte Carlo entries are consistency checks only"
    tables["checks"] = (["name", "value", "expected", "passed"],
                        [[c.name, c.value, c.expected, c.passed] for c in checks])
    return EXIT_OK if results["passed"] else EXIT_VERDICT


def _cmd_identities(args, fx, results, tables):
    _analysable(fx)
    N = args.N if args.N is not None else fx.family.n_grid[-1]
    chain, mu = fx.family.chain(N), fx.family.stationary(N)
    if chain.n < 3:
        raise InputError("identity battery needs at least three states")
    checks = []
    for t in range(args.trials):
        for c in identity_battery(chain, mu, seed=args.seed + t):
            checks.append({**c.as_dict(), "trial": t})
    worst = max(c["residual"] for c in checks)
    results.update({"N": N, "checks": checks, "max_residual": worst, "passed": worst <= args.tol})
    tables["identities"] = (["trial", "name", "lhs", "rhs", "residual"],
                            [[c["trial"], c["name"], c["lhs"], c["rhs"], c["residual"]]
                             for c in checks])
    return EXIT_OK if worst <= args.tol else EXIT_VERDICT


COMMANDS = {"capacities": _cmd_capacities, "valley": _cmd_valley, "tunneling": _cmd_tunneling,
            "simulate": _cmd_simulate, "verify-example": _cmd_verify,
            "identities": _cmd_identities}


def _emit(report, out):
    text = to_json(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    t0 = time.perf_counter()
    results, tables = {}, {}
    args = None
    argv = list(sys.argv[1:] if argv is None else argv)
    inputs = {"argv": argv}
    try:
        args = parser.parse_args(_attach_negative_values(argv))
        fx, defn = _fixture(args)
        inputs.update({"family": defn, "n_grid": list(fx.family.n_grid)})
        code = COMMANDS[args.command](args, fx, results, tables)
        error = None
    except MetastabError as exc:
        code, error = exc.exit_code, exc.to_record()
    except (ValueError, KeyError) as exc:
        code, error = EXIT_INPUT, {"error": type(exc).__name__, "message": str(exc)}
    command = getattr(args, "command", None)
    report = build_report(command, inputs, results,
                          seed=getattr(args, "seed", None),
                          tolerances={"identity": getattr(args, "tol", None)},
                          timing={"seconds": time.perf_counter() - t0}, error=error)
    if error is not None:
        error["exit_code"] = code
        sys.stderr.write(f"metastab: {error['error']}: {error['message']}\n")
    _emit(report, getattr(args, "out", None))
    if tables and getattr(args, "tables", None):
        write_tables(tables, args.tables)
    return code


if __name__ == "__main__":
    sys.exit(main())
