"""Command-line front end.

Subcommands: ``simulate``, ``sweep``, ``oracle``, ``couple``, ``fit`` and
``phases``. Results go to ``--out`` (stdout by default) as JSON or CSV.

Exit codes: 0 success, 1 runtime error, 2 argument/config error,
3 coupling violation.

``--config file.json`` supplies flag values for the chosen subcommand; keys
are long flag names (``"lambda"``, ``"tmax"``, ...). Flags given on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .coupling import CouplingPair, run_coupled_batch
from .experiments import (GridPoint, fit_scaling_exponent, default_phase_threshold,
                          phase_survey, recovered_fraction_report, run_replications,
                          sweep, sweep_to_csv, SWEEP_COLUMNS)
from .graph import GraphError, parse_graph_spec
from .initspec import InitSpec
from .oracle import (LumpedStarState, gamblers_ruin_probs, gamma_ratio_product,
                     generic_expected_survival, sirs_star_expected_survival,
                     sis_star_expected_survival)
from .process import ProcessKind, ProcessSpec, replication_rng

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2, 3
SEED_ENV = "DIFFSIM_SEED"
_U64 = 0xFFFF_FFFF_FFFF_FFFF


class UsageError(Exception):
    """Bad arguments or config; maps to exit code 2."""


# --- argument types -------------------------------------------------------------

def _int(text: str) -> int:
    """Integer flag that also takes scientific notation (``1e4``)."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        f = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not f.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(f)


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _pos_int(text: str) -> int:
    v = _int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _xy(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(",")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- parser ------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=_int, default=None,
                   help=f"64-bit master seed (integer; default: ${SEED_ENV}, else 0)")
    g.add_argument("--out", default="-", help="output file path; '-' writes to stdout (default)")
    g.add_argument("--format", choices=("json", "csv"), default="json",
                   help="output format (default json)")
    g.add_argument("--workers", type=_pos_int, default=1,
                   help="worker threads for independent replications (count, default 1)")
    g.add_argument("--config", default=None,
                   help="JSON file of flag values for this subcommand; command-line flags override it")
    return p


def _process_args(p, processes, default=None):
    p.add_argument("--process", choices=processes, default=default,
                   help="process kind" + (f" (default {default})" if default else ""))
    p.add_argument("--graph", help="graph spec: star:L, clique:n, regular:n:d[:graph_seed] or file:path")
    p.add_argument("--lambda", dest="lam", type=_float, metavar="LAMBDA",
                   help="infection rate per edge (events per unit time; heal rate is 1)")
    p.add_argument("--rho", type=_float, default=None,
                   help="deimmunization rate R->S for SIRS (per unit time, default 1)")
    p.add_argument("--alpha", type=_float, default=None,
                   help="resistance decay rate for cSIRS/labeled (per unit time, default 1)")
    p.add_argument("--init", default="center",
                   help="initial infection: center, all, none, vertices:a,b,... or random:k (default center)")


ALL_PROCESSES = ("sis", "sirs", "csirs", "labeled")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="diffsim", description="Simulate SIS/SIRS/cSIRS diffusion on graphs.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo survival statistics")
    _process_args(p, ALL_PROCESSES)
    p.add_argument("--reps", type=_pos_int, default=1000, help="replications (count, default 1000)")
    p.add_argument("--tmax", type=_float, default=1e4,
                   help="censoring time (process time units, default 1e4)")
    p.add_argument("--kernel", choices=("auto", "star", "graph"), default="auto",
                   help="event loop: star-specialized, general graph, or auto (default)")

    p = sub.add_parser("sweep", parents=[common], help="survival statistics over a parameter grid")
    p.add_argument("--process", choices=ALL_PROCESSES, help="process kind")
    p.add_argument("--graph", nargs="+", help="one or more graph specs (see simulate)")
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", nargs="+", type=_float, metavar="LAMBDA",
                     help="infection rates per edge (per unit time)")
    lam.add_argument("--lambda-sq-n", dest="lambda_sq_n", nargs="+", type=_float,
                     help="values of lambda^2 * n (dimensionless); lambda is solved per graph, "
                          "with n = leaves on stars and the vertex count otherwise")
    p.add_argument("--rho", type=_float, default=None, help="deimmunization rate (per unit time, default 1)")
    p.add_argument("--alpha", type=_float, default=None, help="resistance decay rate (per unit time, default 1)")
    p.add_argument("--init", default="center", help="initial infection spec (default center)")
    p.add_argument("--reps", type=_pos_int, default=1000, help="replications per point (count, default 1000)")
    p.add_argument("--tmax", type=_float, default=1e4, help="censoring time (process time units, default 1e4)")
    p.add_argument("--plot", default=None,
                   help="path stem for mean survival vs lambda^2 n plot files (.dat, .gp, .png)")

    p = sub.add_parser("oracle", parents=[common], help="exact values: expected survival, ruin, gamma ratios")
    p.add_argument("--quantity", choices=("survival", "ruin", "gamma-ratio"), default="survival",
                   help="what to compute (default survival)")
    _process_args(p, ("sis", "sirs"))
    p.add_argument("--method", choices=("auto", "lumped", "generic"), default="auto",
                   help="lumped star chain, full state space, or auto (lumped on stars)")
    p.add_argument("--max-vertices", type=_pos_int, default=None,
                   help="vertex budget for the full state space (count; default 12 SIS, 8 SIRS)")
    p.add_argument("--max-leaves", type=_pos_int, default=200,
                   help="leaf budget for the lumped SIRS chain (count, default 200)")
    p.add_argument("--p", type=_float, help="ruin: up-step probability, in (0, 1)")
    p.add_argument("--lower", type=_int, help="ruin: lower absorbing level (integer)")
    p.add_argument("--upper", type=_int, help="ruin: upper absorbing level (integer)")
    p.add_argument("--start", type=_int, help="ruin: starting level (integer)")
    p.add_argument("--m", type=_int, help="gamma-ratio: first index of prod i/(i+c) (integer >= 1)")
    p.add_argument("--n", type=_int, help="gamma-ratio: last index (integer >= m-1)")
    p.add_argument("--c", type=_float, help="gamma-ratio: shift c (positive real)")

    p = sub.add_parser("couple", parents=[common], help="coupled runs checking domination/equivalence")
    p.add_argument("--pair", choices=[c.value for c in CouplingPair],
                   help="sis-csirs: SIS infected set contains cSIRS's; csirs-labeled: identical sets")
    p.add_argument("--graph", help="graph spec (see simulate)")
    p.add_argument("--lambda", dest="lam", type=_float, metavar="LAMBDA", help="infection rate per edge (per unit time)")
    p.add_argument("--alpha", type=_float, default=1.0, help="resistance decay rate (per unit time, default 1)")
    p.add_argument("--init", default="center", help="initial infection spec (default center)")
    p.add_argument("--reps", type=_pos_int, default=1000, help="coupled runs (count, default 1000)")
    p.add_argument("--tmax", type=_float, default=1e3,
                   help="censoring time per run (process time units, default 1e3)")
    p.add_argument("--keep-going", action="store_true",
                   help="continue after the first violating run instead of stopping")

    p = sub.add_parser("fit", parents=[common], help="log-log least-squares slope")
    p.add_argument("--input", default=None, help="CSV file with a header row (e.g. sweep output)")
    p.add_argument("--x", default="lambda_sq_n",
                   help="x column (default lambda_sq_n, computed as lambda^2 * n when absent)")
    p.add_argument("--y", default="mean_lb", help="y column (default mean_lb)")
    p.add_argument("--points", nargs="+", type=_xy, default=None,
                   help="inline points X,Y (positive reals) instead of --input")
    p.add_argument("--plot", default=None, help="path stem for plot files (.dat, .gp, .png)")

    p = sub.add_parser("phases", parents=[common], help="center-infected phase peaks on stars")
    _process_args(p, ALL_PROCESSES, default="sirs")
    p.add_argument("--reps", type=_pos_int, default=100, help="recorded runs (count, default 100)")
    p.add_argument("--tmax", type=_float, default=1e4, help="censoring time (process time units, default 1e4)")
    p.add_argument("--d", type=_float, default=None,
                   help="threshold constant: phases count if peak >= lambda*d*leaves "
                        "(dimensionless, default rho/(28(2+rho)))")
    p.add_argument("--theta", type=_float, default=None,
                   help="absolute peak threshold in infected leaves (overrides --d)")
    return parser


# --- config -------------------------------------------------------------------------

def _config_tokens(sub: argparse.ArgumentParser, path: str) -> list[str]:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    flags = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:]] = action
    tokens = []
    for key in sorted(cfg):
        name = key.lstrip("-").replace("_", "-")
        if name == "config" or name == "help" or name not in flags:
            raise UsageError(f"unknown config key {key!r}")
        val = cfg[key]
        opt = "--" + name
        if isinstance(flags[name], argparse._StoreTrueAction):
            if not isinstance(val, bool):
                raise UsageError(f"config key {key!r} must be true/false")
            if val:
                tokens.append(opt)
        elif isinstance(val, list):
            tokens += [opt] + [_token(v) for v in val]
        else:
            tokens += [opt, _token(val)]
    return tokens


def _token(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, (dict, list)):
        raise UsageError(f"unsupported config value {v!r}")
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        cmd_at = list(argv).index(args.command)
        merged = list(argv[:cmd_at + 1]) + _config_tokens(sub, args.config) + list(argv[cmd_at + 1:])
        args = parser.parse_args(merged)
    if args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = _int(env) if env not in (None, "") else 0
        except argparse.ArgumentTypeError:
            raise UsageError(f"{SEED_ENV} is not an integer: {env!r}") from None
    args.seed &= _U64
    return args


# --- helpers --------------------------------------------------------------------------

def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if n == "lam" else n.replace("_", "-")) for n in missing)
        raise UsageError(f"{args.command}: missing required {flags}")


def _spec(args) -> ProcessSpec:
    kind = ProcessKind.parse(args.process)
    if kind in (ProcessKind.CSIRS, ProcessKind.LABELED_CSIRS):
        second = args.alpha if args.alpha is not None else args.rho
    else:
        second = args.rho if args.rho is not None else args.alpha
    try:
        return ProcessSpec(kind, args.lam, 1.0 if second is None else second)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _graph(text: str, seed: int):
    try:
        return parse_graph_spec(text, seed)
    except (GraphError, ValueError, OSError) as exc:
        raise UsageError(f"bad graph {text!r}: {exc}") from None


def _init(text: str, graph=None) -> InitSpec:
    try:
        spec = InitSpec.parse(text)
        if graph is not None:
            # fail before any simulation; random:k only needs k <= n
            spec.resolve(graph, replication_rng(0, 0))
        return spec
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _positive_tmax(t: float) -> float:
    if not t > 0:
        raise UsageError("--tmax must be positive")
    return t


def _process_config(args, spec: ProcessSpec) -> dict:
    return {"process": spec.kind.slug, "graph": args.graph, "lambda": spec.lam,
            "rho_or_alpha": spec.rho_or_alpha, "init": args.init, "seed": args.seed}


# --- subcommands ----------------------------------------------------------------------

def cmd_simulate(args):
    _need(args, "process", "graph", "lam")
    spec = _spec(args)
    g = _graph(args.graph, args.seed)
    init = _init(args.init, g)
    t_max = _positive_tmax(args.tmax)
    batch = run_replications(g, spec, init, args.reps, t_max, args.seed, args.workers, args.kernel)
    out = batch.stats().to_dict()
    out["config"] = _process_config(args, spec) | {"reps": args.reps, "t_max": t_max}
    if spec.kind.has_recovered:
        mx, thr, exceed = recovered_fraction_report(batch, spec.rho_or_alpha)
        out["recovered_fraction"] = {"max_observed": mx, "threshold": thr, "exceed_count": exceed}
    return out, EXIT_OK


def _sweep_grid(args) -> list[GridPoint]:
    _need(args, "process", "graph")
    if args.lam is None and args.lambda_sq_n is None:
        raise UsageError("sweep: give --lambda or --lambda-sq-n")
    _positive_tmax(args.tmax)
    grid = []
    for gtext in args.graph:
        g = _graph(gtext, args.seed)
        _init(args.init, g)
        if args.lam is not None:
            lams = args.lam
        else:
            n = g.vertex_count - 1 if gtext.startswith("star:") else g.vertex_count
            lams = [math.sqrt(x / n) for x in args.lambda_sq_n]
        for lam in lams:
            ns = argparse.Namespace(**vars(args))
            ns.lam = lam
            grid.append(GridPoint(gtext, _spec(ns), args.init, args.reps, args.tmax))
    return grid


def cmd_sweep(args):
    grid = _sweep_grid(args)
    points = sweep(grid, args.seed, args.workers)
    out = {"points": [p.row() for p in points]}
    if args.plot:
        xy = [(p.lambda_sq_n, p.stats.mean_uncensored_lower_bound) for p in points]
        fit = None
        if len(xy) >= 3 and all(x > 0 and y > 0 for x, y in xy):
            fit = fit_scaling_exponent(xy)
            out["fit"] = {"slope": fit.slope, "intercept": fit.intercept, "slope_stderr": fit.slope_stderr}
        _plot(args.plot, xy, fit, "lambda^2 n", "mean survival (lower bound)")
    if args.format == "csv":
        return sweep_to_csv(points), EXIT_OK
    return out, EXIT_OK


def _lumped_init(graph, vs) -> LumpedStarState:
    vs = set(int(v) for v in vs)
    leaves = graph.vertex_count - 1
    i = len(vs - {0})
    return LumpedStarState("I" if 0 in vs else "S", leaves - i, i, 0)


def cmd_oracle(args):
    q = args.quantity
    if q == "ruin":
        _need(args, "p", "lower", "upper", "start")
        try:
            lo, up = gamblers_ruin_probs(args.p, args.lower, args.upper, args.start)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return {"quantity": q, "p": args.p, "lower": args.lower, "upper": args.upper,
                "start": args.start, "prob_lower": lo, "prob_upper": up}, EXIT_OK
    if q == "gamma-ratio":
        _need(args, "m", "n", "c")
        try:
            exact, asym = gamma_ratio_product(args.m, args.n, args.c)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return {"quantity": q, "m": args.m, "n": args.n, "c": args.c, "exact": exact,
                "asymptotic": asym, "ratio": exact / asym if asym not in (0.0, math.inf) else None}, EXIT_OK

    _need(args, "process", "graph", "lam")
    spec = _spec(args)
    g = _graph(args.graph, args.seed)
    init = _init(args.init)
    try:
        vs = init.resolve(g, replication_rng(args.seed, 0))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    method = args.method
    if method == "auto":
        method = "lumped" if g.is_star and g.vertex_count > 1 else "generic"
    if method == "lumped":
        if not g.is_star or g.vertex_count < 2:
            raise UsageError("lumped oracle needs a star with at least one leaf")
        st = _lumped_init(g, vs)
        if spec.kind == ProcessKind.SIS:
            res = sis_star_expected_survival(g.vertex_count - 1, spec.lam, st)
        else:
            res = sirs_star_expected_survival(g.vertex_count - 1, spec.lam, spec.rho_or_alpha, st,
                                              max_leaves=args.max_leaves)
    else:
        res = generic_expected_survival(g, spec, vs, args.max_vertices)
    out = res.to_dict()
    out["quantity"] = q
    out["method"] = method
    out["config"] = _process_config(args, spec)
    return out, EXIT_OK


def cmd_couple(args):
    _need(args, "pair", "graph", "lam")
    g = _graph(args.graph, args.seed)
    init = _init(args.init, g)
    t_max = _positive_tmax(args.tmax)
    if not (args.lam >= 0 and args.alpha > 0):
        raise UsageError("need --lambda >= 0 and --alpha > 0")
    batch = run_coupled_batch(CouplingPair(args.pair), g, args.lam, args.alpha, init, args.reps,
                              args.seed, t_max, stop_on_violation=not args.keep_going)
    out = batch.to_dict()
    out["config"] = {"pair": args.pair, "graph": args.graph, "lambda": args.lam, "alpha": args.alpha,
                     "init": args.init, "reps": args.reps, "t_max": t_max, "seed": args.seed}
    bad = batch.violations > 0
    if batch.pair is CouplingPair.CSIRS_EQ_LABELED and not batch.identical_survival:
        bad = True
    return out, EXIT_VIOLATION if bad else EXIT_OK


def _read_xy(path: str, xcol: str, ycol: str) -> list[tuple[float, float]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path!r}: {exc}") from None
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise UsageError(f"{path!r} has no data rows")
    cols = set(rows[0])
    if ycol not in cols:
        raise UsageError(f"column {ycol!r} not in {path!r}")
    if xcol not in cols and not (xcol == "lambda_sq_n" and {"lambda", "n"} <= cols):
        raise UsageError(f"column {xcol!r} not in {path!r}")
    pts = []
    try:
        for r in rows:
            x = float(r[xcol]) if xcol in r else float(r["lambda"]) ** 2 * float(r["n"])
            pts.append((x, float(r[ycol])))
    except ValueError as exc:
        raise UsageError(f"non-numeric value in {path!r}: {exc}") from None
    return pts


def cmd_fit(args):
    if (args.input is None) == (args.points is None):
        raise UsageError("fit: give exactly one of --input or --points")
    pts = args.points if args.points is not None else _read_xy(args.input, args.x, args.y)
    try:
        fit = fit_scaling_exponent(pts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.plot:
        _plot(args.plot, pts, fit, args.x, args.y)
    return {"slope": fit.slope, "intercept": fit.intercept, "slope_stderr": fit.slope_stderr,
            "points": len(pts)}, EXIT_OK


def cmd_phases(args):
    _need(args, "graph", "lam")
    spec = _spec(args)
    g = _graph(args.graph, args.seed)
    if not g.is_star or g.vertex_count < 2:
        raise UsageError("phases: graph must be a star")
    init = _init(args.init, g)
    t_max = _positive_tmax(args.tmax)
    leaves = g.vertex_count - 1
    theta = args.theta
    if theta is None:
        theta = default_phase_threshold(spec.lam, spec.rho_or_alpha, leaves, args.d)
    stats = phase_survey(g, spec, init, args.reps, t_max, args.seed)
    peaks = [p for st in stats for p in st.center_infected_phase_peaks]
    reached = sum(p >= theta for p in peaks)
    out = {
        "runs": len(stats),
        "phase_count_total": sum(st.phase_count for st in stats),
        "center_infected_phases": len(peaks),
        "theta": theta,
        "phases_reaching_theta": reached,
        "fraction_reaching_threshold": reached / len(peaks) if peaks else 0.0,
        "mean_peak": float(np.mean(peaks)) if peaks else 0.0,
        "config": _process_config(args, spec) | {"reps": args.reps, "t_max": t_max},
    }
    return out, EXIT_OK


def _plot(stem, xy, fit, xlabel, ylabel):
    from .plotting import write_plot_bundle

    x = [p[0] for p in xy]
    y = [p[1] for p in xy]
    write_plot_bundle(stem, x, y, fit, xlabel=xlabel, ylabel=ylabel)


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "oracle": cmd_oracle,
            "couple": cmd_couple, "fit": cmd_fit, "phases": cmd_phases}


# --- output -----------------------------------------------------------------------------

def _clean(v):
    # strict JSON: non-finite floats become strings
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _flatten(d: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            flat[key] = json.dumps(v, sort_keys=True)
        else:
            flat[key] = v
    return flat


def render(result, fmt: str) -> str:
    if isinstance(result, str):
        return result
    result = _clean(result)
    if fmt == "json":
        return json.dumps(result, sort_keys=True, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if "points" in result and isinstance(result["points"], list) and result["points"] \
            and isinstance(result["points"][0], dict):
        rows = result["points"]
        cols = list(SWEEP_COLUMNS)
    else:
        rows = [_flatten(result)]
        cols = sorted(rows[0])
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else "" if r[c] is None else r[c]
                    for c in cols])
    return buf.getvalue()


def _write(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(out)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    try:
        result, code = COMMANDS[args.command](args)
        _write(render(result, args.format), args.out)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except Exception as exc:  # runtime failure: report, don't trace
        return _fail(EXIT_RUNTIME, exc)
    return code


if __name__ == "__main__":
    sys.exit(main())
