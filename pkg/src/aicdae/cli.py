"""Command-line front end.

Subcommands
-----------
analyze
    Index, dof, ranks and accurate-IC matrix of a built-in problem at one time.
solve
    Windowed IVP solve with the error against the exact solution.
converge
    Parameter sweeps laid out like the gap and solver error tables.
diffcheck
    Row-sum norms of differentiation matrices against the known bounds.

Every option can also be given in a JSON file passed with ``--config``; flags
given on the command line take precedence.  Relative output paths are
resolved against ``$AICDAE_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Dict, List, Sequence

import numpy as np

from .errors import AicError
from .problems import REGISTRY, get_problem
from .reduction import ReductionConfig, accurate_ic_matrix, gap_to_reference
from .specdiff import build_operator, norm_bound_report
from .stepper import IvpConfig, global_error, solve_ivp

NODE_NAMES = {"cheb2": "chebyshev2", "radau": "radau", "gauss": "gauss_legendre", "equi": "equidistant"}
STRATEGY_NAMES = {"svd-ode": "svd_ode", "qr-fixed": "qr_fixed_pivot"}
DIFF_NAMES = {"interp": "interpolatory", "lsq": "least_squares"}
HALVING = [0.1, 0.05, 0.025, 0.0125, 0.00625]


def fmt(value) -> str:
    """CSV cell text: integers verbatim, floats with 6 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else f"{float(value):.5e}"
    return str(value)


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _resolve_out(path):
    if path in (None, "-"):
        return path
    base = os.environ.get("AICDAE_OUTPUT_DIR")
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _floats(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def fitted_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``.

    Cells below ``1e3 * eps`` are treated as rounding plateau and skipped.
    """
    pts = [(x, y) for x, y in zip(xs, ys) if np.isfinite(y) and y > 1e3 * np.finfo(float).eps]
    if len(pts) < 2:
        return math.nan
    lx, ly = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


# ---------------------------------------------------------------------------
# option handling

DEFAULTS: Dict[str, object] = {
    "problem": "campbell-moore",
    "t_bar": 0.0,
    "tau": None,
    "Nd": None,
    "Md": None,
    "Nc": None,
    "Mc": None,
    "L": None,
    "n": None,
    "mode": "central",
    "strategy": "svd-ode",
    "diff": "interp",
    "nodes": "cheb2",
    "coll_nodes": "gauss",
    "tau_rule": "power(mu/3)",
    "kind": "gap",
    "N": None,
    "M_min": 2,
    "M_max": 20,
    "workers": 1,
    "out": None,
    "plot": None,
    "samples": 101,
}


def _add_common(p):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--problem", choices=sorted(REGISTRY))
    p.add_argument("--t-bar", dest="t_bar", type=float)
    p.add_argument("--tau", help="window width (comma list for converge)")
    p.add_argument("--Nd", type=int, help="differentiation degree")
    p.add_argument("--Md", help="differentiation nodes (comma list for converge)")
    p.add_argument("--Nc", type=int, help="collocation degree")
    p.add_argument("--Mc", type=int, help="collocation nodes per subinterval")
    p.add_argument("--L", help="window count (comma list for converge)")
    p.add_argument("--n", help="subintervals per window (comma list for converge)")
    p.add_argument("--mode", choices=["central", "left", "right"])
    p.add_argument("--strategy", choices=sorted(STRATEGY_NAMES))
    p.add_argument("--diff", choices=sorted(DIFF_NAMES))
    p.add_argument("--nodes", choices=sorted(NODE_NAMES), help="differentiation node family")
    p.add_argument("--coll-nodes", dest="coll_nodes", choices=["gauss", "radau"])
    p.add_argument("--tau-rule", dest="tau_rule", help="fixed | power(mu/2) | power(mu/3)")
    p.add_argument("--out", help="output CSV path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aicdae", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="index, dof and accurate-IC matrix at one time")
    _add_common(p)

    p = sub.add_parser("solve", help="windowed IVP solve")
    _add_common(p)
    p.add_argument("--samples", type=int, help="number of output times")

    p = sub.add_parser("converge", help="parameter sweeps")
    _add_common(p)
    p.add_argument("--kind", choices=["gap", "ivp"])
    p.add_argument("--N", help="polynomial degrees for ivp sweeps (comma list)")
    p.add_argument("--workers", type=int, help="worker threads")
    p.add_argument("--plot", help="gnuplot script path")

    p = sub.add_parser("diffcheck", help="differentiation matrix norm bounds")
    p.add_argument("--config")
    p.add_argument("--nodes", choices=["cheb2", "equi"])
    p.add_argument("--M-min", dest="M_min", type=int)
    p.add_argument("--M-max", dest="M_max", type=int)
    p.add_argument("--out")
    return parser


def resolve_options(args: argparse.Namespace) -> Dict[str, object]:
    """Merge defaults, JSON config and explicit flags (flags win)."""
    opts = dict(DEFAULTS)
    given = {k: v for k, v in vars(args).items() if k not in ("config", "command")}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise AicError("config file must hold a JSON object")
        unknown = sorted(set(cfg) - set(given))
        if unknown:
            raise AicError(f"unknown config keys for '{args.command}': {unknown}")
        opts.update(cfg)
    opts.update({k: v for k, v in given.items() if v is not None})
    return opts


def _reduction_cfg(opts, Md=None, tau=None, Nd=None) -> ReductionConfig:
    diff = DIFF_NAMES[opts["diff"]]
    Md = int(Md if Md is not None else (_ints(opts["Md"])[0] if opts["Md"] is not None else 5))
    if Nd is None:
        Nd = opts["Nd"] if opts["Nd"] is not None else (Md - 1 if diff == "interpolatory" else Md - 2)
    tau = float(tau if tau is not None else (_floats(opts["tau"])[0] if opts["tau"] is not None else 0.1))
    return ReductionConfig(
        Nd=int(Nd),
        Md=Md,
        diff_kind=diff,
        node_family=NODE_NAMES[opts["nodes"]],
        window_mode=opts["mode"],
        tau=tau,
        basis_strategy=STRATEGY_NAMES[opts["strategy"]],
    )


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(opts) -> int:
    bundle = get_problem(opts["problem"])
    cfg = _reduction_cfg(opts)
    t_bar = float(opts["t_bar"])
    t0 = time.perf_counter()
    out = accurate_ic_matrix(bundle.pair, t_bar, cfg)
    elapsed = time.perf_counter() - t0
    gap = gap_to_reference(out, bundle.G_exact(t_bar))
    normG = float(np.linalg.norm(out.G, 2)) if out.G.size else 0.0
    print(f"problem   {bundle.name}")
    print(f"t_bar     {t_bar:g}   window [{out.window[0]:g}, {out.window[1]:g}]")
    print(f"index mu  {out.mu}")
    print(f"dof l     {out.dof}")
    print(f"ranks     {list(out.ranks)}")
    print(f"|G_tau|   {normG:.6e}")
    print(f"gap       {gap:.6e}")
    print(f"time      {elapsed:.3f} s")
    if out.G.size:
        print("G_tau =")
        print(np.array2string(out.G, precision=6, suppress_small=True, max_line_width=120))
    header = ["problem", "t_bar", "Nd", "Md", "tau", "mode", "strategy", "mu", "l", "ranks", "normG", "gap"]
    row = [bundle.name, t_bar, cfg.Nd, cfg.Md, cfg.tau, cfg.window_mode, cfg.basis_strategy.value,
           out.mu, out.dof, " ".join(map(str, out.ranks)), normG, gap]
    if opts["out"] is not None:
        write_csv(_resolve_out(opts["out"]), header, [row])
    return 0


def _ivp_config(opts, L, n, N) -> IvpConfig:
    diff = DIFF_NAMES[opts["diff"]]
    M = N + 1 if diff == "interpolatory" else N + 2
    Nc = opts["Nc"] if opts["Nc"] is not None else N
    Mc = opts["Mc"] if opts["Mc"] is not None else M
    Md = _ints(opts["Md"])[0] if opts["Md"] is not None else M
    Nd = opts["Nd"] if opts["Nd"] is not None else N
    tau_rule = opts["tau_rule"]
    tau = _floats(opts["tau"])[0] if opts["tau"] is not None else None
    red = _reduction_cfg(opts, Md=Md, tau=tau or 0.1, Nd=Nd)
    return IvpConfig(L=L, n=n, Nc=int(Nc), Mc=int(Mc), family=NODE_NAMES[opts["coll_nodes"]],
                     reduction=red, tau_rule=tau_rule, tau=tau)


def cmd_solve(opts) -> int:
    bundle = get_problem(opts["problem"])
    L = _ints(opts["L"])[0] if opts["L"] is not None else 1
    n = _ints(opts["n"])[0] if opts["n"] is not None else 10
    N = opts["Nc"] if opts["Nc"] is not None else 4
    cfg = _ivp_config(opts, L, n, int(N))
    t0 = time.perf_counter()
    sol = solve_ivp(bundle.pair, bundle.q, bundle.G_a, bundle.g_a, bundle.interval, cfg)
    elapsed = time.perf_counter() - t0
    err = global_error(sol, bundle.exact, bundle.dexact)
    a, b = bundle.interval
    ts = np.linspace(a, b, int(opts["samples"]))
    xs = sol.values(ts)
    maxerr = float(np.max(np.abs(xs - np.array([bundle.exact(t) for t in ts]))))
    print(f"problem   {bundle.name}   L={L} n={n} Nc={cfg.Nc} Mc={cfg.Mc}")
    print(f"H1D error {err:.6e}")
    print(f"max error {maxerr:.6e} (at {ts.size} sample times)")
    print(f"time      {elapsed:.3f} s")
    if opts["out"] is not None:
        header = ["t"] + [f"x{i + 1}" for i in range(bundle.m)]
        write_csv(_resolve_out(opts["out"]), header, [[t, *x] for t, x in zip(ts, xs)])
    return 0


def _gap_cell(opts, Md, tau):
    bundle = get_problem(opts["problem"])
    cfg = _reduction_cfg(opts, Md=Md, tau=tau)
    t_bar = float(opts["t_bar"])
    out = accurate_ic_matrix(bundle.pair, t_bar, cfg)
    return gap_to_reference(out, bundle.G_exact(t_bar))


def _ivp_cell(opts, L, n, N):
    bundle = get_problem(opts["problem"])
    cfg = _ivp_config(opts, L, n, N)
    sol = solve_ivp(bundle.pair, bundle.q, bundle.G_a, bundle.g_a, bundle.interval, cfg)
    return global_error(sol, bundle.exact, bundle.dexact)


def _run_cells(func, cells, workers):
    def safe(cell):
        try:
            return func(*cell), ""
        except (AicError, ValueError, np.linalg.LinAlgError) as exc:
            return math.nan, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(safe, cells))
    else:
        results = [safe(c) for c in cells]
    return dict(zip(cells, results))


def cmd_converge(opts) -> int:
    workers = max(1, int(opts["workers"]))
    a, b = get_problem(opts["problem"]).interval
    if opts["kind"] == "gap":
        Ms = _ints(opts["Md"]) if opts["Md"] is not None else [3, 5, 7, 9, 11]
        taus = _floats(opts["tau"]) if opts["tau"] is not None else HALVING
        cells = sorted(product(Ms, taus), key=lambda c: (c[0], -c[1]))
        res = _run_cells(lambda M, t: _gap_cell(opts, M, t), cells, workers)
        header = ["Md", "tau", "gap", "note"]
        rows = [[M, t, res[(M, t)][0], res[(M, t)][1]] for M, t in cells]
        series = {M: ([t for t in taus], [res[(M, t)][0] for t in taus]) for M in Ms}
        slope_header = ["Md", "slope"]
        xlabel = "tau"
    else:
        Ns = _ints(opts["N"]) if opts["N"] is not None else [4, 6, 8]
        Ls = _ints(opts["L"]) if opts["L"] is not None else [1]
        ns = _ints(opts["n"]) if opts["n"] is not None else [10, 20, 40]
        cells = sorted(product(Ls, ns, Ns))
        res = _run_cells(lambda L, n, N: _ivp_cell(opts, L, n, N), cells, workers)
        header = ["L", "n", "N", "h", "error", "note"]
        rows = [[L, n, N, (b - a) / (L * n), res[(L, n, N)][0], res[(L, n, N)][1]] for L, n, N in cells]
        series = {}
        for L, N in product(Ls, Ns):
            hs = [(b - a) / (L * n) for n in ns]
            series[(L, N)] = (hs, [res[(L, n, N)][0] for n in ns])
        slope_header = ["L", "N", "slope"]
        xlabel = "h"

    out = _resolve_out(opts["out"])
    write_csv(out, header, rows)
    slope_rows = []
    for key, (xs, ys) in series.items():
        key = key if isinstance(key, tuple) else (key,)
        slope_rows.append([*key, fitted_slope(xs, ys)])
    if out not in (None, "-"):
        root, _ = os.path.splitext(out)
        write_csv(root + "_slopes.csv", slope_header, slope_rows)
    else:
        sys.stdout.write("\n")
        write_csv("-", slope_header, slope_rows)
    if opts["plot"] is not None and out not in (None, "-"):
        _write_gnuplot(_resolve_out(opts["plot"]), out, header, series, xlabel)
    failed = [r for r in rows if r[-1]]
    for r in failed:
        print(f"failed cell {r[:-2]}: {r[-1]}", file=sys.stderr)
    return 1 if failed else 0


def _write_gnuplot(path, csv_path, header, series, xlabel):
    ycol = header.index("gap" if "gap" in header else "error") + 1
    xcol = header.index(xlabel) + 1
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set format y '%.0e'",
        f"set xlabel '{xlabel}'",
        "set ylabel 'error'",
        "set key left top",
        "plot \\",
    ]
    plots = []
    for key in series:
        key = key if isinstance(key, tuple) else (key,)
        cond = " && ".join(f"$%d==%d" % (header.index(name) + 1, v)
                           for name, v in zip([h for h in header if h in ("Md", "L", "N")], key))
        label = ",".join(str(v) for v in key)
        plots.append(
            f"  '{os.path.basename(csv_path)}' every ::1 using (({cond}) ? ${xcol} : 1/0):{ycol} "
            f"with linespoints title '{label}'"
        )
    lines.append(", \\\n".join(plots))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_diffcheck(opts) -> int:
    family = opts["nodes"] if opts["nodes"] in ("cheb2", "equi") else "cheb2"
    rows = []
    for M in range(int(opts["M_min"]), int(opts["M_max"]) + 1):
        d = build_operator(NODE_NAMES[family], M, M - 1, (-1.0, 1.0))
        rep = norm_bound_report(d)
        rows.append([M, rep["inf_norm"], rep["bound"], rep["kind"], rep["satisfied"]])
    write_csv(_resolve_out(opts["out"]) if opts["out"] else "-", ["M", "inf_norm", "bound", "kind", "satisfied"], rows)
    return 0 if all(r[-1] for r in rows) else 1


COMMANDS = {"analyze": cmd_analyze, "solve": cmd_solve, "converge": cmd_converge, "diffcheck": cmd_diffcheck}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve_options(args)
        return COMMANDS[args.command](opts)
    except (AicError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
