"""Command-line front end.

Every subcommand writes a CSV: ``#`` metadata lines, one header row, data rows.
Options may also come from a ``key=value`` file given with ``--config``;
command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

from . import __version__
from .frequency import (RationalFrequencyError, best_approximants, c_s_limits, diophantine_profile,
                        dominance_analysis, parse_frequency)
from .melnikov import PerturbationParams, build_series, dominant, log_amplitude_sup

LONG_NU = 2.0**-5  # manifold grids at or below this nu need --long
LONG_GRID = 64


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# output


def fmt(v, precision: str = "double") -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, mpmath.mpf):
        if precision == "extended":
            return mpmath.nstr(v, 32, min_fixed=1, max_fixed=0, strip_zeros=False)
        v = float(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return f"{v:.16e}"
    if isinstance(v, (tuple, list)):
        return " ".join(str(x) for x in v)
    return str(v)


class Table:
    def __init__(self, columns: Sequence[str], meta: dict, precision: str = "double"):
        self.columns = list(columns)
        self.meta = meta
        self.precision = precision
        self.rows: list[list[str]] = []

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row width does not match header")
        self.rows.append([fmt(v, self.precision) for v in values])

    def render(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}: {v}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(r) + "\n")
        return buf.getvalue()


def emit(table: Table, out: str | None):
    text = table.render()
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    # write-then-rename so a failed run never leaves a partial file
    tmp = out + ".partial"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, out)


# --------------------------------------------------------------------------
# config


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _log2_range(lo: float, hi: float, step: float) -> list[float]:
    """Points from hi down to lo; empty when lo > hi."""
    if step <= 0:
        raise CliError("step must be positive")
    if lo > hi:
        return []
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [hi - k * step for k in range(n + 1)]


def make_params(args, nu: float = 0.5) -> PerturbationParams:
    try:
        freq = parse_frequency(args.freq)
        return PerturbationParams(nu, args.eps, args.c, args.d, freq)
    except (ValueError, RationalFrequencyError) as exc:
        raise CliError(str(exc)) from exc


def base_meta(args, command: str) -> dict:
    return {"hopfsplit": __version__, "command": command, "freq": args.freq, "eps": args.eps,
            "c": args.c, "d": args.d, "precision": args.precision}


# --------------------------------------------------------------------------
# commands


def cmd_scan(args) -> Table:
    params = make_params(args)
    comps = [1, 2] if args.component == 0 else [args.component]
    meta = base_meta(args, "scan") | {"truncation_rel_tol": args.truncation_tol}
    t = Table(["log2_nu", "nu", "component", "m1", "m2", "n_terms", "log_sup", "scaled_log_sup",
               "psi_envelope"], meta)
    freq = params.gamma
    apx = [a for a in best_approximants(freq, 60) if a.n >= 1 and a.N > 0]
    from .universal import approximant_score
    for x in _log2_range(args.from_log2nu, args.to, args.step):
        nu = 2.0**x
        p = params.with_nu(nu)
        for comp in comps:
            s = build_series(p, comp, truncation_rel_tol=args.truncation_tol)
            la = log_amplitude_sup(s) + math.log(p.eps)
            m1, m2 = dominant(s)
            env = max(approximant_score(a, nu, p, comp, "psi") for a in apx
                      if 1e-4 < float(a.c_s) * nu * a.N * a.N < 1e3)
            t.add(x, nu, comp, m1, m2, len(s), la, math.sqrt(nu) * (la - math.log(p.eps)), env)
    return t


def cmd_changes(args) -> Table:
    from .geometry import topology_change_scan
    from .universal import NoChangeInRange, change_points

    params = make_params(args)
    comps = [1, 2] if args.component == 0 else [args.component]
    lo, hi = sorted((args.from_log2nu, args.to))
    meta = base_meta(args, "changes") | {"method": args.method, "log2_nu_range": f"{lo} {hi}"}
    if args.method == "approximant":
        t = Table(["from_N", "from_D", "to_N", "to_D", "component", "log2_nu", "L_at_change"], meta)
        if args.from_log2nu > args.to:
            return t
        for comp in comps:
            try:
                pts = change_points(params.gamma, params, (2.0**lo, 2.0**hi), comp, args.mode)
            except NoChangeInRange:
                continue
            for cp in pts:
                a, b = cp.from_approx, cp.to_approx
                t.add(a.N, a.D, b.N, b.D, comp, cp.log2_nu, cp.L_at_change)
        return t
    t = Table(["component", "log2_nu_above", "log2_nu_below", "label_above", "label_below"], meta)
    if args.from_log2nu > args.to:
        return t
    for comp in comps:
        for ch in topology_change_scan((hi, lo), comp, args.log2_step, params, criterion=args.method):
            t.add(comp, ch.log2_nu_above, ch.log2_nu_below, ch.old, ch.new)
    return t


def cmd_psi(args) -> Table:
    from .universal import golden_change_constants, psi1, psi1_max, psi1_max_surface

    params = make_params(args)
    meta = base_meta(args, "psi") | {"what": args.what}
    if args.what == "table":
        t = Table(["L", "psi1", "psi2", "I_star"], meta)
        if args.points < 1 or args.L_from > args.L_to:
            return t
        for L in np.geomspace(args.L_from, args.L_to, args.points):
            ev = psi1(float(L), params)
            t.add(float(L), ev.psi1, ev.psi2_for(args.m1), ev.I_star)
        return t
    if args.what == "max":
        t = Table(["L_max", "psi_max"], meta)
        t.add(*psi1_max(params))
        return t
    if args.what == "surface":
        cs = [float(v) for v in args.c_values.split()]
        ds = [float(v) for v in args.d_values.split()]
        surf = psi1_max_surface(cs, ds, params.gamma)
        t = Table(["c", "d", "L_max", "psi_max"], meta)
        for i, c in enumerate(cs):
            for j, d in enumerate(ds):
                t.add(c, d, float(surf[i, j, 0]), float(surf[i, j, 1]))
        return t
    g = golden_change_constants(params)
    t = Table(["L_prefactor", "L_tilde", "psi_hat_at_change", "L_tilde_max", "psi_hat_max", "c_s"], meta)
    t.add(g.L_prefactor, g.L_tilde, g.psi_hat_at_change, g.L_tilde_max, g.psi_hat_max, g.c_s)
    return t


def cmd_freq(args) -> Table:
    params = make_params(args)
    freq = params.gamma
    meta = base_meta(args, "freq") | {"what": args.what}
    if args.what == "approximants":
        t = Table(["n", "quotient", "N", "D", "s", "c_s"], meta)
        qs = freq.quotients(args.count)
        for a, q in zip(best_approximants(freq, args.count), qs):
            t.add(a.n, q, a.N, a.D, float(a.s_signed), float(a.c_s))
        return t
    if args.what == "cs-limits":
        t = Table(["residue", "c_s_limit"], meta)
        for r, v in enumerate(c_s_limits(freq)):
            t.add(r, v)
        return t
    if args.what == "profile":
        prof = diophantine_profile(freq, n_range=range(max(2, args.n_from), args.count + 1))
        t = Table(["n", "Pi_n"], meta | {"argmin": prof.argmin, "minimum": fmt(prof.minimum)})
        for n, v in prof.values:
            t.add(n, v)
        return t
    rep = dominance_analysis(freq, nu_range=(2.0**args.from_log2nu, 2.0**args.to))
    t = Table(["N", "D", "visible", "log2_nu_upper", "log2_nu_lower"], meta)
    for a, (lo, hi) in rep.visible:
        t.add(a.N, a.D, 1, math.log2(hi), math.log2(lo))
    for a in rep.hidden:
        t.add(a.N, a.D, 0, math.nan, math.nan)
    return t


def cmd_manifold(args) -> Table:
    from .manifold import compare_melnikov, splitting_grid

    nu = 2.0**args.log2nu
    if (nu <= LONG_NU or max(args.n_psi, args.n_theta) > LONG_GRID) and not args.long:
        raise CliError("this grid is long-running; pass --long to run it")
    params = make_params(args, nu)
    progress = None
    if args.verbose:
        def progress(done, total):
            print(f"rows {done}/{total}", file=sys.stderr, flush=True)
    grid = splitting_grid(params, args.n_psi, args.n_theta, precision=args.precision, order=args.order,
                          tol=args.tol, stable=args.stable, threads=args.threads,
                          checkpoint=args.checkpoint, progress=progress)
    meta = base_meta(args, "manifold") | {"log2_nu": args.log2nu, "grid": f"{args.n_psi}x{args.n_theta}",
                                          "order": args.order, "tol": args.tol, "stable": args.stable}
    if args.dump == "compare":
        rep = compare_melnikov(params, grid)
        t = Table(["component", "log_sup_numeric", "log_sup_series", "scaled_numeric", "scaled_series",
                   "gap", "mode_numeric", "mode_series"], meta)
        for r in rep.rows:
            t.add(r.component, r.log_sup_numeric, r.log_sup_series, r.scaled_numeric, r.scaled_series,
                  r.gap, r.mode_numeric, r.mode_series)
        return t
    t = Table(["psi0", "theta0", "F1u", "F2u", "F1s", "F2s", "dF1", "dF2"], meta, precision="extended")
    for row in grid.rows():
        t.add(*row)
    return t


def cmd_nodal(args) -> Table:
    from .geometry import nodal_lines

    params = make_params(args, 2.0**args.log2nu)
    comps = [1, 2] if args.component == 0 else [args.component]
    t = Table(["component", "line", "closed", "psi0", "theta0"],
              base_meta(args, "nodal") | {"log2_nu": args.log2nu, "resolution": args.resolution})
    for comp in comps:
        nl = nodal_lines(build_series(params, comp), resolution=args.resolution)
        for i, (line, closed) in enumerate(zip(nl.wrapped(), nl.closed)):
            for psi0, theta0 in line:
                t.add(comp, i, closed, float(psi0), float(theta0))
    return t


def cmd_volume(args) -> Table:
    from .geometry import volume_scan

    params = make_params(args)
    t = Table(["log2_nu", "V", "sign", "log_abs_V", "scaled_log_abs_V"],
              base_meta(args, "volume") | {"sign_convention": args.sign_convention})
    xs = _log2_range(args.from_log2nu, args.to, args.step)
    for x, s in zip(xs, volume_scan(xs, params, args.sign_convention)):
        t.add(x, s.V, s.sign, s.log_abs_V, math.sqrt(s.nu) * s.log_abs_V)
    return t


def cmd_appendix(args) -> Table:
    from . import companions as cp

    meta = base_meta(args, "appendix") | {"part": args.part}
    if args.part == "autonomous":
        mono = cp.Monomial(*[int(v) for v in args.monomial.split()])
        nus = np.linspace(args.nu_from, args.nu_to, args.points)
        c_fixed = None if args.free_c else -math.pi / 2
        fit = cp.autonomous_fit(mono, nus, c_fixed)
        power, mult = cp.asymptotic_form(mono)
        t = Table(["a", "b", "c", "d", "residual", "power", "exponent_multiplier"], meta)
        t.add(fit.a, fit.b, fit.c, fit.d, fit.residual, power, mult)
        return t
    if args.part == "duffing":
        s = cp.duffing_Ic_series(args.duffing_d, args.omega)
        t = Table(["d", "omega", "residues", "series", "largest_index", "largest_over_sum"], meta)
        t.add(args.duffing_d, args.omega, cp.duffing_Ic_residues(args.duffing_d, args.omega), s.value,
              s.largest_index, s.largest_over_sum)
        return t
    mode = cp.Cp(args.p) if args.regularity == "cp" else cp.Analytic(args.rho)
    t = Table(["nu", "k_M", "log_d", "constant"], meta)
    for x in _log2_range(args.from_log2nu, args.to, args.step):
        r = cp.regularity_dominant(mode, args.c_small, args.tau, 2.0**x)
        t.add(2.0**x, r.k_M, r.log_d, r.constant)
    return t


COMMANDS: dict[str, Callable] = {
    "scan": cmd_scan, "changes": cmd_changes, "psi": cmd_psi, "freq": cmd_freq,
    "manifold": cmd_manifold, "nodal": cmd_nodal, "volume": cmd_volume, "appendix": cmd_appendix,
}


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--freq", default="golden", help="named frequency or quadratic surd")
    common.add_argument("--eps", type=float, default=1e-3)
    common.add_argument("--c", type=float, default=5.0)
    common.add_argument("--d", type=float, default=7.0)
    common.add_argument("--out", help="output CSV path (default stdout)")
    common.add_argument("--precision", choices=("double", "extended"), default="extended")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (env HOPFSPLIT_THREADS also works)")
    common.add_argument("--long", action="store_true", help="allow long-running computations")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hopfsplit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def rng(sp, lo, hi, step):
        sp.add_argument("--from-log2nu", type=float, default=lo)
        sp.add_argument("--to", type=float, default=hi)
        sp.add_argument("--step", type=float, default=step)

    s = sub.add_parser("scan", parents=[common], help="amplitude and dominant harmonic versus nu")
    rng(s, -24.0, -4.0, 0.25)
    s.add_argument("--component", type=int, choices=(0, 1, 2), default=0, help="0 = both")
    s.add_argument("--truncation-tol", type=float, default=1e-10)

    s = sub.add_parser("changes", parents=[common], help="changes of dominant harmonic")
    rng(s, -24.0, -16.0, 0.25)
    s.add_argument("--component", type=int, choices=(0, 1, 2), default=0)
    s.add_argument("--method", choices=("approximant", "nodal", "dominant"), default="approximant",
                   help="approximant: best-approximant switches; nodal/dominant: full-series labels")
    s.add_argument("--mode", choices=("amplitude", "psi", "prefactor"), default="amplitude")
    s.add_argument("--log2-step", type=float, default=1e-3)

    s = sub.add_parser("psi", parents=[common], help="universal splitting function")
    s.add_argument("--what", choices=("table", "max", "surface", "golden"), default="table")
    s.add_argument("--L-from", dest="L_from", type=float, default=1e-3)
    s.add_argument("--L-to", dest="L_to", type=float, default=10.0)
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--m1", type=int, default=1, help="numerator used by the second component")
    s.add_argument("--c-values", default="3 4 5 6 7")
    s.add_argument("--d-values", default="3 5 7 9")

    s = sub.add_parser("freq", parents=[common], help="continued fractions and approximants")
    s.add_argument("--what", choices=("approximants", "cs-limits", "profile", "dominance"),
                   default="approximants")
    s.add_argument("--count", type=int, default=30)
    s.add_argument("--n-from", type=int, default=2)
    s.add_argument("--from-log2nu", type=float, default=-34.0)
    s.add_argument("--to", type=float, default=-10.0)

    s = sub.add_parser("manifold", parents=[common], help="direct manifold computation")
    s.add_argument("--log2nu", type=float, default=-4.0)
    s.add_argument("--n-psi", type=int, default=64)
    s.add_argument("--n-theta", type=int, default=64)
    s.add_argument("--order", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-30)
    s.add_argument("--stable", choices=("reversibility", "integrate"), default="reversibility")
    s.add_argument("--dump", choices=("grid", "compare"), default="compare")
    s.add_argument("--checkpoint", help="file prefix for resumable seed integration")

    s = sub.add_parser("nodal", parents=[common], help="nodal lines of the series")
    s.add_argument("--log2nu", type=float, default=-4.0)
    s.add_argument("--component", type=int, choices=(0, 1, 2), default=0)
    s.add_argument("--resolution", type=int, default=256)

    s = sub.add_parser("volume", parents=[common], help="splitting volume versus nu")
    rng(s, -12.0, -7.0, 0.01)
    s.add_argument("--sign-convention", choices=("signed", "abs_s"), default="signed")

    s = sub.add_parser("appendix", parents=[common], help="autonomous, Duffing and regularity models")
    s.add_argument("--part", choices=("autonomous", "duffing", "regularity"), default="autonomous")
    s.add_argument("--monomial", default="0 0 5 0", help="exponents k1 k2 l1 l2")
    s.add_argument("--nu-from", type=float, default=0.05)
    s.add_argument("--nu-to", type=float, default=0.2)
    s.add_argument("--points", type=int, default=40)
    s.add_argument("--free-c", action="store_true")
    s.add_argument("--duffing-d", type=float, default=7.0)
    s.add_argument("--omega", type=float, default=5.0)
    s.add_argument("--regularity", choices=("cp", "analytic"), default="cp")
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--c-small", type=float, default=1.0)
    s.add_argument("--tau", type=float, default=1.0)
    rng(s, -10.0, -2.0, 1.0)
    return p


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**{k: _coerce(sub, k, v) for k, v in cfg.items()})
        args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        raise CliError("--threads must be positive")
    return args


def _coerce(sub: argparse.ArgumentParser, dest: str, value: str):
    for a in sub._actions:
        if a.dest != dest:
            continue
        if isinstance(a, argparse._StoreTrueAction):
            return value.lower() in ("1", "true", "yes", "on")
        conv = a.type or str
        try:
            v = conv(value)
        except ValueError as exc:
            raise CliError(f"bad value for {dest}: {value!r}") from exc
        if a.choices is not None and v not in a.choices:
            raise CliError(f"bad value for {dest}: {value!r}")
        return v
    return value


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
        table = COMMANDS[args.command](args)
        emit(table, args.out)
    except CliError as exc:
        print(f"hopfsplit: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"hopfsplit: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
