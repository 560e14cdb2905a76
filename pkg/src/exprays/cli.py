"""Command line entry point: one subcommand per operation.

Every command prints a one-line JSON summary on standard output.  Exit status
is 0 on success, 1 on a usage or input error and 2 when a numerical
procedure fails.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import serialize as ser
from .address import Address, parse_addresses
from .config import ConfigError, read_config
from .errors import ExpRaysError, NumericFailure
from .hyperbolicity import growth_report, nonrecurrence_distance, orbit_sample
from .params import (land_param_ray, trace_param_ray, wake_test_dynamical,
                     wake_test_parametric)
from .polynomial import (address_to_angle, d_adic_angle, landing_pattern_compare,
                         renormalizability_indicator, trace_poly_ray)
from .puzzle import (Puzzle, build_graph, combinatorial_equivalence_level, markov_check,
                     nesting_check, nonrecurrence_certificate, piece_samples)
from .rays import find_periodic_orbits, geometric_potentials, land_ray, trace_ray
from .render import RenderSpec, parse_resolution, parse_viewport, render, write_ppm


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_COMPLEX_RE = re.compile(r"^[-+]?(\d|\.\d|inf|nan)", re.I)


def parse_complex(text: str) -> complex:
    """Accepts "-2", "-2+0i", "1.5-3j", "(1+2j)", "i"."""
    t = text.strip().replace(" ", "").replace("I", "i").replace("i", "j")
    t = t.strip("()")
    if t in ("j", "+j"):
        return 1j
    if t == "-j":
        return -1j
    try:
        return complex(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def parse_address(text: str) -> Address:
    try:
        return Address.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not an exact rational: {text!r}") from None


def _num(x):
    """17 significant digits for the printed summary."""
    if isinstance(x, float):
        if math.isfinite(x):
            return float(f"{x:.17g}")
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, complex):
        return {"re": _num(x.real), "im": _num(x.imag)}
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _summary(command: str, fields: dict, status: str = "ok") -> str:
    # landing commands report their own status ("Landed", "NoConvergence", ...)
    return json.dumps(_num({"command": command, "status": status, **fields}), sort_keys=True)


def _addresses(args) -> list[Address]:
    out = []
    if getattr(args, "addresses_file", None):
        with open(args.addresses_file) as fh:
            out += parse_addresses(fh.read())
    for text in getattr(args, "address", None) or []:
        out += parse_addresses(text)
    if not out:
        raise UsageError("no addresses given (use --address or --addresses-file)")
    return out


def _write(args, obj):
    if getattr(args, "out", None):
        ser.write_json(args.out, obj)


# commands

def cmd_trace_ray(args):
    tr = trace_ray(args.c, args.address_one, args.tmin, args.tmax, args.samples, args.tol,
                   args.max_seg)
    _write(args, ser.ray_trace_to_json(tr))
    return dict(samples=len(tr.samples), depth=tr.depth,
                max_err=max(s.err for s in tr.samples), out=args.out)


def cmd_land_ray(args):
    res = land_ray(args.c, args.address_one, args.tol)
    d = ser.landing_to_json(res)
    _write(args, d)
    fields = {k: d[k] for k in ("status", "re", "im", "residual", "mult_re", "mult_im")}
    if not res.landed:
        fields["note"] = res.note
    return fields, (0 if res.landed else 2)


def cmd_find_orbits(args):
    seeds = [parse_complex(s) for s in re.split(r"[;,\s]+", args.seeds.strip()) if s]
    orbits = find_periodic_orbits(args.c, args.period, seeds, args.tol, args.band)
    payload = {"kind": "PeriodicOrbits", "c": ser.cplx(complex(args.c)), "period": args.period,
               "orbits": [ser.orbit_to_json(o) for o in orbits]}
    _write(args, payload)
    return dict(count=len(orbits),
                orbits=[{"point": o.points[0], "abs_multiplier": abs(o.multiplier),
                         "classification": o.classification.value,
                         "minimal_period": o.minimal_period} for o in orbits])


def cmd_build_graph(args):
    g = build_graph(args.c, _addresses(args))
    _write(args, ser.graph_to_json(g, args.with_curves))
    return dict(graph_id=g.graph_id, rays=len(g.addresses),
                classes=[[str(a) for a in cl] for cl in g.classes])


def _puzzle(args):
    return Puzzle(build_graph(args.c, _addresses(args)), args.kmax)


def cmd_build_puzzle(args):
    pz = _puzzle(args)
    lvl = pz.level(args.level)
    out = ser.level_to_json(lvl, args.with_curves)
    fields = dict(level=args.level, pieces=len(lvl.pieces), rays=len(lvl.curves))
    if args.check:
        samples = piece_samples(pz, args.level, 20, args.seed) if args.level >= 1 else None
        nest = nesting_check(pz, args.level, samples=samples) if args.level >= 1 else None
        mk = markov_check(pz, args.level, samples=samples) if args.level >= 1 else None
        out["checks"] = {"nesting": None if nest is None else nest.ok,
                         "markov": None if mk is None else mk.ok}
        fields["checks"] = out["checks"]
    _write(args, out)
    return fields


def cmd_locate(args):
    lvl = _puzzle(args).level(args.level)
    loc = lvl.locate(args.z)
    return dict(label=loc.piece.label, margin=loc.margin,
                bounding_addresses=[str(a) for a in loc.piece.bounding_addresses])


def cmd_certify(args):
    g = build_graph(args.c, _addresses(args))
    cert = nonrecurrence_certificate(args.c, g, args.nmax, args.M, args.kmax)
    d = ser.certificate_to_json(cert)
    _write(args, d)
    if d["kind"] == "Undecided":
        return dict(result="Undecided", reason=cert.reason)
    return dict(result="Certified", level=cert.level, margin=cert.min_margin,
                singular_piece=d["singular_piece"]["label"])


def cmd_compare(args):
    r = combinatorial_equivalence_level(args.c, args.c2, _addresses(args), args.level, args.kmax)
    d = ser.equivalence_to_json(r)
    _write(args, d)
    d = dict(d)
    d["result"] = d.pop("kind")
    return d


def cmd_trace_param(args):
    tr = trace_param_ray(args.address_one, args.tmin, args.tmax, args.samples, args.tol)
    _write(args, ser.param_trace_to_json(tr))
    return dict(samples=len(tr.samples), max_err=max(s.err for s in tr.samples),
                last=tr.samples[-1].c, out=args.out)


def cmd_land_param(args):
    ln = land_param_ray(args.address_one, args.tol)
    d = ser.landing_to_json(ln.result)
    d["warning"] = ln.warning
    _write(args, d)
    fields = {k: d[k] for k in ("status", "re", "im", "residual", "mult_re", "mult_im",
                                "warning")}
    return fields, (0 if ln.landed else 2)


def cmd_wake(args):
    if args.method == "parametric":
        v = wake_test_parametric(args.c, args.plus, args.minus)
    else:
        v = wake_test_dynamical(args.c, args.plus, args.minus)
    d = ser.wake_to_json(v)
    _write(args, d)
    return dict(inside=d["inside"], method=d["method"], evidence=d["evidence"])


def cmd_orbit_sample(args):
    s = orbit_sample(args.c, args.M)
    d = ser.orbit_sample_to_json(s)
    fields = dict(points=len(s.points), escaped=s.escaped, min_re=s.min_re,
                  min_distance=s.min_distance)
    if not s.escaped:
        nr = nonrecurrence_distance(s)
        d["nonrecurrence"] = ser.nonrecurrence_to_json(nr)
        fields.update(m_star=nr.m_star, recurrent=nr.recurrent)
    _write(args, d)
    return fields


def cmd_growth(args):
    if args.starts:
        starts = [parse_complex(s) for s in re.split(r"[;,\s]+", args.starts.strip()) if s]
    else:
        s = orbit_sample(args.c, args.M)
        starts = list(s.points)
        if not starts:
            raise UsageError("the orbit sample is empty")
    r = growth_report(args.c, starts, args.kmax)
    _write(args, ser.growth_to_json(r))
    return dict(k_bar=r.k_bar, eta=r.eta, positive=r.positive, violations=len(r.violations))


def cmd_angle_map(args):
    if args.theta is not None:
        a = d_adic_angle(args.theta, args.D)
        d = ser.angle_to_json(a)
    else:
        theta = address_to_angle(args.address_one, args.D)
        d = ser.angle_to_json(d_adic_angle(theta, args.D))
    _write(args, d)
    return dict(theta=d["theta"], address=d["address"], boundary_digits=d["boundary_digits"])


def cmd_trace_poly(args):
    ts = geometric_potentials(args.tmin, args.tmax, args.samples)
    tr = trace_poly_ray(args.D, args.c, args.theta, ts, args.tol)
    _write(args, ser.poly_trace_to_json(tr))
    return dict(samples=len(tr.samples), max_err=max(s.err for s in tr.samples),
                last=tr.samples[-1].z, out=args.out)


def cmd_renorm(args):
    rows = renormalizability_indicator(args.address_one, args.D, args.qmax, args.kmax)
    d = {"kind": "RenormalizabilityIndicator", "address": str(args.address_one), "D": args.D,
         "rows": [{"q": q, "witnesses": ks} for q, ks in rows]}
    _write(args, d)
    return dict(rows=d["rows"])


def _pairs(text: str):
    out = []
    for chunk in re.split(r"[;\n]", text):
        chunk = chunk.split("#", 1)[0].strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise UsageError(f"a pair needs two comma separated addresses: {chunk!r}")
        out.append((Address.parse(parts[0]), Address.parse(parts[1])))
    return out


def cmd_compare_landing(args):
    text = args.pairs
    if args.pairs_file:
        with open(args.pairs_file) as fh:
            text = (text or "") + "\n" + fh.read()
    if not text:
        raise UsageError("no pairs given")
    rows = landing_pattern_compare(args.D, args.c_poly, args.c_exp, _pairs(text))
    d = {"kind": "LandingPatternReport", "D": args.D, "c_poly": ser.cplx(args.c_poly),
         "c_exp": ser.cplx(args.c_exp), "pairs": [ser.pair_comparison_to_json(r) for r in rows]}
    _write(args, d)
    return dict(pairs=[{"pair": r["pair"], "agree": r["agree"], "poly": r["poly_colands"],
                        "exp": r["exp_colands"]} for r in d["pairs"]])


def cmd_render(args):
    center, w, h = parse_viewport(args.viewport)
    spec = RenderSpec(args.plane, center, w, h, parse_resolution(args.res), c=args.c,
                      max_iter=args.max_iter, escape_radius=args.escape_radius,
                      overlays=tuple(args.overlay or ()), palette=args.palette)
    img = render(spec)
    if not args.out:
        raise UsageError("render needs --out")
    write_ppm(args.out, img)
    return dict(width=img.shape[1], height=img.shape[0], out=args.out)


# parser

def _common(p, *, c=False, address=False, addresses=False, out=True, tol=None):
    if c:
        p.add_argument("--c", type=parse_complex, required=c == "required",
                       default=None if c == "required" else 0j, help="parameter, e.g. -2+0i")
    if address:
        p.add_argument("--address", dest="address_one", type=parse_address, required=True,
                       help='address such as "| 0 1" or "1 | 0"')
    if addresses:
        p.add_argument("--address", action="append",
                       help="graph addresses; repeatable, ';' separates several")
        p.add_argument("--addresses-file", help="file with one address per line")
        p.add_argument("--kmax", type=int, default=3, help="entry cutoff of the preimage fan")
    if tol is not None:
        p.add_argument("--tol", type=float, default=tol)
    if out:
        p.add_argument("--out", help="output file (written atomically)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exprays", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key = value job file; flags override it")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized sampling")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("trace-ray", allow_abbrev=False, help="trace a dynamic ray")
    _common(p, c="required", address=True, tol=1e-9)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--max-seg", type=float, default=0.1)
    p.set_defaults(func=cmd_trace_ray)

    p = sub.add_parser("land-ray", allow_abbrev=False, help="landing point of a (pre)periodic dynamic ray")
    _common(p, c="required", address=True, tol=1e-9)
    p.set_defaults(func=cmd_land_ray)

    p = sub.add_parser("find-orbits", allow_abbrev=False, help="periodic orbits by Newton from seeds")
    _common(p, c="required", tol=1e-10)
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--seeds", required=True, help="seeds separated by ';'")
    p.add_argument("--band", type=float, default=None, help="indifferent band half-width")
    p.set_defaults(func=cmd_find_orbits)

    p = sub.add_parser("build-graph", allow_abbrev=False, help="land a shift-closed set of periodic rays")
    _common(p, c="required", addresses=True)
    p.add_argument("--with-curves", action="store_true")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("build-puzzle", allow_abbrev=False, help="puzzle pieces of one level")
    _common(p, c="required", addresses=True)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--with-curves", action="store_true")
    p.add_argument("--check", action="store_true", help="run nesting and Markov sampling checks")
    p.set_defaults(func=cmd_build_puzzle)

    p = sub.add_parser("locate", allow_abbrev=False, help="puzzle piece containing a point")
    _common(p, c="required", addresses=True, out=False)
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--z", type=parse_complex, required=True)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("certify-nonrecurrence", allow_abbrev=False, help="combinatorial non-recurrence evidence")
    _common(p, c="required", addresses=True)
    p.add_argument("--nmax", type=int, default=3)
    p.add_argument("--M", type=int, default=10, help="orbit horizon")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("compare-combinatorics", allow_abbrev=False, help="compare the puzzles of two parameters")
    _common(p, c="required", addresses=True)
    p.add_argument("--c2", type=parse_complex, required=True)
    p.add_argument("--level", type=int, default=2)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("trace-param-ray", allow_abbrev=False, help="trace a parameter ray")
    _common(p, address=True, tol=1e-9)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--samples", type=int, default=50)
    p.set_defaults(func=cmd_trace_param)

    p = sub.add_parser("land-param-ray", allow_abbrev=False, help="landing parameter of a parameter ray")
    _common(p, address=True, tol=1e-9)
    p.set_defaults(func=cmd_land_param)

    p = sub.add_parser("wake-test", allow_abbrev=False, help="wake membership of a parameter")
    _common(p, c="required")
    p.add_argument("--plus", type=parse_address, required=True)
    p.add_argument("--minus", type=parse_address, required=True)
    p.add_argument("--method", choices=("dynamical", "parametric"), default="dynamical")
    p.set_defaults(func=cmd_wake)

    p = sub.add_parser("orbit-sample", allow_abbrev=False, help="postsingular orbit and non-recurrence distance")
    _common(p, c="required")
    p.add_argument("--M", type=int, default=50)
    p.set_defaults(func=cmd_orbit_sample)

    p = sub.add_parser("growth-report", allow_abbrev=False, help="derivative growth along orbits")
    _common(p, c="required")
    p.add_argument("--starts", help="start points separated by ';' (default: the orbit of c)")
    p.add_argument("--M", type=int, default=10, help="orbit horizon for the default starts")
    p.add_argument("--kmax", type=int, default=10)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("angle-map", allow_abbrev=False, help="D-adic angle <-> address")
    _common(p)
    p.add_argument("--D", type=int, default=2)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta", type=parse_fraction)
    g.add_argument("--address", dest="address_one", type=parse_address)
    p.set_defaults(func=cmd_angle_map)

    p = sub.add_parser("trace-poly-ray", allow_abbrev=False, help="dynamic ray of z^D + c")
    _common(p, c="required", tol=1e-9)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--theta", type=parse_fraction, required=True)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--samples", type=int, default=50)
    p.set_defaults(func=cmd_trace_poly)

    p = sub.add_parser("renorm-indicator", allow_abbrev=False, help="close returns |s - sigma^k s| < 2/D^q")
    _common(p, address=True)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--qmax", type=int, default=4)
    p.add_argument("--kmax", type=int, default=8)
    p.set_defaults(func=cmd_renorm)

    p = sub.add_parser("compare-landing", allow_abbrev=False, help="co-landing in the polynomial and exponential planes")
    _common(p)
    p.add_argument("--D", type=int, default=2)
    p.add_argument("--c-poly", type=parse_complex, required=True)
    p.add_argument("--c-exp", type=parse_complex, required=True)
    p.add_argument("--pairs", help='pairs "s1, s2" separated by ";"')
    p.add_argument("--pairs-file")
    p.set_defaults(func=cmd_compare_landing)

    p = sub.add_parser("render", allow_abbrev=False, help="escape-time image with overlays (PPM)")
    _common(p, c=True)
    p.add_argument("--plane", choices=("dynamical", "parameter"), default="dynamical")
    p.add_argument("--viewport", default="0,0,8,6", help="cx,cy,width,height")
    p.add_argument("--res", default="800x600")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--escape-radius", type=float, default=50.0)
    p.add_argument("--overlay", action="append", help="JSON artifact to draw; repeatable")
    p.add_argument("--palette", default="default", choices=("default", "gray"))
    p.set_defaults(func=cmd_render)
    return parser


def _value_options(parser) -> set[str]:
    opts = set()
    actions = list(parser._actions)
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            for sp in a.choices.values():
                actions += sp._actions
    for a in actions:
        if a.nargs != 0:
            opts.update(s for s in a.option_strings if s.startswith("--"))
    return opts


def preprocess_argv(argv, parser) -> list[str]:
    """Glue values that start with '-' (like "-2+0i") to their option."""
    opts = _value_options(parser)
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in opts and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1] not in opts and _COMPLEX_RE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _apply_config(parser, argv):
    """Defaults from --config for the chosen subcommand; explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    return read_config(known.config)


def _coerce_config(args, parser, values: dict, argv: list[str]):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[args.command]
    given = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    for a in sp._actions + parser._actions:
        if not a.option_strings:
            continue
        key = a.dest
        names = {key} | {s.lstrip("-").replace("-", "_") for s in a.option_strings}
        hit = next((n for n in names if n in values), None)
        if hit is None or any(s in given for s in a.option_strings):
            continue
        raw = values[hit]
        if a.nargs == 0:
            val = raw.lower() in ("1", "true", "yes", "on")
        else:
            conv = a.type or str
            val = conv(raw)
            if a.choices is not None and val not in a.choices:
                raise UsageError(f"config value {raw!r} not allowed for {hit}")
            if isinstance(a, argparse._AppendAction):
                val = [val]
        setattr(args, key, val)
    missing = [a for a in sp._actions if a.required and getattr(args, a.dest, None) is None]
    if missing:
        raise UsageError("missing required option " + missing[0].option_strings[0])


def _relax_required(parser):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        for a in sp._actions:
            if a.required and a.option_strings:
                a.required = False
        for g in sp._mutually_exclusive_groups:
            g.required = False


def run_command(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # best guess for error reports raised before parsing finishes
    names = next(a.choices for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((a for a in argv if a in names), None)
    try:
        argv = preprocess_argv(argv, parser)
        values = _apply_config(parser, argv)
        if values:
            # required options may come from the job file
            _relax_required(parser)
        args = parser.parse_args(argv)
        command = args.command
        if command is None:
            raise UsageError("a subcommand is required (see --help)")
        if values:
            _coerce_config(args, parser, values, argv)
        if "c" in vars(args) and args.c is None:
            raise UsageError("--c is required")
        result = args.func(args)
        code = 0
        if isinstance(result, tuple):
            result, code = result
        print(_summary(command, result, "ok" if code == 0 else "failed"))
        return code
    except (UsageError, ConfigError, argparse.ArgumentTypeError) as exc:
        _fail(command, "usage", exc)
        return 1
    except NumericFailure as exc:
        _fail(command, type(exc).__name__, exc)
        return 2
    except (ExpRaysError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        _fail(command, type(exc).__name__, exc)
        return 1


def _fail(command, kind, exc):
    msg = str(exc)
    print(json.dumps({"command": command, "status": "error", "error": kind, "message": msg},
                     sort_keys=True))
    print(f"exprays: {msg}", file=sys.stderr)


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
