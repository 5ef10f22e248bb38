"""Command-line front end.

Exit codes: 0 hit / success, 2 bound exhausted, 3 escaped, 1 error
(including parse errors, failed verification and oracle mismatches).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import gadgets
from .compiler import CompileOptions, compile_program, step_simulate
from .errors import OracleHalt, PinballError
from .numeric import parse_backend
from .pda import load_program, oracle_run, oracle_step, shipped_program
from .render import render_svg
from .sceneio import compiled_scene_file, fmt_scalar, read_scene_file, write_scene_file
from .simulator import dump_trace, parse_trace, run

EXIT = {"hit": 0, "bound": 2, "escaped": 3, "error": 1}


def _frac(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {s!r}") from None


def _program(ref: str):
    if ref.startswith("shipped:"):
        return shipped_program(ref.split(":", 1)[1])
    return load_program(ref)


def _fmt_cfg(c):
    bits = lambda st: "".join(map(str, st))
    return f"{c.state} A={bits(c.stack_a)} B={bits(c.stack_b)}"


def cmd_simulate(a) -> int:
    sf = read_scene_file(a.scene)
    backend = parse_backend(a.backend or sf.backend, a.precision or sf.precision)
    scene = sf.build(backend)
    outcome, trace = run(scene, sf.initial_ball(backend), a.max_events, a.max_time)
    print(outcome.describe(backend))
    if a.trace:
        with open(a.trace, "w", encoding="utf-8") as fh:
            fh.write(dump_trace(trace, backend))
    return EXIT[outcome.variant]


def _gadget_params(pairs):
    kw = {}
    for p in pairs:
        if "=" not in p:
            raise PinballError(f"parameter {p!r} is not key=value")
        k, v = p.split("=", 1)
        try:
            kw[k] = Fraction(v)
        except ValueError:
            kw[k] = v
    return kw


def cmd_verify_gadget(a) -> int:
    if a.name not in gadgets.CATALOG:
        print(f"unknown gadget {a.name!r}; known: {', '.join(sorted(gadgets.CATALOG))}", file=sys.stderr)
        return 1
    g = gadgets.CATALOG[a.name](**_gadget_params(a.params))
    backend = parse_backend(a.backend, a.precision) if a.backend else None
    rep = gadgets.verify_transfer(g, a.samples, backend)
    print(rep.describe())
    machine = {
        "gadget": rep.gadget,
        "backend": rep.backend,
        "samples": len(rep.samples),
        "passed": rep.passed,
        "space_residual": float(rep.max_space_residual),
        "time_residual": float(rep.max_time_residual),
        "speed_residual": float(rep.max_speed_residual),
        "orientation": rep.orientation,
        "maps": {
            ("->".join(k) if isinstance(k, tuple) else k): {f: fmt_scalar(getattr(m, f)) for f in ("space_slope", "space_intercept", "time_slope", "time_intercept")}
            for k, m in g.maps.items()
        },
        "info": {k: (fmt_scalar(v) if isinstance(v, (int, Fraction)) and not isinstance(v, bool) else str(v)) for k, v in g.info.items()},
    }
    print(json.dumps(machine, sort_keys=True))
    return 0 if rep.passed else 1


def _compile(a, p):
    opts = CompileOptions(time_mode=a.time_mode)
    return compile_program(p, a.kappa, a.eps, a.v, opts)


def cmd_compile(a) -> int:
    p = _program(a.program)
    m = _compile(a, p)
    for k, v in m.summary().items():
        print(f"{k}: {fmt_scalar(v) if isinstance(v, Fraction) else v}")
    if a.out:
        write_scene_file(a.out, compiled_scene_file(m))
        print(f"scene written to {a.out}")
    return 0


def cmd_render(a) -> int:
    sf = read_scene_file(a.scene)
    pts = None
    if a.trace:
        with open(a.trace, encoding="utf-8") as fh:
            _, events = parse_trace(fh.read())
        pts = ([sf.ball.pos] if sf.ball is not None else []) + [e.point for e in events]
    svg = render_svg(sf.components, pts, sf.target)
    with open(a.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return 0


def cmd_oracle(a) -> int:
    p = _program(a.program)
    c = p.initial
    print(f"0 {_fmt_cfg(c)}")
    try:
        for k in range(1, a.steps + 1):
            c = oracle_step(p, c)
            print(f"{k} {_fmt_cfg(c)}")
    except OracleHalt as h:
        print(f"halt: {h.verdict}")
    return 0


def cmd_compare(a) -> int:
    p = _program(a.program)
    m = _compile(a, p)
    expect = oracle_run(p, p.initial, a.steps)
    rep = step_simulate(m, p.initial, len(expect)) if expect else None
    got = rep.configs if rep else []
    bad = 0
    for k, (e, g) in enumerate(zip(expect, got), 1):
        ok = e == g
        bad += not ok
        if a.verbose or not ok:
            print(f"{k} {'ok ' if ok else 'BAD'} {_fmt_cfg(g)}")
    if len(got) < len(expect):
        bad += 1
        print(f"simulation stopped after {len(got)} steps: {rep.outcome.describe()}")
    refl = sorted(set(rep.reflections)) if rep else []
    print(f"steps={len(got)} mismatches={bad} reflections_per_step={refl}")
    return 0 if bad == 0 and len(refl) <= 1 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pinball", description="Exact pinball simulator and PDA compiler")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="run a scene file")
    s.add_argument("scene")
    s.add_argument("--max-events", type=int, required=True)
    s.add_argument("--max-time", type=_frac, required=True)
    s.add_argument("--backend", choices=["exact", "bigfloat"])
    s.add_argument("--precision", type=int)
    s.add_argument("--trace")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("verify-gadget", help="check a catalogue gadget's transfer map")
    s.add_argument("name")
    s.add_argument("params", nargs="*", help="key=value constructor arguments")
    s.add_argument("--samples", type=int, default=8)
    s.add_argument("--backend", choices=["exact", "bigfloat"])
    s.add_argument("--precision", type=int, default=256)
    s.set_defaults(fn=cmd_verify_gadget)

    def machine_opts(s):
        s.add_argument("program", help="program file or shipped:<name>")
        s.add_argument("--kappa", type=_frac, default=Fraction(1, 100))
        s.add_argument("--eps", type=_frac, default=Fraction(1, 15))
        s.add_argument("--v", type=_frac, default=Fraction(1))
        s.add_argument("--time-mode", choices=["bumper", "moving", "ray"], default="bumper")

    s = sub.add_parser("compile", help="compile a PDA program to a scene")
    machine_opts(s)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_compile)

    s = sub.add_parser("render", help="draw a scene (and trace) as SVG")
    s.add_argument("scene")
    s.add_argument("--trace")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_render)

    s = sub.add_parser("oracle", help="run a program with the reference interpreter")
    s.add_argument("program")
    s.add_argument("--steps", type=int, default=10)
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("compare", help="step-simulate a compiled program against the interpreter")
    machine_opts(s)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(fn=cmd_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        return a.fn(a)
    except PinballError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
