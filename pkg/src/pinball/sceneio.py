"""Scene files: a JSON key-value tree with exact scalars.

Every scalar is written as a ``"num/den"`` (or integer) string so that a
parse/serialize/parse cycle is the identity.  On input, decimal literals such
as ``"0.75"`` are also accepted and read exactly.

Top level::

    format       "pinball-scene/1"
    backend      "exact" | "bigfloat"
    precision    mantissa bits for bigfloat
    speed_cap    eps, or null
    ref_speed    v used with speed_cap, or null
    constant_speed
    ball         {pos: [x, y], vel: [x, y], time}
    target       [x, y] or null
    components   list of {type, id, ...}
    meta         optional string -> string map (ignored by the simulator)

Component fields: wall {a, b}; parabola {a, b, c, x0, x1}; gate {start, end};
moving_wall {a, b, motion_dir, schedule: {t_start, period, phases: [{p0, p1,
time_fn, disp_fn}]}}; bumper {a, b, sign, schedule: {t_start, active, period},
effect_accel}.  Functions are {num: [...], den: [...]} ascending coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .components import (
    BallState,
    Bumper,
    BumperSchedule,
    MotionPhase,
    MovingWall,
    OneWayGate,
    Parabola,
    Schedule,
    Wall,
)
from .errors import BackendMismatch, InvalidGeometry, InvalidScene, ParseError, PinballError
from .numeric import EXACT, RationalTimeFunction, Vec2, _parse_fraction, parse_backend
from .simulator import build_scene

SCENE_FORMAT = "pinball-scene/1"

TOP_FIELDS = {"format", "backend", "precision", "speed_cap", "ref_speed", "constant_speed", "ball", "target", "components", "meta"}
COMPONENT_FIELDS = {
    "wall": {"type", "id", "a", "b"},
    "parabola": {"type", "id", "a", "b", "c", "x0", "x1"},
    "gate": {"type", "id", "start", "end"},
    "moving_wall": {"type", "id", "a", "b", "motion_dir", "schedule"},
    "bumper": {"type", "id", "a", "b", "sign", "schedule", "effect_accel"},
}


@dataclass
class SceneFile:
    components: list
    ball: Optional[BallState] = None
    target: Optional[Vec2] = None
    backend: str = "exact"
    precision: int = 256
    speed_cap: Optional[Fraction] = None
    ref_speed: Optional[Fraction] = None
    constant_speed: bool = False
    meta: Dict[str, str] = field(default_factory=dict)

    def backend_obj(self):
        return parse_backend(self.backend, self.precision)

    def build(self, backend=None):
        """Validated simulator ``Scene``; semantic errors name the component id."""
        backend = backend or self.backend_obj()
        return build_scene(
            self.components,
            target=self.target,
            backend=backend,
            speed_cap_ratio=self.speed_cap,
            ref_speed=self.ref_speed,
            constant_speed=self.constant_speed,
            allow_exact_moving=False,
        )

    def initial_ball(self, backend=None):
        if self.ball is None:
            raise InvalidScene("scene file has no ball")
        return self.ball.convert(backend or self.backend_obj())


# --------------------------------------------------------------------------
# writing


def fmt_scalar(x) -> str:
    q = _parse_fraction(x)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _vec(v: Vec2):
    return [fmt_scalar(v.x), fmt_scalar(v.y)]


def _fn(f: RationalTimeFunction):
    return {"num": [fmt_scalar(c) for c in f.numerator], "den": [fmt_scalar(c) for c in f.denominator]}


def component_to_dict(c) -> dict:
    if isinstance(c, Wall):
        return {"type": "wall", "id": c.id, "a": _vec(c.a), "b": _vec(c.b)}
    if isinstance(c, Parabola):
        return {"type": "parabola", "id": c.id, **{k: fmt_scalar(getattr(c, k)) for k in ("a", "b", "c", "x0", "x1")}}
    if isinstance(c, OneWayGate):
        return {"type": "gate", "id": c.id, "start": _vec(c.start), "end": _vec(c.end)}
    if isinstance(c, MovingWall):
        s = c.schedule
        return {
            "type": "moving_wall",
            "id": c.id,
            "a": _vec(c.a),
            "b": _vec(c.b),
            "motion_dir": _vec(c.motion_dir),
            "schedule": {
                "t_start": fmt_scalar(s.t_start),
                "period": fmt_scalar(s.period),
                "phases": [
                    {"p0": fmt_scalar(ph.p0), "p1": fmt_scalar(ph.p1), "time_fn": _fn(ph.time_fn), "disp_fn": _fn(ph.disp_fn)}
                    for ph in s.phases
                ],
            },
        }
    if isinstance(c, Bumper):
        s = c.schedule
        return {
            "type": "bumper",
            "id": c.id,
            "a": _vec(c.a),
            "b": _vec(c.b),
            "sign": c.sign,
            "schedule": {"t_start": fmt_scalar(s.t_start), "active": fmt_scalar(s.active), "period": fmt_scalar(s.period)},
            "effect_accel": _fn(c.effect_accel),
        }
    raise InvalidScene(f"cannot serialise {type(c).__name__}")


def scene_to_dict(sf: SceneFile) -> dict:
    ball = None
    if sf.ball is not None:
        ball = {"pos": _vec(sf.ball.pos), "vel": _vec(sf.ball.vel), "time": fmt_scalar(sf.ball.time)}
    out = {
        "format": SCENE_FORMAT,
        "backend": sf.backend,
        "precision": sf.precision,
        "speed_cap": fmt_scalar(sf.speed_cap) if sf.speed_cap is not None else None,
        "ref_speed": fmt_scalar(sf.ref_speed) if sf.ref_speed is not None else None,
        "constant_speed": sf.constant_speed,
        "ball": ball,
        "target": _vec(sf.target) if sf.target is not None else None,
        "components": [component_to_dict(c) for c in sf.components],
    }
    if sf.meta:
        out["meta"] = dict(sorted(sf.meta.items()))
    return out


def serialize_scene(sf: SceneFile) -> str:
    return json.dumps(scene_to_dict(sf), indent=1) + "\n"


# --------------------------------------------------------------------------
# reading


class _Where:
    def __init__(self, cid="scene"):
        self.cid = cid

    def fail(self, msg):
        raise InvalidScene(f"{self.cid}: {msg}")


def _scalar(x, w: _Where, name):
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        w.fail(f"{name} must be a 'num/den' string or integer")
    try:
        return _parse_fraction(x)
    except BackendMismatch:
        w.fail(f"{name}: cannot read scalar {x!r}")


def _read_vec(x, w, name) -> Vec2:
    if not isinstance(x, list) or len(x) != 2:
        w.fail(f"{name} must be a pair")
    return Vec2(_scalar(x[0], w, name), _scalar(x[1], w, name))


def _read_fn(x, w, name) -> RationalTimeFunction:
    if not isinstance(x, dict) or set(x) - {"num", "den"} or "num" not in x:
        w.fail(f"{name} must be {{num: [...], den: [...]}}")
    num = tuple(_scalar(c, w, name) for c in x["num"])
    den = tuple(_scalar(c, w, name) for c in x.get("den", ["1"]))
    try:
        return RationalTimeFunction(num, den)
    except PinballError as exc:
        w.fail(f"{name}: {exc}")


def _need(d: dict, allowed: set, w: _Where):
    extra = set(d) - allowed
    if extra:
        w.fail(f"unknown field(s) {sorted(extra)}")
    missing = allowed - set(d) - {"id", "meta"}
    if missing:
        w.fail(f"missing field(s) {sorted(missing)}")


def component_from_dict(d: dict, index: int):
    if not isinstance(d, dict):
        raise InvalidScene(f"component {index}: expected an object")
    kind = d.get("type")
    cid = d.get("id", "") or ""
    w = _Where(cid or f"component {index}")
    if kind not in COMPONENT_FIELDS:
        w.fail(f"unknown component type {kind!r}")
    _need(d, COMPONENT_FIELDS[kind], w)
    try:
        if kind == "wall":
            return Wall(_read_vec(d["a"], w, "a"), _read_vec(d["b"], w, "b"), cid)
        if kind == "parabola":
            return Parabola(*(_scalar(d[k], w, k) for k in ("a", "b", "c", "x0", "x1")), cid)
        if kind == "gate":
            return OneWayGate(_read_vec(d["start"], w, "start"), _read_vec(d["end"], w, "end"), cid)
        if kind == "moving_wall":
            s = d["schedule"]
            if not isinstance(s, dict):
                w.fail("schedule must be an object")
            _need(s, {"t_start", "period", "phases"}, w)
            phases = []
            for ph in s["phases"]:
                _need(ph, {"p0", "p1", "time_fn", "disp_fn"}, w)
                phases.append(
                    MotionPhase(
                        _scalar(ph["p0"], w, "p0"),
                        _scalar(ph["p1"], w, "p1"),
                        _read_fn(ph["time_fn"], w, "time_fn"),
                        _read_fn(ph["disp_fn"], w, "disp_fn"),
                    )
                )
            sched = Schedule(_scalar(s["t_start"], w, "t_start"), tuple(phases), _scalar(s["period"], w, "period"))
            return MovingWall(
                _read_vec(d["a"], w, "a"), _read_vec(d["b"], w, "b"), _read_vec(d["motion_dir"], w, "motion_dir"), sched, cid
            )
        s = d["schedule"]
        if not isinstance(s, dict):
            w.fail("schedule must be an object")
        _need(s, {"t_start", "active", "period"}, w)
        sched = BumperSchedule(*(_scalar(s[k], w, k) for k in ("t_start", "active", "period")))
        if d["sign"] not in (1, -1):
            w.fail("sign must be 1 or -1")
        return Bumper(
            _read_vec(d["a"], w, "a"), _read_vec(d["b"], w, "b"), d["sign"], sched, _read_fn(d["effect_accel"], w, "effect_accel"), cid
        )
    except InvalidGeometry as exc:
        w.fail(str(exc))


def scene_from_dict(d: dict) -> SceneFile:
    w = _Where()
    if not isinstance(d, dict):
        w.fail("top level must be an object")
    if d.get("format") != SCENE_FORMAT:
        w.fail(f"format must be {SCENE_FORMAT!r}")
    extra = set(d) - TOP_FIELDS
    if extra:
        w.fail(f"unknown field(s) {sorted(extra)}")
    if "components" not in d or not isinstance(d["components"], list):
        w.fail("components list is required")
    backend = d.get("backend", "exact")
    if backend not in ("exact", "bigfloat"):
        w.fail(f"unknown backend {backend!r}")
    ball = None
    if d.get("ball") is not None:
        b = d["ball"]
        if not isinstance(b, dict):
            w.fail("ball must be an object")
        _need(b, {"pos", "vel", "time"}, w)
        ball = BallState(_read_vec(b["pos"], w, "ball.pos"), _read_vec(b["vel"], w, "ball.vel"), _scalar(b["time"], w, "ball.time"))
    target = _read_vec(d["target"], w, "target") if d.get("target") is not None else None
    cap = _scalar(d["speed_cap"], w, "speed_cap") if d.get("speed_cap") is not None else None
    vref = _scalar(d["ref_speed"], w, "ref_speed") if d.get("ref_speed") is not None else None
    prec = d.get("precision", 256)
    if not isinstance(prec, int) or isinstance(prec, bool):
        w.fail("precision must be an integer")
    cs = d.get("constant_speed", False)
    if not isinstance(cs, bool):
        w.fail("constant_speed must be true or false")
    meta = d.get("meta", {})
    if not isinstance(meta, dict) or any(not isinstance(v, str) for v in meta.values()):
        w.fail("meta must map names to strings")
    comps = [component_from_dict(c, i) for i, c in enumerate(d["components"])]
    return SceneFile(comps, ball, target, backend, prec, cap, vref, cs, dict(meta))


def load_scene_text(text: str) -> SceneFile:
    """Parse without building; JSON syntax errors carry line and column."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return scene_from_dict(d)


def parse_scene(text: str):
    """Parse and validate into a simulator ``Scene``."""
    return load_scene_text(text).build()


def read_scene_file(path) -> SceneFile:
    with open(path, encoding="utf-8") as fh:
        return load_scene_text(fh.read())


def write_scene_file(path, sf: SceneFile):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scene(sf))


def compiled_scene_file(m, c0=None) -> SceneFile:
    """Scene file for a compiled machine with the ball placed at ``c0``'s offsets."""
    c0 = c0 or m.program.initial
    meta = {
        "program": m.program.name,
        "step_period": fmt_scalar(m.period),
        "reflections_per_step": str(m.reflections_per_step),
        "entry_base": ",".join(_vec(m.entry.base)),
        "entry_lateral": ",".join(_vec(m.entry.lateral)),
        "unit": fmt_scalar(m.unit),
        "loop_mirror": m.loop_mirror,
        "time_mode": m.options.time_mode,
    }
    return SceneFile(
        list(m.components),
        m.initial_ball(c0),
        m.target,
        "bigfloat",
        m.program.precision,
        m.eps,
        m.speed,
        m.options.time_mode == "ray",
        meta,
    )
