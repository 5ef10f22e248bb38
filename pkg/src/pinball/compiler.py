"""Compile a two-stack PDA into a pinball scene and run it step by step.

Layout: lanes flow downward in columns.  The space stack's top bits (state
code, then possibly the read symbol) are popped along a binary decision tree;
branches that pop a 1 (space) or an early offset (time) are diverted to the
right into their own columns.  Each leaf applies its pushes, then every
continuing leaf is padded to a common reflection count and arrival time,
merged onto the leftmost leaf's axis by mirror + one-way gate pairs, and led
back around the layout to the entry port.  One trip around is one step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from . import track as tk
from .components import BallState, Bumper, MovingWall, OneWayGate, Parabola, Wall
from .errors import CompileError, DecodeAmbiguous, DomainError, InvalidGadgetParams, InvalidGeometry, PinballError
from .gadgets import Port, merge_gate
from .numeric import BigFloat, EXACT, Vec2
from .pda import PdaConfig, PdaProgram, decode_config, encode_bits, space_bits, spread
from .simulator import build_scene, run
from .track import DOWN, LEFT, RIGHT, UP, F, Layout, TimeOps, Track

# --------------------------------------------------------------------------
# decision tree


@dataclass(frozen=True)
class Leaf:
    kind: str  # step | accept | reject
    state: Optional[str] = None
    symbol: Optional[int] = None


@dataclass(frozen=True)
class Branch:
    stack: str  # space | time
    zero: object
    one: object


def _all_reject(node) -> bool:
    if isinstance(node, Leaf):
        return node.kind == "reject"
    return _all_reject(node.zero) and _all_reject(node.one)


def decision_tree(p: PdaProgram):
    n, ell = len(p.states), p.ell

    def code_node(c):
        if c >= n:
            return Leaf("reject")
        q = p.states[c]
        if q in p.halting:
            return Leaf(p.halting[q], q)
        stack = "space" if p.read[q] == "A" else "time"
        return Branch(stack, Leaf("step", q, 0), Leaf("step", q, 1))

    def build(prefix, depth):
        if depth == ell:
            return code_node(prefix)
        node = Branch("space", build(2 * prefix, depth + 1), build(2 * prefix + 1, depth + 1))
        return Leaf("reject") if _all_reject(node) else node

    return build(0, 0)


def _stay_divert(node: Branch):
    """Space pops keep bit 0 in the column; time pops keep the late (bit 1) lane."""
    if node.stack == "space":
        return node.zero, node.one
    return node.one, node.zero


def width(node) -> int:
    if isinstance(node, Leaf):
        return 1
    a, b = _stay_divert(node)
    return width(a) + width(b)


# --------------------------------------------------------------------------
# compiled machine


@dataclass(frozen=True)
class CompileOptions:
    time_mode: str = "bumper"  # bumper | moving | ray
    delta1: Fraction = F(2)
    delta2: Fraction = F(2)
    delta3: Fraction = F(3)
    pitch: Optional[Fraction] = None


@dataclass
class LeafPlacement:
    leaf: Leaf
    column: int
    track: Track


@dataclass
class CompiledMachine:
    program: PdaProgram
    kappa: Fraction
    eps: Fraction
    speed: Fraction
    options: CompileOptions
    components: list
    entry: Port
    period: Fraction
    target: Optional[Vec2]
    reflections_per_step: int
    loop_mirror: str
    pitch: Fraction
    placement: Dict[str, int] = field(default_factory=dict)
    _scenes: dict = field(default_factory=dict, repr=False)

    @property
    def unit(self):
        return self.entry.unit

    def scene(self, backend=None):
        backend = backend or BigFloat(self.program.precision)
        key = (backend.name, getattr(backend, "precision_bits", 0))
        if key not in self._scenes:
            self._scenes[key] = build_scene(
                self.components,
                target=self.target,
                backend=backend,
                speed_cap_ratio=self.eps,
                ref_speed=self.speed,
                constant_speed=self.options.time_mode == "ray",
                allow_exact_moving=True,
            )
        return self._scenes[key]

    def summary(self):
        return {
            "program": self.program.name,
            "kappa": self.kappa,
            "eps": self.eps,
            "speed": self.speed,
            "time_mode": self.options.time_mode,
            "step_period": self.period,
            "reflections_per_step": self.reflections_per_step,
            "components": len(self.components),
            "columns": len(set(self.placement.values())),
        }

    def initial_ball(self, c: PdaConfig, backend=EXACT) -> BallState:
        s = encode_bits(space_bits(c, self.program))
        t = spread(c.stack_b)
        pos = self.entry.point(s)
        return BallState(pos.convert(backend), (DOWN * self.speed).convert(backend), backend.num(t))


def _x_range(c):
    if isinstance(c, Parabola):
        return (c.x0, c.x1)
    if isinstance(c, MovingWall):
        reach = F(0)
        for ph in c.schedule.phases:
            for k in range(5):
                p = ph.p0 + (ph.p1 - ph.p0) * F(k, 4)
                reach = max(reach, abs(F(ph.disp_fn(p))))
        xs = [c.a.x, c.b.x, c.a.x + c.motion_dir.x * reach, c.b.x + c.motion_dir.x * reach]
        xs += [c.a.x - c.motion_dir.x * reach, c.b.x - c.motion_dir.x * reach]
        return (min(xs), max(xs))
    return (min(c.a.x, c.b.x), max(c.a.x, c.b.x))


def _y_range(c):
    if isinstance(c, Parabola):
        ys = [c.y(c.x0), c.y(c.x1)]
        xv = -c.b / (2 * c.a)
        if c.x0 <= xv <= c.x1:
            ys.append(c.y(xv))
        return (min(ys), max(ys))
    return (min(c.a.y, c.b.y), max(c.a.y, c.b.y))


def _extent(comps, axis):
    rng = [(_x_range(c) if axis == "x" else _y_range(c)) for c in comps]
    if not rng:
        return None
    return (min(r[0] for r in rng), max(r[1] for r in rng))


class _Builder:
    def __init__(self, p: PdaProgram, kappa, eps, v, opts: CompileOptions, pitch):
        self.p, self.kappa, self.eps, self.v, self.opts, self.pitch = p, kappa, eps, v, opts, pitch
        self.S = kappa * v
        self.ops = TimeOps(opts.time_mode, opts.delta1, opts.delta2, opts.delta3, eps)
        self.columns: Dict[int, Layout] = {}
        self.leaves: List[LeafPlacement] = []

    def col(self, i) -> Layout:
        if i not in self.columns:
            self.columns[i] = Layout(f"k{i}_")
        return self.columns[i]

    def axis(self, i):
        return self.pitch * i

    def place(self, node, tr: Track, col: int):
        if isinstance(node, Leaf):
            self.leaves.append(LeafPlacement(node, col, self.leaf_ops(node, tr, col)))
            return
        stay, divert = _stay_divert(node)
        c = tk.clearance(tr)
        after = 4 * c
        lay = self.col(col)
        if node.stack == "space":
            kept, moved = tk.space_pop(lay, tr, RIGHT, after)
        else:
            moved, kept = tk.time_pop(lay, tr, self.ops, self.kappa, self.eps, RIGHT, after)
        dcol = col + width(stay)
        moved = replace(moved, band=F(2))
        ahead = self.axis(dcol) - moved.origin.x
        moved = tk.turn(self.col(dcol), moved, DOWN, ahead, 4 * c)
        self.place(stay, kept, col)
        self.place(divert, moved, dcol)

    def leaf_ops(self, leaf: Leaf, tr: Track, col: int) -> Track:
        lay = self.col(col)
        if leaf.kind == "reject":
            return tr
        if leaf.kind == "accept":
            self.target = tk.focus_target(lay, tr)
            return tr
        t = self.p.transitions[(leaf.state, leaf.symbol)]
        for bit in t.push_b:
            tr = tk.time_push(lay, tr, bit, self.ops)
        for bit in t.push_a:
            tr = tk.space_stage(lay, tr, "half", shift=bit)
        for bit in reversed(self.p.code_bits(t.next)):
            tr = tk.space_stage(lay, tr, "half", shift=bit)
        return tr


def compile_program(p: PdaProgram, kappa=F(1, 100), eps=F(1, 15), v=F(1), options: Optional[CompileOptions] = None) -> CompiledMachine:
    """Lay out the step block for ``p``; see the module docstring."""
    opts = options or CompileOptions()
    kappa, eps, v = F(kappa), F(eps), F(v)
    try:
        p.validate()
    except PinballError as exc:
        raise CompileError(f"invalid program: {exc}") from None
    missing = p.undefined_transitions()
    if missing:
        raise CompileError(f"undefined transitions: {missing}")
    if sum(1 for q in p.halting.values() if q == "accept") > 1:
        raise CompileError("at most one accepting state is supported (single target)")
    if v <= 0 or kappa <= 0:
        raise CompileError("speed and kappa must be positive")
    if not kappa < F(1, 4):
        raise CompileError("separator bound violated: need kappa < 1/4")
    if eps < tk.separator_min_eps(kappa):
        raise CompileError(
            f"separator bound violated: need kappa < 1/4 and eps >= 6 kappa/(1 - 4 kappa) = {tk.separator_min_eps(kappa)}"
        )
    if eps > F(1, 2):
        raise CompileError("eps must not exceed 1/2")
    pitch = F(opts.pitch) if opts.pitch is not None else F(8)
    for _ in range(8):
        try:
            return _compile_with_pitch(p, kappa, eps, v, opts, pitch)
        except _Overlap:
            pitch *= 2
        except (InvalidGadgetParams, InvalidGeometry) as exc:
            raise CompileError(str(exc)) from None
    raise CompileError("could not find a non-overlapping column pitch")


class _Overlap(Exception):
    pass


def _compile_with_pitch(p, kappa, eps, v, opts, pitch) -> CompiledMachine:
    b = _Builder(p, kappa, eps, v, opts, pitch)
    b.target = None
    S = b.S
    entry_tr = Track(Vec2(F(0), F(0)), DOWN, RIGHT, S, F(0), v, 0, F(2))
    c = tk.clearance(entry_tr)
    b.place(decision_tree(p), entry_tr, 0)

    # columns must not overlap horizontally
    ranges = sorted(
        (_extent(lay.components(F(1000)), "x"), i) for i, lay in b.columns.items() if lay.items
    )
    for (r0, i0), (r1, i1) in zip(ranges, ranges[1:]):
        if r1[0] <= r0[1] + 4 * c:
            raise _Overlap()

    steps = sorted((lp for lp in b.leaves if lp.leaf.kind == "step"), key=lambda lp: lp.column)
    if not steps:
        raise CompileError("no continuing transitions")
    trunk_lat = steps[0].track.lateral
    pads = Layout("pad_")
    merges = Layout("mrg_")
    lanes = []
    for lp in steps:
        tr = lp.track
        if tr.lateral != trunk_lat:
            tr = tk.space_stage(b.col(lp.column), tr, "reverser")
        lanes.append(tr)
    lowest = min(min(tr.origin.y for tr in lanes), min((_extent(l.components(F(1000)), "y") or (F(0), F(0)))[0] for l in b.columns.values()))
    gap = 8 * c
    y_pad = lowest - gap
    lanes = [tr.advance(tr.origin.y - y_pad) for tr in lanes]
    refl = [tr.reflections + (2 if j else 0) for j, tr in enumerate(lanes)]
    if any(r % 2 for r in refl):
        raise CompileError("odd reflection parity in a leaf path")
    R = max(refl) + 4
    xmin = 3 * c
    # excursion drop is 4c regardless of reach; lanes pad in separate vertical bands
    band_h = 4 * c * ((R - min(refl)) // 4 + 1) + 4 * c + gap
    n_lanes = len(lanes)
    y_q = y_pad - band_h * n_lanes
    merge_y = [y_q - gap * (j + 1) for j in range(n_lanes)]
    y_exit = y_q - gap * (n_lanes + 1)
    x_trunk = None

    def route(j, tr, lay_p, lay_m, reach):
        top = y_pad - band_h * j - gap / 2
        tr = tr.advance(tr.origin.y - top)
        pad = R - refl[j]
        n_exc, jog = pad // 4, pad % 4 == 2
        if jog:
            tr = tk.jog(lay_p, tr, RIGHT, 4 * c)
        for _ in range(n_exc):
            tr = tk.excursion(lay_p, tr, RIGHT, reach)
        tr = tr.advance(tr.origin.y - y_q)
        if not j:
            nonlocal x_trunk
            x_trunk = tr.origin.x
        else:
            tr = tk.turn(lay_m, tr, LEFT, tr.origin.y - merge_y[j], 2 * c)
            tr = merge_gate(lay_m, tr, x_trunk, 2 * c)
        return tr.advance(tr.origin.y - y_exit), n_exc

    trial = [route(j, tr, Layout(), Layout(), xmin) for j, tr in enumerate(lanes)]
    t_star = max(t.time_base for t, _ in trial)
    out = []
    for j, tr in enumerate(lanes):
        t0, n_exc = trial[j]
        reach = xmin + (t_star - t0.time_base) * v / (2 * n_exc)
        res, _ = route(j, tr, pads, merges, reach)
        out.append(res)
    ends = {(t.origin, t.lateral, t.time_base) for t in out}
    if len(ends) != 1:
        raise CompileError("merged lanes disagree on position, orientation or time")
    trunk = out[0]

    # loop back to the entry
    loop = Layout("loop_")
    body = [lay for lay in b.columns.values()] + [pads, merges]
    comps = [cc for lay in body for cc in lay.components(F(1000))]
    x_hi = _extent(comps, "x")[1]
    y_hi = max(_extent(comps, "y")[1], F(0))

    def close(tr):
        lay = Layout("loop_")
        tr = tk.turn(lay, tr, RIGHT, 4 * c, 4 * c)
        x_r = x_hi + 8 * c
        tr = tk.turn(lay, tr, UP, x_r - tr.origin.x, 4 * c)
        y_t = y_hi + 8 * c
        tr = tk.turn(lay, tr, LEFT, y_t - tr.origin.y, 4 * c)
        tr = tk.turn(lay, tr, DOWN, tr.origin.x - entry_tr.origin.x, tr.origin.y - entry_tr.origin.y)
        return lay, tr

    loop, back = close(trunk)
    extra = 0
    if back.lateral != entry_tr.lateral:
        trunk = tk.space_stage(merges, trunk, "reverser")
        loop, back = close(trunk)
        extra = 2
    if back.origin != entry_tr.origin or back.lateral != entry_tr.lateral:
        raise CompileError("loop does not close on the entry port")
    period = back.time_base
    loop_mirror = loop.ids()[-1]
    all_layouts = body + [loop]
    components = [cc for lay in all_layouts for cc in lay.components(period)]
    top = max((cc.max_speed() for cc in components if isinstance(cc, MovingWall)), default=F(0))
    if top > eps * v:
        raise CompileError(f"moving walls reach speed {top}, above the cap eps*v = {eps * v}; raise eps or use another time mode")
    placement = {}
    for i, lay in b.columns.items():
        for cid in lay.ids():
            placement[cid] = i
    target = b.target
    return CompiledMachine(
        p,
        kappa,
        eps,
        v,
        opts,
        components,
        Port.from_track("entry", entry_tr, hi=F(1)),
        period,
        target,
        back.reflections,
        loop_mirror,
        pitch,
        placement,
    )


compile = compile_program


# --------------------------------------------------------------------------
# running


@dataclass
class StepReport:
    configs: List[PdaConfig]
    reflections: List[int]
    crossings: list
    outcome: object
    events: int

    @property
    def constant_reflections(self):
        return len(set(self.reflections)) <= 1


def step_simulate(m: CompiledMachine, c0: PdaConfig, n_steps: int, backend=None, tol=None) -> StepReport:
    """Run the compiled machine for ``n_steps`` periods and decode each return to the entry."""
    if n_steps < 1:
        raise DomainError("n_steps must be at least 1")
    backend = backend or BigFloat(m.program.precision)
    c0.check_bottom()
    scene = m.scene(backend)
    b0 = m.initial_ball(c0, backend)
    per_step = 4 * m.reflections_per_step + 64
    horizon = m.period * n_steps + F(1, 2)
    outcome, trace = run(scene, b0, per_step * (n_steps + 1), horizon)
    if tol is None:
        bits = backend.precision_bits or 0
        if m.options.time_mode == "moving":
            # contacts with accelerating walls are only solved to the root tolerance
            bits = bits * 100 // 256 - 24
        else:
            bits //= 2
        tol = F(1, 2**bits) if not backend.exact else None
    S = backend.num(m.unit)
    y0 = backend.num(m.entry.base.y)
    x0 = backend.num(m.entry.base.x)
    lat = backend.num(m.entry.lateral.x)
    v = backend.num(m.speed)
    configs, refl, crossings = [], [], []
    count, last = 0, 0
    for i, ev in enumerate(trace.events):
        if ev.kind != "pass":
            count += 1
        if ev.component_id != m.loop_mirror:
            continue
        k = len(configs) + 1
        t_cross = ev.time + (ev.point.y - y0) / v
        u = (ev.point.x - x0) * lat / S
        t_off = t_cross - backend.num(m.period * k)
        try:
            cfg = decode_config(u, t_off, m.program, backend, tol)
        except DecodeAmbiguous as exc:
            raise DecodeAmbiguous(f"step {k}: {exc}") from None
        configs.append(cfg)
        refl.append(count)
        crossings.append((t_cross, u))
        count = 0
        if k == n_steps:
            break
    return StepReport(configs, refl, crossings, outcome, len(trace.events))
