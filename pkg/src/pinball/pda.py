"""Two-stack pushdown automata: programs, the reference interpreter and offset codecs.

Stacks are bit lists read top first and end with the bottom marker ``[1, 1]``.
The space stack of a compiled machine carries the state code (``ell`` bits,
most significant on top) above stack A.  Time offsets use a base-4 spread of
the binary stack so the time pop can separate digits with a wide gap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from math import ceil, log2
from typing import Dict, List, Optional, Tuple

from .errors import DecodeAmbiguous, InvalidConfig, OracleHalt, ParseError
from .numeric import EXACT, mpf_to_fraction

BOTTOM = (1, 1)
PROGRAM_FORMAT = "pinball-pda/1"


@dataclass(frozen=True)
class Transition:
    next: str
    push_a: Tuple[int, ...] = ()
    push_b: Tuple[int, ...] = ()


@dataclass(frozen=True)
class PdaConfig:
    state: str
    stack_a: Tuple[int, ...]
    stack_b: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "stack_a", tuple(int(b) for b in self.stack_a))
        object.__setattr__(self, "stack_b", tuple(int(b) for b in self.stack_b))

    def check_bottom(self):
        for name, st in (("A", self.stack_a), ("B", self.stack_b)):
            if len(st) < 2 or st[-2:] != BOTTOM:
                raise InvalidConfig(f"stack {name} must end with the bottom marker 1 1")
            if any(b not in (0, 1) for b in st):
                raise InvalidConfig(f"stack {name} holds a non-bit")


@dataclass
class PdaProgram:
    name: str
    states: List[str]
    read: Dict[str, str]  # state -> "A" | "B"
    transitions: Dict[Tuple[str, int], Transition]
    initial: PdaConfig
    halting: Dict[str, str] = field(default_factory=dict)  # state -> accept | reject
    precision: int = 512
    description: str = ""

    @property
    def ell(self) -> int:
        return max(1, ceil(log2(len(self.states)))) if len(self.states) > 1 else 1

    def code(self, state: str) -> int:
        return self.states.index(state)

    def code_bits(self, state: str) -> Tuple[int, ...]:
        c = self.code(state)
        return tuple((c >> (self.ell - 1 - i)) & 1 for i in range(self.ell))

    def state_of_bits(self, bits) -> Optional[str]:
        c = 0
        for b in bits:
            c = 2 * c + b
        return self.states[c] if c < len(self.states) else None

    def validate(self):
        if len(set(self.states)) != len(self.states) or not self.states:
            raise InvalidConfig("states must be distinct and non-empty")
        for (q, x), tr in self.transitions.items():
            if q not in self.states or tr.next not in self.states:
                raise InvalidConfig(f"transition ({q},{x}) names an unknown state")
            if x not in (0, 1):
                raise InvalidConfig("read symbols are bits")
            if any(b not in (0, 1) for b in tr.push_a + tr.push_b):
                raise InvalidConfig("pushed symbols are bits")
        for q in self.states:
            if q in self.halting:
                if self.halting[q] not in ("accept", "reject"):
                    raise InvalidConfig(f"halting verdict for {q} must be accept or reject")
                continue
            if self.read.get(q) not in ("A", "B"):
                raise InvalidConfig(f"state {q} needs read stack A or B")
        if self.initial.state not in self.states:
            raise InvalidConfig("initial state unknown")
        self.initial.check_bottom()

    def undefined_transitions(self):
        return [
            (q, x)
            for q in self.states
            if q not in self.halting
            for x in (0, 1)
            if (q, x) not in self.transitions
        ]


# --------------------------------------------------------------------------
# reference interpreter


def oracle_step(p: PdaProgram, c: PdaConfig) -> PdaConfig:
    """One step: pop the read stack, apply the rule, push B then A bits."""
    if c.state in p.halting:
        raise OracleHalt(p.halting[c.state])
    which = p.read[c.state]
    stack = c.stack_a if which == "A" else c.stack_b
    if len(stack) <= len(BOTTOM):
        raise OracleHalt("bottom")
    x, rest = stack[0], stack[1:]
    tr = p.transitions.get((c.state, x))
    if tr is None:
        raise OracleHalt("reject")
    a = rest if which == "A" else c.stack_a
    b = rest if which == "B" else c.stack_b
    for bit in tr.push_b:
        b = (bit,) + b
    for bit in tr.push_a:
        a = (bit,) + a
    return PdaConfig(tr.next, a, b)


def oracle_run(p: PdaProgram, c: PdaConfig, n: int) -> List[PdaConfig]:
    """Configurations after steps 1..n (stops early on a halt)."""
    out = []
    for _ in range(n):
        try:
            c = oracle_step(p, c)
        except OracleHalt:
            break
        out.append(c)
    return out


# --------------------------------------------------------------------------
# codecs


def encode_bits(bits) -> Fraction:
    bits = list(bits)
    if not bits:
        raise InvalidConfig("empty stack")
    return sum((Fraction(b, 2 ** (i + 1)) for i, b in enumerate(bits)), Fraction(0))


def space_bits(c: PdaConfig, program: Optional[PdaProgram] = None) -> Tuple[int, ...]:
    return (program.code_bits(c.state) if program is not None else ()) + c.stack_a


def encode_config(c: PdaConfig, program: Optional[PdaProgram] = None) -> Tuple[Fraction, Fraction]:
    """(space offset, time offset) as binary fractions of the stacks read top down.

    With ``program`` the state code rides on top of the space stack.
    """
    return encode_bits(space_bits(c, program)), encode_bits(c.stack_b)


def spread(bits) -> Fraction:
    """Base-4 spread of a bit list: sum b_i 4^-i (the physical time offset)."""
    bits = list(bits)
    if not bits:
        raise InvalidConfig("empty stack")
    return sum((Fraction(b, 4 ** (i + 1)) for i, b in enumerate(bits)), Fraction(0))


def binary_to_spread(x) -> Fraction:
    return spread(decode_offset(x, 4096))


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return mpf_to_fraction(x)


def decode_offset(offset, max_bits: int = 256, backend=EXACT, tol=None) -> List[int]:
    """Bits of a dyadic offset in (0, 1).

    Exact inputs must be dyadic with at most ``max_bits`` bits.  Inexact
    inputs are read by repeated doubling; the expansion ends once the remainder
    is within ``tol`` (scaled by the doublings so far) of zero, and a doubling
    landing within that band of a threshold is ambiguous.
    """
    if backend.exact or isinstance(offset, (Fraction, int)):
        x = _as_fraction(offset)
        if not 0 < x < 1:
            raise DecodeAmbiguous(f"offset {x} outside (0, 1)")
        bits = []
        while x != 0:
            if len(bits) >= max_bits:
                raise DecodeAmbiguous("offset is not dyadic within max_bits")
            x *= 2
            b = 1 if x >= 1 else 0
            bits.append(b)
            x -= b
        return bits
    x = offset
    eps = backend.num(tol) if tol is not None else backend.residual
    if not (eps < x < 1 - eps):
        raise DecodeAmbiguous(f"offset {x} outside (0, 1)")
    bits = []
    scale = eps
    while True:
        if abs(x) <= scale and bits:
            return bits
        if len(bits) >= max_bits:
            raise DecodeAmbiguous("no termination within max_bits")
        x = 2 * x
        scale = 2 * scale
        if abs(x - 1) <= scale:
            # a dyadic expansion ends on a 1 exactly here
            bits.append(1)
            return bits
        if abs(x) <= scale and not bits:
            raise DecodeAmbiguous(f"doubling {len(bits) + 1} lands on a threshold")
        b = 1 if x > 1 else 0
        bits.append(b)
        x = x - b
        if abs(x) <= scale:
            return bits
        if scale > backend.num(Fraction(1, 4)):
            raise DecodeAmbiguous("precision exhausted")


def decode_spread(t, max_digits: int = 256, backend=EXACT, tol=None) -> List[int]:
    """Inverse of ``spread``; digits must be 0 or 1."""
    if backend.exact or isinstance(t, (Fraction, int)):
        x = _as_fraction(t)
        if not 0 < x < Fraction(1, 3) + Fraction(1, 4**max_digits):
            raise DecodeAmbiguous(f"time offset {x} outside the spread range")
        out = []
        while x != 0:
            if len(out) >= max_digits:
                raise DecodeAmbiguous("time offset not a finite spread")
            x *= 4
            d = int(x)
            if d not in (0, 1):
                raise DecodeAmbiguous(f"digit {d} is not a bit")
            out.append(d)
            x -= d
        return out
    x = t
    scale = backend.num(tol) if tol is not None else backend.residual
    third, two_thirds, eighth = backend.num(Fraction(1, 3)), backend.num(Fraction(2, 3)), backend.num(Fraction(1, 8))
    if not (scale < x < third + scale):
        raise DecodeAmbiguous(f"time offset {x} outside the spread range")
    out = []
    while True:
        if len(out) >= max_digits:
            raise DecodeAmbiguous("no termination within max_digits")
        x = 4 * x
        scale = 4 * scale
        d = 1 if x > two_thirds else 0
        if abs(x - d) > third + scale:
            raise DecodeAmbiguous("digit out of range")
        out.append(d)
        x = x - d
        if abs(x) <= scale:
            return out
        if scale > eighth:
            raise DecodeAmbiguous("precision exhausted")


def decode_config(space, time, program: PdaProgram, backend=EXACT, tol=None) -> PdaConfig:
    bits = decode_offset(space, 4096, backend, tol)
    ell = program.ell
    if len(bits) < ell + 2:
        raise DecodeAmbiguous("space stack shorter than state code plus bottom")
    state = program.state_of_bits(bits[:ell])
    if state is None:
        raise DecodeAmbiguous("unused state code")
    return PdaConfig(state, tuple(bits[ell:]), tuple(decode_spread(time, 4096, backend, tol)))


# --------------------------------------------------------------------------
# program files


def _bits(v, where):
    if not isinstance(v, list) or any(b not in (0, 1) for b in v):
        raise ParseError(f"{where}: expected a list of bits")
    return tuple(v)


def program_from_dict(d: dict) -> PdaProgram:
    allowed = {"format", "name", "description", "states", "read", "halting", "transitions", "initial", "precision", "ell"}
    extra = set(d) - allowed
    if extra:
        raise ParseError(f"unknown program fields: {sorted(extra)}")
    if d.get("format") != PROGRAM_FORMAT:
        raise ParseError(f"program format must be {PROGRAM_FORMAT!r}")
    trans = {}
    for i, t in enumerate(d.get("transitions", [])):
        unknown = set(t) - {"state", "bit", "next", "push_a", "push_b"}
        if unknown:
            raise ParseError(f"transition {i}: unknown fields {sorted(unknown)}")
        key = (t["state"], int(t["bit"]))
        if key in trans:
            raise InvalidConfig(f"duplicate transition {key}")
        trans[key] = Transition(t["next"], _bits(t.get("push_a", []), f"transition {i}"), _bits(t.get("push_b", []), f"transition {i}"))
    ini = d["initial"]
    p = PdaProgram(
        d.get("name", "program"),
        list(d["states"]),
        dict(d.get("read", {})),
        trans,
        PdaConfig(ini["state"], _bits(ini["stack_a"], "initial"), _bits(ini["stack_b"], "initial")),
        dict(d.get("halting", {})),
        int(d.get("precision", 512)),
        d.get("description", ""),
    )
    if "ell" in d and int(d["ell"]) != p.ell:
        raise InvalidConfig(f"ell {d['ell']} does not match {len(p.states)} states (expected {p.ell})")
    p.validate()
    return p


def program_to_dict(p: PdaProgram) -> dict:
    return {
        "format": PROGRAM_FORMAT,
        "name": p.name,
        "description": p.description,
        "ell": p.ell,
        "states": list(p.states),
        "read": dict(p.read),
        "halting": dict(p.halting),
        "transitions": [
            {"state": q, "bit": x, "next": t.next, "push_a": list(t.push_a), "push_b": list(t.push_b)}
            for (q, x), t in sorted(p.transitions.items())
        ],
        "initial": {"state": p.initial.state, "stack_a": list(p.initial.stack_a), "stack_b": list(p.initial.stack_b)},
        "precision": p.precision,
    }


def parse_program(text: str) -> PdaProgram:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return program_from_dict(d)


def load_program(path) -> PdaProgram:
    with open(path) as fh:
        return parse_program(fh.read())


SHIPPED = ("flip", "counter", "mover")


def shipped_program(name: str) -> PdaProgram:
    if name not in SHIPPED:
        raise InvalidConfig(f"no shipped program {name!r}")
    text = resources.files("pinball").joinpath("programs").joinpath(f"{name}.json").read_text()
    return parse_program(text)
