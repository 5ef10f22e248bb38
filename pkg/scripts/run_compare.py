"""Step-simulate the shipped programs against the reference interpreter.

    python3 scripts/run_compare.py --steps 200 --time-mode bumper
"""

import argparse
import time
from dataclasses import dataclass, field
from fractions import Fraction as F
from typing import Tuple

from pinball.compiler import CompileOptions, compile_program, step_simulate
from pinball.numeric import BigFloat
from pinball.pda import oracle_run, shipped_program


@dataclass
class CompareConfig:
    programs: Tuple[str, ...] = ("flip", "counter", "mover")
    steps: int = 200
    kappa: F = F(1, 100)
    eps: F = F(1, 15)
    precision: int = 512
    options: CompileOptions = field(default_factory=CompileOptions)


def compare(cfg: CompareConfig):
    rows = []
    for name in cfg.programs:
        p = shipped_program(name)
        t0 = time.perf_counter()
        m = compile_program(p, cfg.kappa, cfg.eps, options=cfg.options)
        expect = oracle_run(p, p.initial, cfg.steps)
        rep = step_simulate(m, p.initial, len(expect), BigFloat(cfg.precision))
        bad = sum(a != b for a, b in zip(expect, rep.configs)) + len(expect) - len(rep.configs)
        rows.append((name, len(rep.configs), bad, sorted(set(rep.reflections)), m.period, len(m.components), time.perf_counter() - t0))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--time-mode", default="bumper", choices=["bumper", "moving", "ray"])
    ap.add_argument("--eps", type=F, default=None)
    ap.add_argument("--precision", type=int, default=512)
    a = ap.parse_args()
    eps = a.eps if a.eps is not None else (F(1, 2) if a.time_mode == "moving" else F(1, 15))
    cfg = CompareConfig(steps=a.steps, eps=eps, precision=a.precision, options=CompileOptions(time_mode=a.time_mode))
    print(f"{'program':8} {'steps':>5} {'bad':>4} {'refl/step':>10} {'period':>12} {'parts':>6} {'secs':>6}")
    for name, n, bad, refl, period, parts, secs in compare(cfg):
        print(f"{name:8} {n:5d} {bad:4d} {str(refl):>10} {str(period):>12} {parts:6d} {secs:6.2f}")


if __name__ == "__main__":
    main()
