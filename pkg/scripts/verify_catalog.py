"""Verify every catalogue gadget and print one line per gadget."""

import argparse
from fractions import Fraction as F

from pinball import gadgets as G
from pinball.numeric import EXACT, BigFloat

CASES = [
    ("space-mult-half", {}),
    ("space-mult-double", {}),
    ("order-reverser", {}),
    ("push-0", {}),
    ("push-1", {}),
    ("pop-space", {}),
    ("delay", {"d": 4}),
    ("rejoin", {}),
    ("time-mult-bumpers", {"factor": "double"}),
    ("time-mult-bumpers", {"factor": "half", "d1": 2, "d2": 2, "d3": 3}),
    ("time-mult-moving", {"factor": "double"}),
    ("time-mult-moving", {"factor": "half"}),
    ("time-separator", {}),
    ("ray-mult", {"factor": "double", "eps": F(1, 8)}),
    ("ray-mult", {"factor": "half", "eps": F(1, 8)}),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=9)
    ap.add_argument("--precision", type=int, default=256)
    a = ap.parse_args()
    bad = 0
    for name, kw in CASES:
        g = G.CATALOG[name](**kw)
        backend = BigFloat(a.precision) if g.time_samples is not None else EXACT
        rep = G.verify_transfer(g, a.samples, backend)
        bad += not rep.passed
        extra = f" stages={g.info['stages']}" if "stages" in g.info else ""
        print(rep.describe() + extra)
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
