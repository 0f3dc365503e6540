"""A small tunable program for exercising the profiling harness.

Approximates sqrt(a) with ``--iter1`` Newton steps and pi with ``--iter2``
terms of a Machin-like arctan series. Prints ``DISTANCE`` (absolute error of
both) and ``COST`` (arithmetic operations performed, scaled by the input
size) so runs are deterministic.

    python -m knobctl.toyprog --input 7.5 --iter1 3 --iter2 4
"""

import argparse
import math
import sys
import time


def arctan_series(x: float, terms: int):
    total, ops = 0.0, 0
    p = x
    for n in range(terms):
        total += (-1) ** n * p / (2 * n + 1)
        p *= x * x
        ops += 4
    return total, ops


def run(a: float, iter1: int, iter2: int, size: float = 1.0):
    x, ops = a, 0
    for _ in range(iter1):
        x = 0.5 * (x + a / x)
        ops += 3
    t1, o1 = arctan_series(1 / 5, iter2)
    t2, o2 = arctan_series(1 / 239, iter2)
    pi = 4 * (4 * t1 - t2)
    ops += o1 + o2
    distance = abs(x - math.sqrt(a)) + abs(pi - math.pi)
    return distance, (ops + 1) * size


def main(argv=None):
    p = argparse.ArgumentParser(prog="toyprog")
    p.add_argument("--input", type=float, required=True, help="positive number to take the root of")
    p.add_argument("--iter1", type=int, required=True)
    p.add_argument("--iter2", type=int, required=True)
    p.add_argument("--size", type=float, default=1.0, help="work multiplier")
    p.add_argument("--tag", default="", help="input label, ignored")
    p.add_argument("--sleep", type=float, default=0.0, help="stall before answering (seconds)")
    args = p.parse_args(argv)
    if args.input <= 0:
        p.error("--input must be positive")
    if args.sleep:
        time.sleep(args.sleep)
    d, c = run(args.input, args.iter1, args.iter2, args.size)
    print(f"DISTANCE {d!r}")
    print(f"COST {c!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
