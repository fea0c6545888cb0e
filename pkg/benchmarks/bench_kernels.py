"""Compiled kernels vs the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from shell_lab import _fallback

try:
    from shell_lab import _core
except ImportError:
    _core = None


def cases():
    s = np.ascontiguousarray(np.linspace(0.0, 100.0, 2000))
    state = np.random.default_rng(0).standard_normal((4096, 64))
    forcing = np.ascontiguousarray(np.random.default_rng(1).standard_normal((4096, 200)) * 0.03)
    yield "bessel_table 2000 args x 200 orders", lambda m: m.bessel_table(s, 200, 2.0, 20, 200)
    yield "em_advance 4096 paths x 64 modes x 200 steps", lambda m: m.em_advance(state.copy(), forcing, 1e-3, 1.0)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = [("fallback", _fallback)] + ([("compiled", _core)] if _core is not None else [])
    print(f"{'kernel':48s} " + " ".join(f"{name:>12s}" for name, _ in backends) + "     speedup")
    for label, call in cases():
        times = [min(timeit.repeat(lambda m=m: call(m), number=1, repeat=args.repeat)) for _, m in backends]
        speed = f"{times[0] / times[1]:10.1f}x" if len(times) > 1 else "         -"
        print(f"{label:48s} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times) + " " + speed)


if __name__ == "__main__":
    main()
