"""Compare the compiled kernel core against the pure-NumPy fallback.

Times the two per-pixel kernels at several grid sizes, checks bit parity
on the way, and prints a speedup table:

    python3 benchmarks/bench_kernels.py
"""

import timeit

import numpy as np

from motioncue._kernels import _fallback

try:
    from motioncue._kernels import _core
except ImportError:
    _core = None


SIZES = [(64, 64), (256, 256), (512, 512), (1024, 1024)]
REPEATS = 5


def best_ms(fn, number=3):
    return 1000.0 * min(timeit.repeat(fn, number=number, repeat=REPEATS)) / number


def bench_segment(h, w):
    args = (h, w, 0.3 * w, 0.2 * h, 0.8 * w, 0.9 * h)
    rows = []
    for name, mod in (("compiled", _core), ("fallback", _fallback)):
        if mod is None:
            continue
        rows.append((name, best_ms(lambda m=mod: m.segment_distance_field(*args))))
    if _core is not None:
        assert np.array_equal(
            _core.segment_distance_field(*args),
            _fallback.segment_distance_field(*args),
        ), "backend outputs diverge"
    return rows


def bench_owner(h, w, discs=8):
    rng = np.random.default_rng(0)
    cx = rng.uniform(0, w, discs)
    cy = rng.uniform(0, h, discs)
    r = rng.uniform(min(h, w) / 16, min(h, w) / 6, discs)
    z = rng.uniform(0, 1, discs)
    args = (h, w, cx, cy, r, z)
    rows = []
    for name, mod in (("compiled", _core), ("fallback", _fallback)):
        if mod is None:
            continue
        rows.append((name, best_ms(lambda m=mod: m.disc_owner_map(*args))))
    if _core is not None:
        assert np.array_equal(
            _core.disc_owner_map(*args), _fallback.disc_owner_map(*args)
        ), "backend outputs diverge"
    return rows


def main():
    if _core is None:
        print("compiled core not built; timing the fallback only")
    header = f"{'kernel':<24}{'grid':<12}{'compiled ms':>12}{'fallback ms':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for kernel, bench in (("segment_distance_field", bench_segment),
                          ("disc_owner_map", bench_owner)):
        for h, w in SIZES:
            rows = dict(bench(h, w))
            compiled = rows.get("compiled")
            fallback = rows["fallback"]
            speedup = f"{fallback / compiled:8.2f}x" if compiled else "      --"
            compiled_s = f"{compiled:12.3f}" if compiled else f"{'--':>12}"
            print(f"{kernel:<24}{f'{h}x{w}':<12}{compiled_s}{fallback:12.3f}{speedup}")


if __name__ == "__main__":
    main()
