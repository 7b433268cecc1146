"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Every kernel is also checked for identical output across backends.
"""

import argparse
import time

import numpy as np

from lesionbench import lesions, raster
from lesionbench._backend import available_backends


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def cases():
    g = np.random.default_rng(0)
    noise = g.random((256, 256))
    binary = raster.opening(raster.erode(raster.otsu_threshold(raster.gaussian_blur(noise, 2.0))[1]))
    lm = raster.connected_components(binary)
    return {
        "gaussian_blur 256x256 r=2": lambda: raster.gaussian_blur(noise, 2.0),
        "label 256x256": lambda: raster.connected_components(binary).labels,
        "component_stats": lambda: [(s.area, s.perimeter, s.bbox) for s in raster.component_stats(lm)],
        "lesions_from_noise": lambda: [s.image for s in lesions.lesions_from_noise(7)],
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the fallback is available")
    names = sorted(backends)  # "cython" before "python"
    table = cases()
    print(f"{'kernel':28s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in table.items():
        row, outs = [], []
        for n in names:
            raster.kernels = backends[n]
            t, out = best_of(fn, args.repeat)
            row.append(t)
            outs.append(out)
        line = f"{label:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[1] / row[0]:11.1f}x"
            if not same(outs[0], outs[1]):
                line += "  OUTPUT DIFFERS"
        print(line)


if __name__ == "__main__":
    main()
