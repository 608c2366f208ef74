"""Time the compiled and pure-Python kernel backends on the hot paths.

    python benchmarks/bench_kernels.py [--repeat 3] [--n 300]
"""
import argparse
import math
import timeit

import numpy as np

from obx import kernels


def random_boxes(rng, n, span=200.0):
    h = rng.uniform(4, 40, n)
    return np.stack([rng.uniform(0, span, n), rng.uniform(0, span, n), h * rng.uniform(1, 5, n), h,
                     rng.uniform(0, math.pi, n)], axis=1)


def cases(n, rng):
    a, b = random_boxes(rng, n), random_boxes(rng, n)
    dets = random_boxes(rng, 4 * n, span=400.0)
    pos = random_boxes(rng, 40, span=900.0)
    pos[:, 2:4] *= 3
    ign = pos.copy()
    ign[:, 2:4] *= 1.2
    order = np.arange(40, dtype=np.intp)
    return {
        f"iou_matrix {n}x{n}": lambda k: k.iou_matrix(a, b),
        f"liiou_matrix {n}x{n}": lambda k: k.liiou_matrix(a, b),
        f"nms_sorted {4 * n}": lambda k: k.nms_sorted(dets, 0.3),
        "paint_level 40 boxes 128x128": lambda k: k.paint_level(pos, ign, order, 8.0, 128, 128),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=300)
    args = ap.parse_args()
    backends = {name: kernels.load_backend(name) for name in kernels.available_backends()}
    if len(backends) < 2:
        print("compiled backend not built; timing the Python kernels only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s}" + "".join(f"{n:>12s}" for n in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, fn in cases(args.n, rng).items():
        times = {n: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for n, m in backends.items()}
        row = f"{label:32s}" + "".join(f"{t:11.4f}s" for t in times.values())
        if len(times) > 1:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
