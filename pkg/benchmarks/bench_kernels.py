"""Compiled vs. pure-Python kernels on realistic workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Times rotated-box IoU, greedy NMS over a scene's worth of proposals and the
exact open-path DP, and checks that both backends return the same answers.
"""
import argparse
import timeit

import numpy as np

from textlink import _pykernels

try:
    from textlink import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def rect(x, y, h, w, t):
    c, s = np.cos(t), np.sin(t)
    along, across = np.array([c, -s]), np.array([-s, -c])
    ctr = np.array([x, y])
    return np.array([ctr - w / 2 * along + h / 2 * across, ctr + w / 2 * along + h / 2 * across,
                     ctr + w / 2 * along - h / 2 * across, ctr - w / 2 * along - h / 2 * across])


def workloads(rng):
    n = 400
    quads = np.stack([rect(*rng.uniform(0, 640, 2), rng.uniform(10, 30), rng.uniform(8, 24),
                           rng.uniform(-np.pi, np.pi)) for _ in range(n)])
    # dense duplicates, as produced before suppression
    quads = np.concatenate([quads, quads + rng.normal(scale=1.5, size=quads.shape)])
    order = np.argsort(-rng.random(len(quads)), kind="stable")
    pts = rng.uniform(0, 300, (12, 2))
    dist = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
    pairs = [(quads[i], quads[i + n]) for i in range(200)]
    return {
        "convex_iou x200": lambda k: [k.convex_iou(a, b) for a, b in pairs],
        "greedy_nms n=800": lambda k: k.greedy_nms(quads, order, 0.5),
        "open_path_dp n=12": lambda k: k.open_path_dp(dist),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the Python fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in workloads(rng).items():
        outs = {b: fn(k) for b, k in backends.items()}
        if len(outs) == 2:
            a, b = (np.asarray(v, dtype=float) for v in outs.values())
            assert np.allclose(a, b, atol=1e-12), f"{name}: backends disagree"
        times = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
                 for b, k in backends.items()}
        row = f"{name:<20}" + "".join(f"{1e3 * t:>10.2f}ms" for t in times.values())
        if len(times) == 2:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
