"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the backend is fixed at
import time by NODALLAB_PURE_NUMPY. Usage::

    python benchmarks/bench_kernels.py [--resolution 512] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, math, sys, time
import numpy as np
from nodallab import covering as cv, eigenmodes as em, geometry as geo, nodal as nd, kernels

res, repeat = int(sys.argv[1]), int(sys.argv[2])
m = geo.flat_torus(2)
q = geo.build_quadrature(m, res)
f = em.torus_mode(m, q, (12, 5))
r = 4.0 / math.sqrt(f.eigenvalue)
w = np.stack([q.weights * f.values ** 2, f.values ** 2], axis=1)


def best(fn):
    fn()  # compile / warm caches
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)


cover = cv.build_cover(m, q, r)
est = nd.extract_nodal(f, res)
out = {
    "backend": kernels.BACKEND,
    "greedy_pack": best(lambda: cv.build_cover(m, q, r)),
    "ball_reduce": best(lambda: geo.ball_reduce(m, q, cover.centers, 2 * r, w)),
    "ball_counts": best(lambda: geo.ball_counts(m, q, cover.centers, 2 * r)),
    "march_grid2": best(lambda: nd.extract_nodal(f, res)),
    "clip_measure": best(lambda: nd.nodal_in_balls(est, cover.centers, r)),
}
print(json.dumps(out))
"""


def run(pure, res, repeat):
    env = dict(os.environ, NODALLAB_PURE_NUMPY="1" if pure else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, str(res), str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.resolution, args.repeat)
    slow = run(True, args.resolution, args.repeat)
    print(f"flat 2-torus, resolution {args.resolution}, best of {args.repeat}")
    print(f"{'kernel':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for k in fast:
        if k == "backend":
            continue
        print(f"{k:<14}{fast[k]:>12.4f}{slow[k]:>12.4f}{slow[k] / fast[k]:>10.1f}")


if __name__ == "__main__":
    main()
