"""Compare the numba kernels with the pure numpy/scipy/Python fallbacks.

Each mode runs in a fresh interpreter because the backend is chosen at import
time from ``MACRONODE_DISABLE_NUMBA``. Results of both modes are checked for
agreement before timings are printed::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--distance 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
from macronode import _accel
from macronode.decoder import DecodingGraph, build_matching_graph, mwpm
from macronode.gaussian import StatePrepConfig
from macronode.lattice import build_lattice
from macronode.montecarlo import count_failures
from macronode.reduction import theta_ratio

repeat, d = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)


def best_of(fn):
    fn()  # warm-up (includes compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


x = rng.uniform(-20, 20, 200_000)
s2 = rng.uniform(0.01, 1.0, x.size)
b = rng.integers(0, 2, x.size)
t_theta, f = best_of(lambda: theta_ratio(x, b, s2))

dg = DecodingGraph.from_lattice(build_lattice(d))
w = rng.random(dg.n_faces)
syn = np.sort(rng.choice(dg.n_cubes, 2 * (dg.n_cubes // 8), replace=False))
t_dij, mg = best_of(lambda: build_matching_graph(syn, w, dg))

t_match, pairs = best_of(lambda: mwpm(mg.weights))
total = float(sum(mg.weights[i, j] for i, j in pairs))

t_trials, k = best_of(lambda: count_failures(d, 0.1, StatePrepConfig(), 1, 0, 50))

print(json.dumps({
    "numba": _accel.USE_NUMBA,
    "theta_s": t_theta, "theta_checksum": float(f.sum()),
    "dijkstra_s": t_dij, "dijkstra_checksum": float(mg.weights.sum()),
    "mwpm_s": t_match, "mwpm_total": total, "mwpm_vertices": int(len(syn)),
    "trials_s": t_trials, "trials_failures": int(k),
}))
"""


def run_mode(disable: bool, repeat: int, d: int) -> dict:
    env = dict(os.environ, MACRONODE_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(d)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--distance", type=int, default=5)
    args = ap.parse_args(argv)

    fast = run_mode(False, args.repeat, args.distance)
    slow = run_mode(True, args.repeat, args.distance)
    if not fast["numba"]:
        print("numba unavailable: both runs used the fallback")

    np.testing.assert_allclose(fast["theta_checksum"], slow["theta_checksum"], rtol=1e-12)
    np.testing.assert_allclose(fast["dijkstra_checksum"], slow["dijkstra_checksum"], rtol=1e-12)
    np.testing.assert_allclose(fast["mwpm_total"], slow["mwpm_total"], rtol=1e-9)

    print(f"distance {args.distance}, best of {args.repeat}")
    print(f"{'kernel':<32}{'numba [ms]':>12}{'fallback [ms]':>15}{'speed-up':>10}")
    rows = [
        ("theta ratio (2e5 points)", "theta_s"),
        ("Dijkstra matching graph", "dijkstra_s"),
        (f"MWPM ({fast['mwpm_vertices']} vertices)", "mwpm_s"),
        ("50 full trials", "trials_s"),
    ]
    for label, key in rows:
        a, b = fast[key] * 1e3, slow[key] * 1e3
        print(f"{label:<32}{a:>12.2f}{b:>15.2f}{b / a:>9.1f}x")
    print("results agree between backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
