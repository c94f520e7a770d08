"""Time the sampling kernels under numba and under the plain-Python fallback.

Each backend runs in its own interpreter, since the switch is read at import.

    python3 benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKLOADS = {
    # name: (call, items at scale 1)
    "sample_gw binary u=0.8": ("sample_gw_many(B, 0.8, n, rng=1)", 20_000),
    "prune_gw geometric u=0.6": ("prune_gw_many(G, 0.6, n, rng=2)", 20_000),
    "prune_many fixed tree": ("prune_many(T, 0.5, n, rng=3)", 20_000),
    "kesten h=8": ("sample_kesten_many(G, 8, n, rng=4)", 5_000),
    "gstar u=0.5": ("sample_gstar_many(B, 0.5, n, rng=5)", 10_000),
    "ascension paths": ("simulate_ascension_paths(B, [0.5, 1.2, 1.5, 1.8], n, rng=6)", 5_000),
}

CHILD = r"""
import json, sys, time
from gwprune._accel import backend_name
from gwprune.offspring import FiniteSupport, Geometric
from gwprune.prune import prune_gw_many, prune_many, sample_gw_many
from gwprune.kesten import sample_gstar_many, sample_kesten_many
from gwprune.ascension import simulate_ascension_paths
from gwprune.tree import parse

B = FiniteSupport((0.5, 0.0, 0.5))
G = Geometric.critical(0.5)
T = parse("((()())(()(()()))(()()))")
job = json.loads(sys.argv[1])
out = {"backend": backend_name(), "times": {}}
for name, (call, n) in job["work"].items():
    env = {**globals(), "n": n}
    eval(call, env)  # warm-up, includes compilation
    best = float("inf")
    for _ in range(job["repeat"]):
        t0 = time.perf_counter()
        eval(call, env)
        best = min(best, time.perf_counter() - t0)
    out["times"][name] = best
print(json.dumps(out))
"""


def run(disable, work, repeat):
    env = dict(os.environ, GWPRUNE_DISABLE_JIT="1" if disable else "0")
    arg = json.dumps({"work": work, "repeat": repeat})
    r = subprocess.run([sys.executable, "-c", CHILD, arg], env=env, capture_output=True, text=True)
    if r.returncode:
        sys.exit(r.stderr)
    return json.loads(r.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    work = {k: (call, max(1, int(n * args.scale))) for k, (call, n) in WORKLOADS.items()}
    jit = run(False, work, args.repeat)
    py = run(True, work, args.repeat)
    if jit["backend"] != "numba":
        print("numba unavailable, both runs used the Python fallback", file=sys.stderr)
    print(f"{'workload':28s} {'n':>7s} {'numba s':>9s} {'python s':>9s} {'speedup':>8s}")
    for name, (_, n) in work.items():
        a, b = jit["times"][name], py["times"][name]
        print(f"{name:28s} {n:7d} {a:9.4f} {b:9.4f} {b / a:7.1f}x")


if __name__ == "__main__":
    main()
