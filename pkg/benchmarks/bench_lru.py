"""Compare the compiled LRU replay kernel with the pure-Python fallback.

    python benchmarks/bench_lru.py [--requests N] [--repeat R]

Replays one paper-scale period trace (Zipf s=3, v=3000 over 65,535 contents,
cover of four nodes) through each capacity, and separately times a full
kernel-engine simulation under each backend.
"""

import argparse
import time

import numpy as np

from chronocache import sim
from chronocache._lru_py import LruReplay as PyLru

try:
    from chronocache._lru import LruReplay as CLru
except ImportError:
    CLru = None


def time_replay(cls, keys, capacity, key_space, repeat):
    best = float("inf")
    for _ in range(repeat):
        lru = cls(capacity, key_space)
        start = time.perf_counter()
        hits = lru.replay(keys)
        best = min(best, time.perf_counter() - start)
    return best, int(hits.sum())


def time_simulation(cls, config):
    orig = sim.kernels.LruReplay
    sim.kernels.LruReplay = cls
    try:
        start = time.perf_counter()
        csv = sim.write_csv(sim.run_experiment(config))
        return time.perf_counter() - start, csv
    finally:
        sim.kernels.LruReplay = orig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--requests", type=int, default=1 << 20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    config = sim.SimConfig(engine="kernel")
    sampler = sim.ZipfSampler(config.zipf_s, config.zipf_v, config.n_contents)
    rng = np.random.default_rng(0)
    nodes = np.array([3, 5, 9, 17])
    keys = sampler.sample(rng, args.requests) * 32 + rng.choice(nodes, args.requests)
    key_space = config.n_contents * 32

    impls = [("python", PyLru)] + ([("cython", CLru)] if CLru is not None else [])
    print(f"trace replay, {args.requests} requests (best of {args.repeat})")
    print(f"{'capacity':>9} {'backend':>8} {'seconds':>9} {'Mreq/s':>8} {'hit ratio':>10}")
    for capacity in config.capacities:
        for name, cls in impls:
            secs, hits = time_replay(cls, keys, capacity, key_space, args.repeat)
            print(f"{capacity:>9} {name:>8} {secs:>9.4f} {args.requests / secs / 1e6:>8.2f} "
                  f"{hits / args.requests:>10.4f}")

    print("\nfull kernel-engine simulation (paper configuration)")
    outputs = {}
    for name, cls in impls:
        secs, outputs[name] = time_simulation(cls, config)
        print(f"{name:>8}: {secs:.2f} s")
    if len(outputs) == 2:
        print("identical CSV:", outputs["python"] == outputs["cython"])


if __name__ == "__main__":
    main()
