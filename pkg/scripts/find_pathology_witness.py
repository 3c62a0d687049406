"""Search small, heavily censored datasets for one where the unnormalized V
energy is negative while the normalized V energy is positive.

Prints the first witness as Python literals ready to paste into a test fixture.
"""

import argparse

import numpy as np

from kmtest.data import CensoredSample, TwoSampleData
from kmtest.kernels import KernelSpec
from kmtest.statistics import UNNORMALIZED_V, V, StatisticSpec, statistic


def search(seed: int, tries: int, n: int):
    rng = np.random.default_rng(seed)
    energy_v = StatisticSpec(KernelSpec("energy"), V)
    energy_raw = StatisticSpec(KernelSpec("energy"), UNNORMALIZED_V)
    for _ in range(tries):
        t = np.round(rng.uniform(0, 10, (2, n)), 1)
        e = rng.random((2, n)) < 0.4
        e[:, 0] = True  # at least one event per group
        data = TwoSampleData(CensoredSample(t[0], e[0], "0"), CensoredSample(t[1], e[1], "1"))
        unnorm = statistic(energy_raw, data).raw
        norm = statistic(energy_v, data).raw
        if unnorm < -1e-6 and norm > 1e-6:
            return data, unnorm, norm
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tries", type=int, default=10_000)
    ap.add_argument("--n", type=int, default=4)
    args = ap.parse_args()
    found = search(args.seed, args.tries, args.n)
    if found is None:
        raise SystemExit("no witness found")
    data, unnorm, norm = found
    for g in (data.group0, data.group1):
        print(f"time={g.time.tolist()}, event={g.event.astype(int).tolist()}")
    print(f"unnormalized={unnorm!r} normalized={norm!r}")


if __name__ == "__main__":
    main()
