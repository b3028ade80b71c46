"""Key-distance statistics for two chains sharing one registry.

Compares within-chain and cross-chain pairwise Hamming distances of map
keys, plus per-key Hamming weight, across several seeds.  Without the
secrets the two populations should look the same.

    python scripts/rate_hiding_stats.py --seeds 1 2 3
"""

import argparse
import itertools
import statistics

from statepin.crypto_core import hamming_distance, hamming_weight
from statepin.scenario import load_scenario, run_scenario


def pairwise_mean(a, b=None):
    pairs = itertools.combinations(a, 2) if b is None else itertools.product(a, b)
    return statistics.mean(hamming_distance(x, y) for x, y in pairs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[11])
    args = ap.parse_args()

    spec = load_scenario("rate_hiding")
    print("seed  n_a  n_b  weight_a  weight_b  within_a  within_b   cross  rel_diff")
    for seed in args.seeds:
        result, _ = run_scenario(spec, seed)
        a = [k for k, c in result.ground_truth.items() if c == "chain_a"]
        b = [k for k, c in result.ground_truth.items() if c == "chain_b"]
        wa, wb = pairwise_mean(a), pairwise_mean(b)
        cross = pairwise_mean(a, b)
        within = (wa + wb) / 2
        print(f"{seed:4d} {len(a):4d} {len(b):4d} "
              f"{statistics.mean(map(hamming_weight, a)):9.2f} {statistics.mean(map(hamming_weight, b)):9.2f} "
              f"{wa:9.2f} {wb:9.2f} {cross:7.2f} {abs(cross - within) / within:9.4%}")


if __name__ == "__main__":
    main()
