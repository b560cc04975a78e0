"""Compare spectral flow with the relative Morse index on random symmetric pairs.

Prints dimension, flow, index, number of crossings and partition nodes.
"""
import argparse
import time

import numpy as np

from relmorse.index import relative_morse_index, spectral_flow
from relmorse.operators import TruncatedOperator


def random_pair(rng, n):
    A, B = rng.normal(size=(2, n, n))
    return TruncatedOperator.abstract(A + A.T), TruncatedOperator.abstract(B + B.T)


def main(pairs: int, max_dim: int, seed: int):
    rng = np.random.default_rng(seed)
    agree = 0
    t0 = time.perf_counter()
    for _ in range(pairs):
        n = int(rng.integers(2, max_dim + 1))
        A, B = random_pair(rng, n)
        flow = spectral_flow(A, B)
        idx = relative_morse_index(A, B).index
        agree += flow.flow == idx
        print(f"n={n:3d} flow={flow.flow:+3d} index={idx:+3d} crossings={len(flow.crossings):3d}"
              f" nodes={len(flow.partition):4d}")
    print(f"{agree}/{pairs} agree in {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--max-dim", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    main(a.pairs, a.max_dim, a.seed)
