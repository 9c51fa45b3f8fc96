"""Compare the compiled kernel extension against the pure-numpy fallback.

Runs both backends on identical inputs, checks they agree to 1e-12, and
reports wall-clock timings::

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from hierminer._kernels import BACKEND, get_backend
from hierminer.hierarchy import build_tree


def synthetic_tree(depth: int = 3, branching: int = 6):
    names = set()

    def grow(prefix: str, level: int):
        for i in range(branching):
            name = f"{prefix}n{i}" if level == depth else f"{prefix}p{i}."
            if level == depth:
                names.add(name)
            else:
                grow(name, level + 1)

    grow("", 1)
    return build_tree(names)


def bench(fn, *args, repeats: int) -> tuple[float, np.ndarray]:
    fn(*args)  # warm up
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    tree = synthetic_tree()
    parents = tree.parent_ids
    k = len(tree.concepts)
    n_buckets = 52
    pots = rng.random((k, n_buckets)) + 1e-3
    pots /= pots.sum(axis=1, keepdims=True)
    table = rng.random((300, k, n_buckets))
    buckets = rng.integers(0, n_buckets, size=k)

    try:
        compiled = get_backend("compiled")
    except ImportError:
        compiled = None
    python = get_backend("python")
    print(f"active backend: {BACKEND}")
    print(f"tree: {k} concepts, {n_buckets} buckets, {args.repeats} repeats\n")

    for label, fn_args in (
        ("sum_product_tree", (pots, parents)),
        ("gather_bucket_sums", (table, buckets)),
    ):
        t_py, out_py = bench(getattr(python, label), *fn_args, repeats=args.repeats)
        line = f"{label:20s} python {t_py * 1e3:8.3f} ms"
        if compiled is not None:
            t_c, out_c = bench(
                getattr(compiled, label), *fn_args, repeats=args.repeats
            )
            assert np.allclose(out_py, out_c, atol=1e-12), f"{label} mismatch"
            line += f"   compiled {t_c * 1e3:8.3f} ms   speedup {t_py / t_c:5.2f}x"
        else:
            line += "   (compiled extension not available)"
        print(line)


if __name__ == "__main__":
    main()
