"""Compare the compiled and pure-Python GF(256) kernels.

    python benchmarks/bench_gf256.py [--repeat N] [--payload BYTES]

Each workload runs on both backends with identical inputs; outputs are checked
for equality before timings are reported.
"""

import argparse
import importlib
import random
import sys
import timeit


def load_backends():
    out = {"python": importlib.import_module("crnsim._gf256_py")}
    try:
        out["cython"] = importlib.import_module("crnsim._gf256_ext")
    except ImportError:
        print("compiled extension not built; timing the Python kernels only", file=sys.stderr)
    return out


def workloads(rng, batch, payload):
    natives = [rng.randbytes(payload) for _ in range(batch)]
    coeffs = rng.randbytes(batch)
    while True:
        rows = [rng.randbytes(batch) for _ in range(batch)]
        # full-rank system for solve
        if importlib.import_module("crnsim._gf256_py").rank(rows) == batch:
            break
    mixed = [importlib.import_module("crnsim._gf256_py").combine(natives, r) for r in rows]
    stream = [rng.randbytes(batch) for _ in range(4 * batch)]

    def span_fill(mod):
        s = mod.Span(batch)
        for v in stream:
            s.add(v)
        return s.rank

    return {
        "combine": lambda m: m.combine(natives, coeffs),
        "rank": lambda m: m.rank(rows),
        "solve": lambda m: m.solve(rows, mixed),
        "span": span_fill,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--batch", type=int, default=10)
    ap.add_argument("--payload", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    backends = load_backends()
    jobs = workloads(random.Random(args.seed), args.batch, args.payload)
    print(f"batch={args.batch} payload={args.payload}B repeat={args.repeat}")
    print(f"{'kernel':<10}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for kernel, fn in jobs.items():
        results = {name: fn(mod) for name, mod in backends.items()}
        if len({repr(r) for r in results.values()}) != 1:
            raise SystemExit(f"{kernel}: backends disagree")
        times = {name: min(timeit.repeat(lambda m=mod: fn(m), number=args.repeat, repeat=3)) / args.repeat
                 for name, mod in backends.items()}
        line = f"{kernel:<10}" + "".join(f"{t * 1e6:>11.1f} us" for t in times.values())
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
