"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends get identical inputs; results are checked for agreement before
timing.
"""

import argparse
import timeit
from math import comb

import numpy as np

from projrecover.exterior import _wedge_table, subset_array
from projrecover.kernels import backends


def cases(rng):
    for dim, k, l in [(4, 2, 2), (6, 3, 3), (8, 4, 3), (10, 5, 4)]:
        a = rng.standard_normal(comb(dim, k)) + 1j * rng.standard_normal(comb(dim, k))
        b = rng.standard_normal(comb(dim, l)) + 1j * rng.standard_normal(comb(dim, l))
        tab = _wedge_table(dim, k, l)
        yield f"wedge D={dim} {k}^{l}", lambda mod, a=a, b=b, tab=tab: mod.wedge(a, b, *tab)
        yield (f"wedge_matrix D={dim} {k}^{l}",
               lambda mod, a=a, tab=tab, n=comb(dim, l): mod.wedge_left_matrix(a, *tab, n))
    for m, r in [(4, 2), (6, 3), (8, 4)]:
        mat = rng.standard_normal((m, m + 1)) + 1j * rng.standard_normal((m, m + 1))
        rows, cols = subset_array(m, r), subset_array(m + 1, r)
        yield f"compound {m}x{m + 1} r={r}", lambda mod, A=mat, ro=rows, co=cols: mod.compound(A, ro, co)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mods = backends()
    if "cython" not in mods:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(0)
    names = list(mods)
    print(f"{'kernel':28s}" + "".join(f"{n:>14s}" for n in names) +
          ("   speedup" if len(names) > 1 else ""))
    for label, fn in cases(rng):
        ref = fn(mods["python"])
        times = []
        for name in names:
            assert np.allclose(fn(mods[name]), ref), f"{label}: {name} disagrees"
            timer = timeit.Timer(lambda: fn(mods[name]))
            n, _ = timer.autorange()
            times.append(min(timer.repeat(args.repeat, n)) / n)
        row = f"{label:28s}" + "".join(f"{t * 1e6:12.1f}us" for t in times)
        if len(times) > 1:
            row += f"   {times[0] / times[1]:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
