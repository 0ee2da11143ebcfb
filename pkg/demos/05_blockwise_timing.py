"""Why the coefficient update runs blockwise.

Sampling all p coefficients jointly needs a p x p factorization, O(p^3).
Conditioning d coordinates at a time on the rest costs O(d^3 + n(p-d))
per block; over p/d blocks the total is minimized near d = (n p)^(1/3),
giving O(n^(2/3) p^(5/3)) per sweep.  At n=100, p=2000 that is the
difference between milliseconds and a good fraction of a second.
"""

import math

from bcs import benchmark_beta_sweep

n, p = 100, 2000
d_auto = math.ceil((n * p) ** (1 / 3))
results = benchmark_beta_sweep(n, p, [1, d_auto, 200, p], sweeps=10, seed=0)

print(f"one full coefficient sweep, n={n}, p={p} (median of 10):\n")
print(f"{'block size':>12s} {'ms/sweep':>10s}")
for rec in sorted(results.values(), key=lambda r: r["block_size"]):
    label = f"{rec['block_size']}"
    if rec["block_size"] == d_auto:
        label += " (auto)"
    if rec["block_size"] == p:
        label += " (full)"
    print(f"{label:>12s} {rec['median_seconds'] * 1e3:10.2f}")

auto = results[f"d={d_auto}"]["median_seconds"]
full = results[f"d={p}"]["median_seconds"]
print(f"\nauto vs full speedup: {full / auto:.1f}x")
