"""Timing comparison of the jitted and fallback kernel paths.

Run from the repository root::

    python3 benchmarks/bench_kernels.py

Times the typical-string mask on 4^10 strings and the balanced-table
search driven to exhaustion, once through the numba path and once
through the fallback, and prints the best-of-three wall times with the
speedup.  Results are machine-dependent; the point of the script is the
ratio, not the absolute numbers.
"""

import time

import numpy as np

from cqwiretap import _kernels


def best_of(fn, repeats=3):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def mask_task(impl):
    p = np.array([0.4, 0.3, 0.2, 0.1])
    forbid = np.array([False] * 4)

    def run():
        impl(4, 10, p, 0.05, forbid)

    return run


def search_task(impl, n_s=6, n_x=6, n_m=2, d_s=3, d_x=3, budget=10**8):
    def run():
        table = np.zeros((n_s, n_x), dtype=np.int64)
        table[0] = np.arange(n_x) // d_s
        row_counts = np.zeros((n_s, n_m), dtype=np.int64)
        row_counts[0] = d_s
        col_counts = np.zeros((n_x, n_m), dtype=np.int64)
        col_counts[np.arange(n_x), table[0]] = 1
        nxt = np.zeros(n_s * n_x, dtype=np.int64)
        pos = n_x
        solutions = 0
        nodes_total = 0
        while True:
            status, pos, nodes = impl(
                table, nxt, row_counts, col_counts, pos, n_s, n_x, n_m, d_s, d_x, budget
            )
            nodes_total += int(nodes)
            if status == 1:
                solutions += 1
            elif status == 0:
                return solutions, nodes_total

    return run


def main():
    rows = []
    if _kernels.HAS_NUMBA:
        # warm the jit caches before timing
        mask_task(_kernels._typical_mask_jit)()
        search_task(_kernels._search_step_jit, 4, 4, 2, 2, 2)()

    mask_fallback = best_of(mask_task(_kernels._typical_mask_numpy))
    row = ["typical_mask 4^10", f"{mask_fallback:9.4f}s"]
    if _kernels.HAS_NUMBA:
        mask_jit = best_of(mask_task(_kernels._typical_mask_jit))
        row += [f"{mask_jit:9.4f}s", f"{mask_fallback / mask_jit:6.1f}x"]
    rows.append(row)

    solutions, nodes = search_task(_kernels._search_step_impl)()
    search_fallback = best_of(search_task(_kernels._search_step_impl))
    row = [f"table search 6x6/2 ({solutions} tables, {nodes} nodes)", f"{search_fallback:9.4f}s"]
    if _kernels.HAS_NUMBA:
        search_jit = best_of(search_task(_kernels._search_step_jit))
        row += [f"{search_jit:9.4f}s", f"{search_fallback / search_jit:6.1f}x"]
    rows.append(row)

    header = ["kernel", "fallback"]
    if _kernels.HAS_NUMBA:
        header += ["numba", "speedup"]
    else:
        print("numba not installed; timing the fallback path only")
    width = max(len(r[0]) for r in rows + [header])
    print("  ".join([header[0].ljust(width)] + header[1:]))
    for r in rows:
        print("  ".join([r[0].ljust(width)] + r[1:]))


if __name__ == "__main__":
    main()
