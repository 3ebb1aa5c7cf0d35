"""Combinatorial hot kernels with optional numba acceleration.

Two call sites are genuinely loop-bound at desk scale: the exhaustive
search over balanced BRI tables (up to 10^7 visited nodes) and the
enumeration of typical strings (up to 10^6 strings).  Both carry a
numba-jitted path and a fallback selected by the environment variable
``CQWIRETAP_NO_NUMBA=1``: the table search falls back to the same
algorithm in pure Python, the string mask to vectorized numpy.

``benchmarks/bench_kernels.py`` times the paths against each other.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("CQWIRETAP_NO_NUMBA", "") != "1"


def _search_step_impl(table, nxt, row_counts, col_counts, pos, n_s, n_x, n_m, d_s, d_x, budget):
    """Resume a depth-first search over balanced tables.

    Cells are filled row-major; row 0 is preset to the sorted block
    partition and rows from index 2 on are constrained to be
    lexicographically >= their predecessor (symmetry reduction; sound
    because row and column permutations preserve biregularity and section
    spectra).  Row and column counts per output value must never exceed
    d_s / d_x and must reach them exactly on completion, which the
    balanced cell counts force automatically.

    Returns (status, pos, nodes): status 1 = complete table found (state
    resumes past it on the next call), 0 = search space exhausted,
    -1 = node budget exceeded.
    """
    n_cells = n_s * n_x
    nodes = 0
    if pos == n_cells:
        # resuming past a previously returned solution: undo its last cell
        pos -= 1
        r = pos // n_x
        x = pos - r * n_x
        v = table[r, x]
        row_counts[r, v] -= 1
        col_counts[x, v] -= 1
    while True:
        r = pos // n_x
        x = pos - r * n_x
        # lexicographic lower bound vs the previous row
        lb = 0
        if r >= 2:
            tight = True
            for j in range(x):
                if table[r, j] != table[r - 1, j]:
                    tight = False
                    break
            if tight:
                lb = table[r - 1, x]
        v = nxt[pos]
        if v < lb:
            v = lb
        advanced = False
        while v < n_m:
            nodes += 1
            if nodes > budget:
                nxt[pos] = v
                return -1, pos, nodes
            if row_counts[r, v] < d_s and col_counts[x, v] < d_x:
                table[r, x] = v
                row_counts[r, v] += 1
                col_counts[x, v] += 1
                nxt[pos] = v + 1
                pos += 1
                if pos == n_cells:
                    return 1, pos, nodes
                nxt[pos] = 0
                advanced = True
                break
            v += 1
        if advanced:
            continue
        # exhausted this cell: backtrack
        nxt[pos] = 0
        pos -= 1
        if pos < n_x:
            return 0, pos, nodes
        r = pos // n_x
        x = pos - r * n_x
        v = table[r, x]
        row_counts[r, v] -= 1
        col_counts[x, v] -= 1


def _typical_mask_impl(n_symbols, n, p, tol, forbid):
    """Mask over all n_symbols^n strings in big-endian lexicographic order.

    String i is typical when |N(a|x)/n - p[a]| <= tol for every symbol a
    and N(a|x) = 0 wherever forbid[a] (zero-probability symbols).
    """
    size = n_symbols**n
    mask = np.zeros(size, dtype=np.bool_)
    counts = np.zeros(n_symbols, dtype=np.int64)
    digits = np.zeros(n, dtype=np.int64)
    counts[0] = n  # string 00...0
    for i in range(size):
        if i > 0:
            # increment the mixed-radix counter from the right
            k = n - 1
            while True:
                counts[digits[k]] -= 1
                digits[k] += 1
                if digits[k] < n_symbols:
                    counts[digits[k]] += 1
                    break
                digits[k] = 0
                counts[0] += 1
                k -= 1
        ok = True
        for a in range(n_symbols):
            if forbid[a]:
                if counts[a] != 0:
                    ok = False
                    break
            elif abs(counts[a] / n - p[a]) > tol:
                ok = False
                break
        mask[i] = ok
    return mask


if HAS_NUMBA:
    _search_step_jit = numba.njit(cache=True)(_search_step_impl)
    _typical_mask_jit = numba.njit(cache=True)(_typical_mask_impl)


def _typical_mask_numpy(n_symbols, n, p, tol, forbid):
    """Vectorized fallback for the typical-string mask."""
    size = n_symbols**n
    idx = np.arange(size)
    counts = np.zeros((size, n_symbols), dtype=np.int64)
    for k in range(n):
        digit = (idx // n_symbols ** (n - 1 - k)) % n_symbols
        np.add.at(counts, (idx, digit), 1)
    ok = np.ones(size, dtype=bool)
    for a in range(n_symbols):
        if forbid[a]:
            ok &= counts[:, a] == 0
        else:
            ok &= np.abs(counts[:, a] / n - p[a]) <= tol
    return ok


def search_step(table, nxt, row_counts, col_counts, pos, n_s, n_x, n_m, d_s, d_x, budget):
    """Dispatch the table-search kernel to the active path."""
    if USE_NUMBA:
        return _search_step_jit(
            table, nxt, row_counts, col_counts, pos, n_s, n_x, n_m, d_s, d_x, budget
        )
    return _search_step_impl(
        table, nxt, row_counts, col_counts, pos, n_s, n_x, n_m, d_s, d_x, budget
    )


def typical_mask(n_symbols, n, p, tol, forbid):
    """Dispatch the typical-string mask to the active path."""
    p = np.asarray(p, dtype=np.float64)
    forbid = np.asarray(forbid, dtype=np.bool_)
    if USE_NUMBA:
        return _typical_mask_jit(n_symbols, n, p, float(tol), forbid)
    return _typical_mask_numpy(n_symbols, n, p, float(tol), forbid)
