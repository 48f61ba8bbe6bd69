"""Dynamic time warping: full O(NM) table plus deterministic backtracking.

Local cost is the squared sample difference; steps are {(1,0), (0,1), (1,1)}
with no window constraint. Backtracking breaks cost ties by preferring the
diagonal step, then (1,0), then (0,1), so the returned path is unique. The
cumulative table is float32 (16 MB for a 2048x2048 pair).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _dtw_kernel(a, b):
    n = a.size
    m = b.size
    d = np.empty((n, m), dtype=np.float32)
    d[0, 0] = (a[0] - b[0]) ** 2
    for j in range(1, m):
        d[0, j] = d[0, j - 1] + (a[0] - b[j]) ** 2
    for i in range(1, n):
        d[i, 0] = d[i - 1, 0] + (a[i] - b[0]) ** 2
        for j in range(1, m):
            best = d[i - 1, j - 1]
            if d[i - 1, j] < best:
                best = d[i - 1, j]
            if d[i, j - 1] < best:
                best = d[i, j - 1]
            d[i, j] = best + (a[i] - b[j]) ** 2

    path = np.empty((n + m - 1, 2), dtype=np.int32)
    k = n + m - 2
    i = n - 1
    j = m - 1
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = d[i - 1, j - 1]
            up = d[i - 1, j]
            left = d[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k -= 1
        path[k, 0] = i
        path[k, 1] = j
    return d[n - 1, m - 1], path[k:]


def dtw_align(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimal squared-difference cost and the tie-broken optimal path."""
    a32 = np.ascontiguousarray(a, dtype=np.float32)
    b32 = np.ascontiguousarray(b, dtype=np.float32)
    cost, path = _dtw_kernel(a32, b32)
    return float(cost), np.ascontiguousarray(path)
