"""Pure numpy/Python kernels; reference implementation and fallback for the compiled module."""
import numpy as np


def hungarian(cost):
    """Square assignment by shortest augmenting paths with potentials.

    Returns (col_of_row, u, v) with u[i] + v[j] <= cost[i, j] everywhere and
    equality on the assigned pairs.
    """
    C = np.asarray(cost, dtype=np.float64)
    n = C.shape[0]
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0)
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row matched to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    rows = C.tolist()
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = rows[i0 - 1]
            ui0 = u[i0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, np.array(u[1:]), np.array(v[1:])


def admm_step(r, z1, z2, u1, u2, cap, thresh, alpha):
    """One proximal/dual sweep of the split residual problem, in place.

    r holds q - D phi laid out as [x-slots | y-slots] (length 2N). z1 is the
    copy carrying the per-node Euclidean norm, z2 the copy carrying the per-edge
    box |z2| <= cap. Returns the squared primal residual.
    """
    n = r.shape[0] // 2
    r1 = alpha * r + (1.0 - alpha) * z1
    r2 = alpha * r + (1.0 - alpha) * z2
    w = r1 + u1
    nrm = np.hypot(w[:n], w[n:])
    s = np.maximum(0.0, 1.0 - thresh / np.maximum(nrm, 1e-300))
    z1[:n] = w[:n] * s
    z1[n:] = w[n:] * s
    np.clip(r2 + u2, -cap, cap, out=z2)
    u1 += r1 - z1
    u2 += r2 - z2
    return float(((r - z1) ** 2).sum() + ((r - z2) ** 2).sum())
