# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in _kernels_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def hungarian(cost):
    cdef double[:, ::1] C = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = C.shape[0]
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0)
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef long[::1] p = np.zeros(n + 1, dtype=np.int_)
    cdef long[::1] way = np.zeros(n + 1, dtype=np.int_)
    cdef char[::1] used = np.zeros(n + 1, dtype=np.int8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = C[i0 - 1, j - 1] - u[i0] - v[j]
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
    return col_of_row, np.asarray(u[1:]).copy(), np.asarray(v[1:]).copy()


def admm_step(double[::1] r, double[::1] z1, double[::1] z2, double[::1] u1,
              double[::1] u2, double[::1] cap, double thresh, double alpha):
    cdef Py_ssize_t n = r.shape[0] // 2
    cdef Py_ssize_t k
    cdef double ax, ay, wx, wy, nrm, s, b, c, t, res = 0.0
    cdef double beta = 1.0 - alpha
    for k in range(n):
        ax = alpha * r[k] + beta * z1[k]
        ay = alpha * r[n + k] + beta * z1[n + k]
        wx = ax + u1[k]
        wy = ay + u1[n + k]
        nrm = sqrt(wx * wx + wy * wy)
        s = 1.0 - thresh / nrm if nrm > thresh else 0.0
        z1[k] = wx * s
        z1[n + k] = wy * s
        u1[k] += ax - z1[k]
        u1[n + k] += ay - z1[n + k]
        res += (r[k] - z1[k]) ** 2 + (r[n + k] - z1[n + k]) ** 2
    for k in range(2 * n):
        b = alpha * r[k] + beta * z2[k]
        t = b + u2[k]
        c = cap[k]
        if t > c:
            t = c
        elif t < -c:
            t = -c
        z2[k] = t
        u2[k] += b - t
        res += (r[k] - t) ** 2
    return res
