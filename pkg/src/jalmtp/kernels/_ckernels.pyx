# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_numpy``. Same signatures, same tie rules."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, fabs, INFINITY

cnp.import_array()


def nearest_nodes(double[:, :, ::1] nodes, double[:, ::1] points):
    cdef Py_ssize_t B = nodes.shape[0], H = nodes.shape[1]
    cdef Py_ssize_t b, h, best
    cdef double dx, dy, d2, bd2
    idx_arr = np.empty(B, dtype=np.int64)
    dist_arr = np.empty(B, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] dist = dist_arr
    for b in range(B):
        best = 0
        bd2 = INFINITY
        for h in range(H):
            dx = nodes[b, h, 0] - points[b, 0]
            dy = nodes[b, h, 1] - points[b, 1]
            d2 = dx * dx + dy * dy
            if d2 < bd2:
                bd2 = d2
                best = h
        idx[b] = best
        dist[b] = sqrt(bd2)
    return idx_arr, dist_arr


def rollout_node_min_dist(double[:, ::1] nodes, double[:, :, ::1] rollouts):
    cdef Py_ssize_t H = nodes.shape[0], M = rollouts.shape[0], T = rollouts.shape[1]
    cdef Py_ssize_t h, j, t
    cdef double dx, dy, d2, best
    out_arr = np.zeros((H, M), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for h in range(H):
        for j in range(M):
            best = INFINITY
            for t in range(T):
                dx = nodes[h, 0] - rollouts[j, t, 0]
                dy = nodes[h, 1] - rollouts[j, t, 1]
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
            out[h, j] = sqrt(best)
    return out_arr


def attention_forward(double[:, ::1] q, double[:, :, ::1] k, double[:, :, ::1] v, mask):
    cdef Py_ssize_t B = q.shape[0], d = q.shape[1], W = k.shape[1]
    cdef Py_ssize_t b, w, i
    cdef double s, top, tot, scale = 1.0 / sqrt(<double>d)
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    out_arr = np.zeros((B, d), dtype=np.float64)
    w_arr = np.zeros((B, W), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] wt = w_arr
    for b in range(B):
        top = -INFINITY
        for w in range(W):
            if m[b, w]:
                s = 0.0
                for i in range(d):
                    s += k[b, w, i] * q[b, i]
                s *= scale
                wt[b, w] = s
                if s > top:
                    top = s
        tot = 0.0
        for w in range(W):
            if m[b, w]:
                wt[b, w] = exp(wt[b, w] - top)
                tot += wt[b, w]
        for w in range(W):
            if m[b, w]:
                wt[b, w] /= tot
                for i in range(d):
                    out[b, i] += wt[b, w] * v[b, w, i]
    return out_arr, w_arr


def attention_backward(double[:, ::1] g, double[:, ::1] q, double[:, :, ::1] k,
                       double[:, :, ::1] v, double[:, ::1] wt):
    cdef Py_ssize_t B = q.shape[0], d = q.shape[1], W = k.shape[1]
    cdef Py_ssize_t b, w, i
    cdef double s, acc, scale = 1.0 / sqrt(<double>d)
    gq_arr = np.zeros((B, d), dtype=np.float64)
    gk_arr = np.zeros((B, W, d), dtype=np.float64)
    gv_arr = np.zeros((B, W, d), dtype=np.float64)
    gw_arr = np.zeros(W, dtype=np.float64)
    cdef double[:, ::1] gq = gq_arr
    cdef double[:, :, ::1] gk = gk_arr
    cdef double[:, :, ::1] gv = gv_arr
    cdef double[::1] gw = gw_arr
    for b in range(B):
        acc = 0.0
        for w in range(W):
            if wt[b, w] == 0.0:
                gw[w] = 0.0
                continue
            s = 0.0
            for i in range(d):
                s += v[b, w, i] * g[b, i]
                gv[b, w, i] = wt[b, w] * g[b, i]
            gw[w] = s
            acc += wt[b, w] * s
        for w in range(W):
            if wt[b, w] == 0.0:
                continue
            s = wt[b, w] * (gw[w] - acc) * scale
            for i in range(d):
                gq[b, i] += s * k[b, w, i]
                gk[b, w, i] = s * q[b, i]
    return gq_arr, gk_arr, gv_arr


cdef inline double _sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


cdef inline double _tanh(double x) noexcept nogil:
    # one exp instead of libm tanh, which is several times slower here
    cdef double t = exp(-2.0 * fabs(x))
    cdef double y = (1.0 - t) / (1.0 + t)
    return y if x >= 0.0 else -y


def gru_gates_forward(double[:, ::1] gx, double[:, ::1] gh, double[:, ::1] h):
    cdef Py_ssize_t B = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t b, i
    cdef double rr, zz, nn
    hn_arr = np.empty((B, d), dtype=np.float64)
    r_arr = np.empty((B, d), dtype=np.float64)
    z_arr = np.empty((B, d), dtype=np.float64)
    n_arr = np.empty((B, d), dtype=np.float64)
    cdef double[:, ::1] hn = hn_arr
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] n = n_arr
    for b in range(B):
        for i in range(d):
            rr = _sigmoid(gx[b, i] + gh[b, i])
            zz = _sigmoid(gx[b, d + i] + gh[b, d + i])
            nn = _tanh(gx[b, 2 * d + i] + rr * gh[b, 2 * d + i])
            r[b, i] = rr
            z[b, i] = zz
            n[b, i] = nn
            hn[b, i] = (1.0 - zz) * nn + zz * h[b, i]
    return hn_arr, r_arr, z_arr, n_arr


def gru_gates_backward(double[:, ::1] g, double[:, ::1] h, double[:, ::1] r,
                       double[:, ::1] z, double[:, ::1] n, gh_n_in):
    cdef double[:, ::1] gh_n = np.ascontiguousarray(gh_n_in)
    cdef Py_ssize_t B = h.shape[0], d = h.shape[1]
    cdef Py_ssize_t b, i
    cdef double dn, dz, dr
    dgx_arr = np.empty((B, 3 * d), dtype=np.float64)
    dgh_arr = np.empty((B, 3 * d), dtype=np.float64)
    dh_arr = np.empty((B, d), dtype=np.float64)
    cdef double[:, ::1] dgx = dgx_arr
    cdef double[:, ::1] dgh = dgh_arr
    cdef double[:, ::1] dh = dh_arr
    for b in range(B):
        for i in range(d):
            dn = g[b, i] * (1.0 - z[b, i]) * (1.0 - n[b, i] * n[b, i])
            dz = g[b, i] * (h[b, i] - n[b, i]) * z[b, i] * (1.0 - z[b, i])
            dr = dn * gh_n[b, i] * r[b, i] * (1.0 - r[b, i])
            dgx[b, i] = dr
            dgx[b, d + i] = dz
            dgx[b, 2 * d + i] = dn
            dgh[b, i] = dr
            dgh[b, d + i] = dz
            dgh[b, 2 * d + i] = dn * r[b, i]
            dh[b, i] = g[b, i] * z[b, i]
    return dgx_arr, dgh_arr, dh_arr
