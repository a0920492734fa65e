# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the backend_numpy kernels.

Semantics match backend_numpy exactly: conv2d agrees to float rounding,
place_points consumes the identical draw stream and therefore produces
bit-identical placements.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil

cnp.import_array()


def conv2d_forward(double[:, :, ::1] x, double[:, :, :, ::1] w, double[::1] b):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    y_arr = np.empty((c_out, h, wd))
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t co, ci, dy, dx, i, j, i0, i1, j0, j1, si, sj
    cdef double wv

    for co in range(c_out):
        for i in range(h):
            for j in range(wd):
                y[co, i, j] = b[co]
    for co in range(c_out):
        for ci in range(c_in):
            for dy in range(kh):
                for dx in range(kw):
                    wv = w[co, ci, dy, dx]
                    i0 = ph - dy if ph > dy else 0
                    i1 = h + ph - dy if dy > ph else h
                    j0 = pw - dx if pw > dx else 0
                    j1 = wd + pw - dx if dx > pw else wd
                    for i in range(i0, i1):
                        si = i + dy - ph
                        for j in range(j0, j1):
                            y[co, i, j] += wv * x[ci, si, j + dx - pw]
    return y_arr


def conv2d_backward(double[:, :, ::1] x, double[:, :, :, ::1] w, double[:, :, :] grad_y):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    gx_arr = np.zeros((c_in, h, wd))
    gw_arr = np.zeros((c_out, c_in, kh, kw))
    gb_arr = np.zeros(c_out)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t co, ci, dy, dx, i, j, i0, i1, j0, j1, si
    cdef double wv, acc, g

    for co in range(c_out):
        acc = 0.0
        for i in range(h):
            for j in range(wd):
                acc += grad_y[co, i, j]
        gb[co] = acc
    for co in range(c_out):
        for ci in range(c_in):
            for dy in range(kh):
                for dx in range(kw):
                    wv = w[co, ci, dy, dx]
                    i0 = ph - dy if ph > dy else 0
                    i1 = h + ph - dy if dy > ph else h
                    j0 = pw - dx if pw > dx else 0
                    j1 = wd + pw - dx if dx > pw else wd
                    acc = 0.0
                    for i in range(i0, i1):
                        si = i + dy - ph
                        for j in range(j0, j1):
                            g = grad_y[co, i, j]
                            acc += g * x[ci, si, j + dx - pw]
                            gx[ci, si, j + dx - pw] += wv * g
                    gw[co, ci, dy, dx] = acc
    return gx_arr, gw_arr, gb_arr


def place_points(Py_ssize_t h, Py_ssize_t w, long long[::1] ys, long long[::1] xs,
                 Py_ssize_t n_placed, Py_ssize_t count, double min_dist,
                 unsigned char[:, ::1] occ, long long[::1] draws,
                 long long since_accept, long long attempts_cap):
    cdef Py_ssize_t rw = 0, k, y, x, y0, y1, x0, x1, yy, xx
    cdef double r2 = min_dist * min_dist
    cdef long long idx
    cdef bint ok

    if n_placed >= count:
        return n_placed, since_accept, 1
    if min_dist > 1.0:
        rw = <Py_ssize_t> ceil(min_dist) - 1
    for k in range(draws.shape[0]):
        idx = draws[k]
        y = <Py_ssize_t> (idx // w)
        x = <Py_ssize_t> (idx - y * w)
        ok = occ[y, x] == 0
        if ok and rw > 0:
            y0 = y - rw if y >= rw else 0
            y1 = y + rw + 1 if y + rw + 1 < h else h
            x0 = x - rw if x >= rw else 0
            x1 = x + rw + 1 if x + rw + 1 < w else w
            for yy in range(y0, y1):
                for xx in range(x0, x1):
                    if occ[yy, xx] and (yy - y) * (yy - y) + (xx - x) * (xx - x) < r2:
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            occ[y, x] = 1
            ys[n_placed] = y
            xs[n_placed] = x
            n_placed += 1
            since_accept = 0
            if n_placed == count:
                return n_placed, since_accept, 1
        else:
            since_accept += 1
            if since_accept >= attempts_cap:
                return n_placed, since_accept, -1
    return n_placed, since_accept, 0
