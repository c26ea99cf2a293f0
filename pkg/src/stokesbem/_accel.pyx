# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly hot loops (see _slow.py for the reference semantics)."""
from libc.math cimport sqrt

import numpy as np

name = "cython"


def stokes_rows(double[:, ::1] Y, double[:, ::1] X, double[:, ::1] NRM,
                double[:, ::1] SJW, double[:, :, :, ::1] out_g,
                double[:, :, :, ::1] out_t, bint with_t=True):
    cdef Py_ssize_t m = Y.shape[0], nq = X.shape[0], nloc = SJW.shape[1]
    cdef Py_ssize_t a, q, A, i, j
    cdef double rx, ry, rz, rn, inv, bx, by, bz, s, w
    cdef double g[3][3]
    cdef double t[3][3]
    with nogil:
        for a in range(m):
            for q in range(nq):
                rx = X[q, 0] - Y[a, 0]
                ry = X[q, 1] - Y[a, 1]
                rz = X[q, 2] - Y[a, 2]
                rn = sqrt(rx * rx + ry * ry + rz * rz)
                inv = 1.0 / rn
                bx = rx * inv
                by = ry * inv
                bz = rz * inv
                g[0][0] = (1.0 + bx * bx) * inv
                g[0][1] = bx * by * inv
                g[0][2] = bx * bz * inv
                g[1][1] = (1.0 + by * by) * inv
                g[1][2] = by * bz * inv
                g[2][2] = (1.0 + bz * bz) * inv
                g[1][0] = g[0][1]
                g[2][0] = g[0][2]
                g[2][1] = g[1][2]
                if with_t:
                    s = -6.0 * (bx * NRM[q, 0] + by * NRM[q, 1] + bz * NRM[q, 2]) * inv * inv
                    t[0][0] = s * bx * bx
                    t[0][1] = s * bx * by
                    t[0][2] = s * bx * bz
                    t[1][1] = s * by * by
                    t[1][2] = s * by * bz
                    t[2][2] = s * bz * bz
                    t[1][0] = t[0][1]
                    t[2][0] = t[0][2]
                    t[2][1] = t[1][2]
                for A in range(nloc):
                    w = SJW[q, A]
                    if w == 0.0:
                        continue
                    for i in range(3):
                        out_g[a, i, A, 0] += g[i][0] * w
                        out_g[a, i, A, 1] += g[i][1] * w
                        out_g[a, i, A, 2] += g[i][2] * w
                    if with_t:
                        for i in range(3):
                            out_t[a, i, A, 0] += t[i][0] * w
                            out_t[a, i, A, 1] += t[i][1] * w
                            out_t[a, i, A, 2] += t[i][2] * w


def identity_sums(double[:, ::1] Y, double[:, ::1] X, double[:, ::1] NRM,
                  double[::1] JW, double[:, ::1] out_sl, double[:, :, ::1] out_dl):
    cdef Py_ssize_t m = Y.shape[0], nq = X.shape[0]
    cdef Py_ssize_t a, q, i, j
    cdef double rx, ry, rz, rn, inv, bx, by, bz, bn, w, s
    cdef double b[3]
    with nogil:
        for a in range(m):
            for q in range(nq):
                rx = X[q, 0] - Y[a, 0]
                ry = X[q, 1] - Y[a, 1]
                rz = X[q, 2] - Y[a, 2]
                rn = sqrt(rx * rx + ry * ry + rz * rz)
                inv = 1.0 / rn
                b[0] = rx * inv
                b[1] = ry * inv
                b[2] = rz * inv
                bn = b[0] * NRM[q, 0] + b[1] * NRM[q, 1] + b[2] * NRM[q, 2]
                w = JW[q]
                for i in range(3):
                    out_sl[a, i] += (NRM[q, i] + b[i] * bn) * inv * w
                s = -6.0 * bn * inv * inv * w
                for i in range(3):
                    for j in range(3):
                        out_dl[a, i, j] += s * b[i] * b[j]
