# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation of the discrete spread functional and its gradient.

Same contract as ``_kernels_py.mv_terms``.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def mv_terms(phi_in, fwd_in, bwd_in, zcoef_in, xcoef_in, bint want_grad=True):
    cdef double complex[:, :, ::1] phi = np.ascontiguousarray(phi_in, dtype=np.complex128)
    cdef Py_ssize_t[:, ::1] fwd = np.ascontiguousarray(fwd_in, dtype=np.intp)
    cdef Py_ssize_t[:, ::1] bwd = np.ascontiguousarray(bwd_in, dtype=np.intp)
    cdef double[:, ::1] zc = np.ascontiguousarray(zcoef_in, dtype=np.float64)
    cdef double[:, ::1] xc = np.ascontiguousarray(xcoef_in, dtype=np.float64)
    cdef Py_ssize_t nk = phi.shape[0], npw = phi.shape[1], m = phi.shape[2]
    cdef Py_ssize_t d = fwd.shape[0], dc = zc.shape[0]
    cdef Py_ssize_t nflat = nk * npw, p, q, qb, i, c, a
    cdef Py_ssize_t k, g
    cdef double complex v, s, sbk, zv, xv
    cdef double complex[:, :] flat = np.asarray(phi).reshape(nflat, m)

    quad_arr = np.zeros((dc, m))
    cen_arr = np.zeros((dc, m))
    cdef double[:, ::1] quad = quad_arr
    cdef double[:, ::1] cen = cen_arr
    z_arr = np.zeros((dc, nflat + 1, m), dtype=np.complex128)
    x_arr = np.zeros((dc, nflat, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] z = z_arr
    cdef double complex[:, :, ::1] x = x_arr

    for p in range(nflat):
        for a in range(m):
            v = flat[p, a]
            for c in range(dc):
                zv = 0
                xv = 0
                for i in range(d):
                    q = fwd[i, p]
                    qb = bwd[i, p]
                    s = flat[q, a] if q < nflat else 0
                    sbk = flat[qb, a] if qb < nflat else 0
                    zv = zv + zc[c, i] * (s - v)
                    xv = xv + xc[c, i] * (s - sbk)
                z[c, p, a] = zv
                x[c, p, a] = xv
                quad[c, a] += zv.real * zv.real + zv.imag * zv.imag
                cen[c, a] -= (v.real * xv.imag - v.imag * xv.real)
    for c in range(dc):
        for a in range(m):
            quad[c, a] /= nk
            cen[c, a] /= nk
    if not want_grad:
        return quad_arr, cen_arr, None

    res_arr = np.zeros((nk, npw, m), dtype=np.complex128)
    cdef double complex[:, :] res = res_arr.reshape(nflat, m)
    cdef double complex acc
    for p in range(nflat):
        for a in range(m):
            acc = 0
            for c in range(dc):
                zv = z[c, p, a]
                for i in range(d):
                    qb = bwd[i, p]
                    acc = acc + zc[c, i] * (z[c, qb, a] - zv)
                acc = acc - 2j * cen[c, a] * x[c, p, a]
            res[p, a] = acc
    return quad_arr, cen_arr, res_arr
