# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled matrix kernels.

Cython twin of ``_kernels_py``: same loops, same accumulation order, so both
backends produce bit-identical IEEE-754 results.  Keep the two files in sync.
"""

from cpython cimport array

import array

cdef array.array _D = array.array("d")


def matmul(double[::1] a, Py_ssize_t ar, Py_ssize_t ac, double[::1] b, Py_ssize_t bc):
    cdef array.array out = array.clone(_D, ar * bc, zero=False)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, k, ia, io
    cdef double s
    for i in range(ar):
        ia = i * ac
        io = i * bc
        for j in range(bc):
            s = 0.0
            for k in range(ac):
                s += a[ia + k] * b[k * bc + j]
            o[io + j] = s
    return out


def hadamard(double[::1] a, double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef array.array out = array.clone(_D, n, zero=False)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = a[i] * b[i]
    return out


def divide_guarded(double[::1] num, double[::1] den, double eps):
    cdef Py_ssize_t i, n = num.shape[0]
    cdef array.array out = array.clone(_D, n, zero=False)
    cdef double[::1] o = out
    cdef double d
    for i in range(n):
        d = den[i]
        if not (d > eps):
            d = eps
        o[i] = num[i] / d
    return out


def frobenius_sq(double[::1] a):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += a[i] * a[i]
    return s


def transpose(double[::1] a, Py_ssize_t r, Py_ssize_t c):
    cdef array.array out = array.clone(_D, r * c, zero=False)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, ia
    for i in range(r):
        ia = i * c
        for j in range(c):
            o[j * r + i] = a[ia + j]
    return out


def add(double[::1] a, double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef array.array out = array.clone(_D, n, zero=False)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = a[i] + b[i]
    return out


def sub(double[::1] a, double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef array.array out = array.clone(_D, n, zero=False)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = a[i] - b[i]
    return out


def scale(double[::1] a, double s):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef array.array out = array.clone(_D, n, zero=False)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = a[i] * s
    return out


def column_argmax(double[::1] a, Py_ssize_t r, Py_ssize_t c):
    cdef list out = []
    cdef Py_ssize_t i, j, best_i
    cdef double v, best
    for j in range(c):
        best_i = 0
        best = a[j]
        for i in range(1, r):
            v = a[i * c + j]
            if v > best:
                best = v
                best_i = i
        out.append(best_i)
    return out
