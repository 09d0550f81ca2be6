# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled gate kernels. Same contract and bit convention as _gates_np."""

import numpy as np

cimport numpy as cnp

NAME = "cython"


def apply_1q(cnp.complex128_t[::1] amps, mat, int target, int n):
    cdef cnp.complex128_t m00 = mat[0, 0]
    cdef cnp.complex128_t m01 = mat[0, 1]
    cdef cnp.complex128_t m10 = mat[1, 0]
    cdef cnp.complex128_t m11 = mat[1, 1]
    cdef Py_ssize_t size = amps.shape[0]
    cdef Py_ssize_t stride = 1 << (n - 1 - target)
    cdef Py_ssize_t period = stride * 2
    cdef Py_ssize_t base, off, i0, i1
    cdef cnp.complex128_t a0, a1
    for base in range(0, size, period):
        for off in range(stride):
            i0 = base + off
            i1 = i0 + stride
            a0 = amps[i0]
            a1 = amps[i1]
            amps[i0] = m00 * a0 + m01 * a1
            amps[i1] = m10 * a0 + m11 * a1
    return np.asarray(amps)


def apply_cnot(cnp.complex128_t[::1] amps, int control, int target, int n):
    cdef Py_ssize_t size = amps.shape[0]
    cdef Py_ssize_t cbit = 1 << (n - 1 - control)
    cdef Py_ssize_t tbit = 1 << (n - 1 - target)
    cdef Py_ssize_t i, j
    cdef cnp.complex128_t tmp
    for i in range(size):
        if (i & cbit) and not (i & tbit):
            j = i | tbit
            tmp = amps[i]
            amps[i] = amps[j]
            amps[j] = tmp
    return np.asarray(amps)
