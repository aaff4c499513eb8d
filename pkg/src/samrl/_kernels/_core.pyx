# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot training kernels.

Mirrors samrl._kernels.py_backend; see that module for the contracts.
Results agree with the NumPy backend to rounding error (accumulation
order differs, so bit-identity across backends is not promised).
"""

import numpy as np

from libc.math cimport tanh

NAME = "compiled"


cdef void _affine(double[:, ::1] w, double[::1] b, double[::1] x,
                  double[::1] out, bint apply_tanh) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t m = w.shape[0]
    cdef Py_ssize_t n = w.shape[1]
    cdef double acc
    for i in range(m):
        acc = b[i]
        for j in range(n):
            acc += w[i, j] * x[j]
        out[i] = tanh(acc) if apply_tanh else acc


def mlp_forward(list weights, list biases, x):
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t k
    cur = np.ascontiguousarray(x, dtype=np.float64)
    for k in range(n_layers):
        w = weights[k]
        out = np.empty(w.shape[0], dtype=np.float64)
        _affine(w, biases[k], cur, out, k < n_layers - 1)
        cur = out
    return cur


def mlp_forward_cached(list weights, list biases, x):
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t k
    cur = np.ascontiguousarray(x, dtype=np.float64)
    acts = [cur]
    for k in range(n_layers):
        w = weights[k]
        out = np.empty(w.shape[0], dtype=np.float64)
        _affine(w, biases[k], cur, out, k < n_layers - 1)
        acts.append(out)
        cur = out
    return cur, acts


cdef void _layer_backward(double[:, ::1] w, double[::1] d, double[::1] h_in,
                          double[:, ::1] gw, double[::1] gb,
                          double[::1] d_prev) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t m = w.shape[0]
    cdef Py_ssize_t n = w.shape[1]
    cdef double di
    for j in range(n):
        d_prev[j] = 0.0
    for i in range(m):
        di = d[i]
        gb[i] = di
        for j in range(n):
            gw[i, j] = di * h_in[j]
            d_prev[j] += w[i, j] * di
    return


cdef void _tanh_grad_inplace(double[::1] d, double[::1] h) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(d.shape[0]):
        d[i] = d[i] * (1.0 - h[i] * h[i])


def mlp_backward(list weights, list biases, list acts, upstream):
    cdef Py_ssize_t n = len(weights)
    cdef Py_ssize_t k
    gws = [None] * n
    gbs = [None] * n
    d = np.array(upstream, dtype=np.float64)
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            _tanh_grad_inplace(d, acts[k + 1])
        w = weights[k]
        gw = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
        gb = np.empty(w.shape[0], dtype=np.float64)
        d_prev = np.empty(w.shape[1], dtype=np.float64)
        _layer_backward(w, d, acts[k], gw, gb, d_prev)
        gws[k] = gw
        gbs[k] = gb
        d = d_prev
    return gws, gbs, d


def scaled_add(list arrays, list grads, double scale):
    cdef Py_ssize_t i, n
    cdef double[::1] a1
    cdef double[::1] g1
    cdef double[:, ::1] a2
    cdef double[:, ::1] g2
    cdef Py_ssize_t r, c
    for k in range(len(arrays)):
        arr = arrays[k]
        grd = grads[k]
        if arr.ndim == 1:
            a1 = arr
            g1 = grd
            n = a1.shape[0]
            for i in range(n):
                a1[i] += scale * g1[i]
        else:
            a2 = arr
            g2 = grd
            for r in range(a2.shape[0]):
                for c in range(a2.shape[1]):
                    a2[r, c] += scale * g2[r, c]


def scale_inplace(list arrays, double factor):
    cdef double[::1] a1
    cdef double[:, ::1] a2
    cdef Py_ssize_t i, r, c
    for k in range(len(arrays)):
        arr = arrays[k]
        if arr.ndim == 1:
            a1 = arr
            for i in range(a1.shape[0]):
                a1[i] *= factor
        else:
            a2 = arr
            for r in range(a2.shape[0]):
                for c in range(a2.shape[1]):
                    a2[r, c] *= factor


def sq_norm(list arrays):
    cdef double total = 0.0
    cdef double[::1] a1
    cdef double[:, ::1] a2
    cdef Py_ssize_t i, r, c
    for k in range(len(arrays)):
        arr = arrays[k]
        if arr.ndim == 1:
            a1 = arr
            for i in range(a1.shape[0]):
                total += a1[i] * a1[i]
        else:
            a2 = arr
            for r in range(a2.shape[0]):
                for c in range(a2.shape[1]):
                    total += a2[r, c] * a2[r, c]
    return total
