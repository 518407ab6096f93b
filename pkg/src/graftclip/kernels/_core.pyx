# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors kernels/reference.py expression by expression."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, sqrt, tanh

cnp.import_array()

cdef double GELU_C0 = 0.7978845608028654
cdef double GELU_C1 = 0.044715


def bilinear_resize(object src_obj, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef cnp.ndarray src_arr = np.ascontiguousarray(src_obj, dtype=np.float64)
    cdef double[:, :, ::1] src = src_arr
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]
    out_arr = np.empty((out_h, out_w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    cdef double sy = h / <double> out_h
    cdef double sx = w / <double> out_w
    cdef Py_ssize_t i, j, k, y0, x0, y1, x1
    cdef double y, x, fy, fx, top, bot

    for i in range(out_h):
        y = (i + 0.5) * sy - 0.5
        if y < 0.0:
            y = 0.0
        elif y > h - 1.0:
            y = h - 1.0
        y0 = <Py_ssize_t> floor(y)
        if y0 > h - 2:
            y0 = h - 2
        if y0 < 0:
            y0 = 0
        y1 = y0 + 1
        if y1 > h - 1:
            y1 = h - 1
        fy = y - y0
        for j in range(out_w):
            x = (j + 0.5) * sx - 0.5
            if x < 0.0:
                x = 0.0
            elif x > w - 1.0:
                x = w - 1.0
            x0 = <Py_ssize_t> floor(x)
            if x0 > w - 2:
                x0 = w - 2
            if x0 < 0:
                x0 = 0
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            fx = x - x0
            for k in range(c):
                top = src[y0, x0, k] * (1.0 - fx) + src[y0, x1, k] * fx
                bot = src[y1, x0, k] * (1.0 - fx) + src[y1, x1, k] * fx
                out[i, j, k] = top * (1.0 - fy) + bot * fy
    return out_arr


def gelu(object x_obj):
    cdef cnp.ndarray arr = np.ascontiguousarray(x_obj, dtype=np.float64)
    out_arr = np.empty_like(arr)
    cdef double[::1] xv = arr.ravel()
    cdef double[::1] yv = out_arr.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double x, u
    for i in range(n):
        x = xv[i]
        u = GELU_C0 * (x + GELU_C1 * x * x * x)
        yv[i] = 0.5 * x * (1.0 + tanh(u))
    return out_arr


def gelu_grad(object x_obj):
    cdef cnp.ndarray arr = np.ascontiguousarray(x_obj, dtype=np.float64)
    out_arr = np.empty_like(arr)
    cdef double[::1] xv = arr.ravel()
    cdef double[::1] yv = out_arr.ravel()
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double x, u, t, du
    for i in range(n):
        x = xv[i]
        u = GELU_C0 * (x + GELU_C1 * x * x * x)
        t = tanh(u)
        du = GELU_C0 * (1.0 + 3.0 * GELU_C1 * x * x)
        yv[i] = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
    return out_arr


def adamw_update(
    object param_obj,
    object grad_obj,
    object m_obj,
    object v_obj,
    long long step,
    double lr,
    double weight_decay,
    double beta1,
    double beta2,
    double eps,
):
    cdef cnp.ndarray p_arr = param_obj
    cdef cnp.ndarray g_arr = grad_obj
    cdef cnp.ndarray m_arr = m_obj
    cdef cnp.ndarray v_arr = v_obj
    cdef double[::1] p = p_arr.ravel()
    cdef double[::1] g = g_arr.ravel()
    cdef double[::1] m = m_arr.ravel()
    cdef double[::1] v = v_arr.ravel()
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double bc1 = 1.0 - beta1**step
    cdef double bc2 = 1.0 - beta2**step
    cdef double decay = 1.0 - lr * weight_decay
    cdef double one_m_b1 = 1.0 - beta1
    cdef double one_m_b2 = 1.0 - beta2
    for i in range(n):
        p[i] = p[i] * decay
        m[i] = beta1 * m[i] + one_m_b1 * g[i]
        v[i] = beta2 * v[i] + one_m_b2 * g[i] * g[i]
        p[i] = p[i] - lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)
