# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: grid allocation, cursor join, biquad cascade, Kalman.

Signatures mirror ``_kernels_py`` exactly; ``_backend`` picks whichever
import succeeds. Everything operates on contiguous float64/int64 arrays.
"""

import numpy as np

from libc.math cimport floor


cdef inline long long _floor_k(double t, double anchor, double T) noexcept:
    # Largest k with anchor + k*T <= t, with a post-check so the inequality
    # holds exactly under floating point.
    cdef long long k = <long long>floor((t - anchor) / T)
    while anchor + k * T > t:
        k -= 1
    while anchor + (k + 1) * T <= t:
        k += 1
    return k


def allocate_grid(double[::1] t, double anchor, double T):
    """End-to-start allocation: k[i] = min(floor_k(t[i]), k[i+1] - 1)."""
    cdef Py_ssize_t n = t.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    if n == 0:
        return out_arr
    cdef Py_ssize_t i
    cdef long long k, cap
    out[n - 1] = _floor_k(t[n - 1], anchor, T)
    for i in range(n - 2, -1, -1):
        k = _floor_k(t[i], anchor, T)
        cap = out[i + 1] - 1
        out[i] = k if k < cap else cap
    return out_arr


def cursor_join(double[::1] frame_ts, double[::1] sensor_ts):
    """Nearest-preceding join with a monotone cursor.

    Returns (idx, skipped_head, visits): idx[i] is the largest j with
    sensor_ts[j] <= frame_ts[i], or -1 for frames before the first sensor
    sample; visits counts sensor elements inspected (<= frames + samples).
    """
    cdef Py_ssize_t n = frame_ts.shape[0]
    cdef Py_ssize_t m = sensor_ts.shape[0]
    idx_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] idx = idx_arr
    cdef Py_ssize_t i, j = 0
    cdef long long visits = 0, skipped = 0
    cdef double ft
    for i in range(n):
        ft = frame_ts[i]
        if m == 0 or sensor_ts[0] > ft:
            visits += 1
            idx[i] = -1
            skipped += 1
            continue
        while j + 1 < m and sensor_ts[j + 1] <= ft:
            j += 1
            visits += 1
        visits += 1  # the failed (or out-of-range) lookahead
        idx[i] = j
    return idx_arr, skipped, visits


def sos_filter(double[:, ::1] sos, double[::1] x, double[:, ::1] zi):
    """Cascade of transposed direct-form-II biquads.

    sos rows are (b0, b1, b2, a1, a2) with a0 normalized to 1; zi holds the
    two initial state entries per section and is consumed, not updated.
    """
    cdef Py_ssize_t nsec = sos.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    y_arr = np.array(x, dtype=np.float64, copy=True)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t s, i
    cdef double b0, b1, b2, a1, a2, z1, z2, xi, yi
    for s in range(nsec):
        b0 = sos[s, 0]; b1 = sos[s, 1]; b2 = sos[s, 2]
        a1 = sos[s, 3]; a2 = sos[s, 4]
        z1 = zi[s, 0]; z2 = zi[s, 1]
        for i in range(n):
            xi = y[i]
            yi = b0 * xi + z1
            z1 = b1 * xi - a1 * yi + z2
            z2 = b2 * xi - a2 * yi
            y[i] = yi
    return y_arr


def kalman_track(double[::1] z, double t0, double period0,
                 double q_t, double q_T, double r,
                 double p00_0, double p11_0):
    """2-state (event time, period) Kalman recursion over measurements z."""
    cdef Py_ssize_t n = z.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double t = t0, T = period0
    cdef double p00 = p00_0, p01 = 0.0, p11 = p11_0
    cdef double s, k0, k1, y
    cdef Py_ssize_t i
    out[0] = t
    for i in range(1, n):
        # predict: t <- t + T, P <- F P F' + Q
        t = t + T
        p00 = p00 + 2.0 * p01 + p11 + q_t
        p01 = p01 + p11
        p11 = p11 + q_T
        # update with z[i]
        s = p00 + r
        k0 = p00 / s
        k1 = p01 / s
        y = z[i] - t
        t += k0 * y
        T += k1 * y
        p11 -= k1 * p01
        p01 -= k1 * p00
        p00 -= k0 * p00
        out[i] = t
    return out_arr
