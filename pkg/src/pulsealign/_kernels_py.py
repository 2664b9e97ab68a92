"""Pure-Python/numpy fallback for the compiled kernels.

Same signatures and integer/float semantics as ``_kernels.pyx``. The
allocation uses a vectorized suffix-minimum identical to the sequential
closed form; the cursor and the IIR cascade are honest Python loops (the
recurrences cannot be vectorized).
"""

import numpy as np


def _floor_k_vec(t, anchor, T):
    """Largest k with anchor + k*T <= t, exact under floating point."""
    k = np.floor((t - anchor) / T).astype(np.int64)
    while True:
        hi = anchor + k * T > t
        if hi.any():
            k[hi] -= 1
            continue
        lo = anchor + (k + 1) * T <= t
        if lo.any():
            k[lo] += 1
            continue
        return k


def allocate_grid(t, anchor, T):
    t = np.ascontiguousarray(t, dtype=np.float64)
    n = len(t)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    f = _floor_k_vec(t, anchor, T)
    # k[i] = min(f[i], k[i+1]-1)  <=>  k[i] = i + min_{j>=i}(f[j] - j)
    g = f - np.arange(n, dtype=np.int64)
    suffix_min = np.minimum.accumulate(g[::-1])[::-1]
    return np.arange(n, dtype=np.int64) + suffix_min


def cursor_join(frame_ts, sensor_ts):
    frame_ts = np.asarray(frame_ts, dtype=np.float64)
    sensor = np.asarray(sensor_ts, dtype=np.float64)
    m = len(sensor)
    sensor_list = sensor.tolist()  # local list indexing is ~3x faster here
    idx = np.empty(len(frame_ts), dtype=np.int64)
    j = 0
    visits = 0
    skipped = 0
    first = sensor_list[0] if m else None
    for i, ft in enumerate(frame_ts.tolist()):
        if m == 0 or first > ft:
            visits += 1
            idx[i] = -1
            skipped += 1
            continue
        while j + 1 < m and sensor_list[j + 1] <= ft:
            j += 1
            visits += 1
        visits += 1
        idx[i] = j
    return idx, skipped, visits


def sos_filter(sos, x, zi):
    sos = np.asarray(sos, dtype=np.float64)
    y = np.array(x, dtype=np.float64, copy=True)
    for s in range(sos.shape[0]):
        b0, b1, b2, a1, a2 = sos[s]
        z1, z2 = zi[s]
        out = y.tolist()
        for i, xi in enumerate(out):
            yi = b0 * xi + z1
            z1 = b1 * xi - a1 * yi + z2
            z2 = b2 * xi - a2 * yi
            out[i] = yi
        y = np.asarray(out)
    return y


def kalman_track(z, t0, period0, q_t, q_T, r, p00_0, p11_0):
    z = np.asarray(z, dtype=np.float64)
    n = len(z)
    out = np.empty(n, dtype=np.float64)
    t, T = t0, period0
    p00, p01, p11 = p00_0, 0.0, p11_0
    out[0] = t
    zl = z.tolist()
    for i in range(1, n):
        t = t + T
        p00 = p00 + 2.0 * p01 + p11 + q_t
        p01 = p01 + p11
        p11 = p11 + q_T
        s = p00 + r
        k0 = p00 / s
        k1 = p01 / s
        y = zl[i] - t
        t += k0 * y
        T += k1 * y
        p11 -= k1 * p01
        p01 -= k1 * p00
        p00 -= k0 * p00
        out[i] = t
    return out
