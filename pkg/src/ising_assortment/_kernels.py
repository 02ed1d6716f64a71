"""Compiled inner loops (numba).

Everything here works on a dense sub-matrix ``theta`` already restricted to an
assortment, so indices are positions within the assortment.
"""

import numpy as np
from numba import njit

# Energy and local fields are recomputed from scratch at this period to stop
# rounding drift from accumulating over very long Gray-code walks.
_RESYNC = 1 << 16


@njit(cache=True)
def _energy_and_fields(theta, x):
    s = x.shape[0]
    h = np.empty(s)
    e = 0.0
    for k in range(s):
        acc = 0.0
        for j in range(s):
            if j != k:
                acc += theta[k, j] * x[j]
        h[k] = theta[k, k] + 2.0 * acc
        e += theta[k, k] * x[k] + acc * x[k]
    return e, h


@njit(cache=True)
def enumerate_baskets(theta, lo, hi, r, want_marginals, pair_a, pair_b):
    """Walk all baskets in Gray-code order.

    Returns ``(log_z, profit, marginals, pair_cells)`` where ``profit`` is the
    expectation of ``sum(r[k] * [x_k == hi])``, ``marginals[k] = P(x_k == hi)``
    and ``pair_cells[2*a + b]`` holds ``P(x_pair_a == a_val, x_pair_b == b_val)``
    with ``a``/``b`` equal to 1 when the coordinate is ``hi``. The last two are
    only filled when requested (``pair_a < 0`` disables the pair).
    """
    s = theta.shape[0]
    marg = np.zeros(s)
    cells = np.zeros(4)
    x = np.full(s, lo, dtype=np.float64)
    if s == 0:
        cells[0] = 1.0
        return 0.0, 0.0, marg, cells
    e, h = _energy_and_fields(theta, x)
    on = np.zeros(s, dtype=np.bool_)
    prof = 0.0
    m = e
    z = 1.0
    p_acc = 0.0
    if pair_a >= 0:
        cells[0] = 1.0
    d = hi - lo
    total = 1 << s
    for t in range(1, total):
        k = 0
        v = t
        while (v & 1) == 0:
            v >>= 1
            k += 1
        if on[k]:
            step = -d
            prof -= r[k]
        else:
            step = d
            prof += r[k]
        on[k] = not on[k]
        x[k] += step
        if (t & (_RESYNC - 1)) == 0:
            e, h = _energy_and_fields(theta, x)
        else:
            e += step * h[k]
            for i in range(s):
                if i != k:
                    h[i] += 2.0 * theta[i, k] * step
        if e > m:
            scale = np.exp(m - e)
            z *= scale
            p_acc *= scale
            if want_marginals:
                for i in range(s):
                    marg[i] *= scale
            if pair_a >= 0:
                for c in range(4):
                    cells[c] *= scale
            m = e
        w = np.exp(e - m)
        z += w
        p_acc += w * prof
        if want_marginals:
            for i in range(s):
                if on[i]:
                    marg[i] += w
        if pair_a >= 0:
            c = 0
            if on[pair_a]:
                c += 2
            if on[pair_b]:
                c += 1
            cells[c] += w
    return m + np.log(z), p_acc / z, marg / z, cells / z


@njit(cache=True)
def profit_all_subsets(theta, r):
    """Exact expected profit of every assortment, indexed by bitmask."""
    n = theta.shape[0]
    out = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        size = 0
        for i in range(n):
            if (mask >> i) & 1:
                size += 1
        idx = np.empty(size, dtype=np.int64)
        c = 0
        for i in range(n):
            if (mask >> i) & 1:
                idx[c] = i
                c += 1
        sub = np.empty((size, size))
        rs = np.empty(size)
        for a in range(size):
            rs[a] = r[idx[a]]
            for b in range(size):
                sub[a, b] = theta[idx[a], idx[b]]
        _, prof, _, _ = enumerate_baskets(sub, 0.0, 1.0, rs, False, -1, -1)
        out[mask] = prof
    return out


@njit(cache=True, nogil=True)
def _binary_fields(theta, x):
    s = x.shape[0]
    h = np.empty(s)
    for k in range(s):
        acc = 0.0
        for j in range(s):
            if j != k and x[j] != 0:
                acc += theta[k, j]
        h[k] = theta[k, k] + 2.0 * acc
    return h


@njit(cache=True, nogil=True)
def _update(theta, x, h, k, u):
    # Conditional P(x_k = 1 | rest) = sigmoid(h_k); accept 1 when u <= p.
    p = 1.0 / (1.0 + np.exp(-h[k]))
    new = 1 if u <= p else 0
    if new != x[k]:
        step = 1.0 if new == 1 else -1.0
        for i in range(x.shape[0]):
            if i != k:
                h[i] += 2.0 * theta[i, k] * step
        x[k] = new


@njit(cache=True, nogil=True)
def systematic_run(theta, x, u, out, thin, record):
    """Systematic-scan sweeps driven by the uniforms ``u`` (one row per sweep).

    When ``record`` is set, the state after every ``thin``-th sweep is written
    to consecutive rows of ``out``. ``x`` is updated in place.
    """
    s = x.shape[0]
    h = _binary_fields(theta, x)
    row = 0
    for t in range(u.shape[0]):
        for k in range(s):
            _update(theta, x, h, k, u[t, k])
        if record and (t + 1) % thin == 0:
            for k in range(s):
                out[row, k] = x[k]
            row += 1


@njit(cache=True, nogil=True)
def random_run(theta, x, idx, u, out, steps_per_sample, record):
    """Random-scan single-site updates at coordinates ``idx`` with uniforms ``u``."""
    s = x.shape[0]
    h = _binary_fields(theta, x)
    row = 0
    for t in range(u.shape[0]):
        _update(theta, x, h, idx[t], u[t])
        if record and (t + 1) % steps_per_sample == 0:
            for k in range(s):
                out[row, k] = x[k]
            row += 1
