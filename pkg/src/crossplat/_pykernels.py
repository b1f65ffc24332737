"""Pure-Python kernels; same arithmetic, in the same order, as ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def activity_columns(qu, qk, tag_ptr, tag_idx, n_tags, ui_ptr, ui_idx, co_ptr, co_idx, co_cnt):
    """Direct and co similarity for one activity type over a batch of queries.

    ``qu[i]`` is a user row (or -1 for a user without history), ``qk[i]`` an item
    row. Queries should be grouped by item; the tag-match cache is rebuilt only
    when the item changes.
    """
    qu = qu.tolist()
    qk = qk.tolist()
    tag_ptr = tag_ptr.tolist()
    tag_idx = tag_idx.tolist()
    ui_ptr = ui_ptr.tolist()
    ui_idx = ui_idx.tolist()
    co_ptr = co_ptr.tolist()
    co_idx = co_idx.tolist()
    co_cnt = co_cnt.tolist()
    n = len(qu)
    direct = [0.0] * n
    co = [0.0] * n

    k_prev = -1
    k_tags: set[int] = set()
    cache: dict[int, bool] = {}

    def match(x):
        hit = cache.get(x)
        if hit is None:
            hit = False
            for j in range(tag_ptr[x], tag_ptr[x + 1]):
                if tag_idx[j] in k_tags:
                    hit = True
                    break
            cache[x] = hit
        return hit

    def scan(user, k):
        hits = size = 0
        has_k = False
        for j in range(ui_ptr[user], ui_ptr[user + 1]):
            x = ui_idx[j]
            if x == k:
                has_k = True
                continue
            size += 1
            if match(x):
                hits += 1
        return hits, size, has_k

    for i in range(n):
        u, k = qu[i], qk[i]
        if k != k_prev:
            k_prev = k
            k_tags = set(tag_idx[tag_ptr[k]:tag_ptr[k + 1]])
            cache = {}
        if u < 0:
            continue
        hits, size, u_has_k = scan(u, k)
        if size:
            direct[i] = hits / size
        num, den, m = 0, 1, 0
        for j in range(co_ptr[u], co_ptr[u + 1]):
            v = co_idx[j]
            hv, sv, v_has_k = scan(v, k)
            if co_cnt[j] - (1 if (u_has_k and v_has_k) else 0) <= 0:
                continue
            m += 1
            if hv:
                num, den = _add_ratio(num, den, hv, sv)
        if m:
            co[i] = num / (den * m)
    return np.asarray(direct, dtype=np.float64), np.asarray(co, dtype=np.float64)


def _add_ratio(num, den, p, q):
    g = _gcd(den, q)
    lcm = den // g * q
    num = num * (lcm // den) + p * (lcm // q)
    den = lcm
    g = _gcd(num, den)
    return num // g, den // g


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def pegasos(X, y, order, lam, avg_c, t0):
    """Pegasos subgradient steps over ``order`` with polynomial-decay averaging.

    Step ``t`` uses ``eta = 1 / (lam * (t + t0))``; the bias is updated but never
    shrunk. Returns the averaged weights and bias.
    """
    rows = X.tolist()
    labels = y.tolist()
    d = X.shape[1]
    w = [0.0] * d
    wa = [0.0] * d
    b = 0.0
    ba = 0.0
    t = 0
    for i in order.tolist():
        t += 1
        xi = rows[i]
        yi = labels[i]
        tt = t + t0
        eta = 1.0 / (lam * tt)
        m = 0.0
        for j in range(d):
            m += xi[j] * w[j]
        m = yi * (m + b)
        scale = 1.0 - 1.0 / tt
        for j in range(d):
            w[j] = w[j] * scale
        if m < 1.0:
            ey = eta * yi
            for j in range(d):
                w[j] = w[j] + ey * xi[j]
            b = b + ey
        a = (avg_c + 1.0) / (t + avg_c)
        for j in range(d):
            wa[j] = (1.0 - a) * wa[j] + a * w[j]
        ba = (1.0 - a) * ba + a * b
    return np.asarray(wa, dtype=np.float64), ba
