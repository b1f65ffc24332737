# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: per-activity similarity columns and Pegasos training.

Arithmetic matches ``_pykernels`` operation for operation so both backends
return bit-identical results.
"""

import numpy as np
from libc.stdint cimport int64_t, int8_t

from crossplat._pykernels import _add_ratio

cdef int64_t EXACT = (<int64_t>1) << 53
cdef int64_t LIMIT = (<int64_t>1) << 62


cdef inline int64_t _gcd(int64_t a, int64_t b) nogil:
    cdef int64_t t
    while b:
        t = a % b
        a = b
        b = t
    return a


def activity_columns(const int64_t[::1] qu, const int64_t[::1] qk,
                     const int64_t[::1] tag_ptr, const int64_t[::1] tag_idx, int64_t n_tags,
                     const int64_t[::1] ui_ptr, const int64_t[::1] ui_idx,
                     const int64_t[::1] co_ptr, const int64_t[::1] co_idx, const int64_t[::1] co_cnt):
    cdef Py_ssize_t n = qu.shape[0]
    cdef Py_ssize_t n_items = tag_ptr.shape[0] - 1
    direct_arr = np.zeros(n, dtype=np.float64)
    co_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] direct = direct_arr
    cdef double[::1] co = co_arr
    mark_arr = np.full(max(n_tags, 1), -1, dtype=np.int64)
    stamp_arr = np.full(max(n_items, 1), -1, dtype=np.int64)
    hit_arr = np.zeros(max(n_items, 1), dtype=np.int8)
    cdef int64_t[::1] mark = mark_arr
    cdef int64_t[::1] stamp = stamp_arr
    cdef int8_t[::1] hitc = hit_arr

    cdef Py_ssize_t i, j, jj, jt
    cdef int64_t u, k, v, x, k_prev = -1, epoch = -1
    cdef int64_t hits, size, hv, sv, m, num, den, g, lcm, a_mul, b_mul
    cdef bint u_has_k, v_has_k, big, hit
    cdef object bnum, bden

    for i in range(n):
        u = qu[i]
        k = qk[i]
        if k != k_prev:
            k_prev = k
            epoch += 1
            for jt in range(tag_ptr[k], tag_ptr[k + 1]):
                mark[tag_idx[jt]] = epoch
        if u < 0:
            continue

        # direct score for u
        hits = 0
        size = 0
        u_has_k = False
        for j in range(ui_ptr[u], ui_ptr[u + 1]):
            x = ui_idx[j]
            if x == k:
                u_has_k = True
                continue
            size += 1
            if stamp[x] != epoch:
                stamp[x] = epoch
                hit = False
                for jt in range(tag_ptr[x], tag_ptr[x + 1]):
                    if mark[tag_idx[jt]] == epoch:
                        hit = True
                        break
                hitc[x] = hit
            if hitc[x]:
                hits += 1
        if size:
            direct[i] = <double>hits / <double>size

        # co score: exact mean of hv/sv over surviving co-participants
        num = 0
        den = 1
        m = 0
        big = False
        for jj in range(co_ptr[u], co_ptr[u + 1]):
            v = co_idx[jj]
            hv = 0
            sv = 0
            v_has_k = False
            for j in range(ui_ptr[v], ui_ptr[v + 1]):
                x = ui_idx[j]
                if x == k:
                    v_has_k = True
                    continue
                sv += 1
                if stamp[x] != epoch:
                    stamp[x] = epoch
                    hit = False
                    for jt in range(tag_ptr[x], tag_ptr[x + 1]):
                        if mark[tag_idx[jt]] == epoch:
                            hit = True
                            break
                    hitc[x] = hit
                if hitc[x]:
                    hv += 1
            if co_cnt[jj] - (1 if (u_has_k and v_has_k) else 0) <= 0:
                continue
            m += 1
            if hv == 0:
                continue
            if big:
                bnum, bden = _add_ratio(bnum, bden, hv, sv)
                continue
            g = _gcd(den, sv)
            a_mul = sv // g  # lcm / den
            if den > LIMIT // a_mul:
                big = True
                bnum, bden = _add_ratio(num, den, hv, sv)
                continue
            lcm = den * a_mul
            b_mul = lcm // sv
            if num > (LIMIT // a_mul) or hv > (LIMIT // b_mul) or num * a_mul > LIMIT - hv * b_mul:
                big = True
                bnum, bden = _add_ratio(num, den, hv, sv)
                continue
            num = num * a_mul + hv * b_mul
            den = lcm
            g = _gcd(num, den)
            num //= g
            den //= g
        if m:
            if big:
                co[i] = bnum / (bden * m)
            elif num < EXACT and den <= (EXACT - 1) // m:
                co[i] = <double>num / <double>(den * m)
            else:
                co[i] = int(num) / (int(den) * m)
    return direct_arr, co_arr


def pegasos(const double[:, ::1] X, const double[::1] y, const int64_t[::1] order,
            double lam, double avg_c, double t0):
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t T = order.shape[0]
    w_arr = np.zeros(d, dtype=np.float64)
    wa_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] wa = wa_arr
    cdef double b = 0.0, ba = 0.0, eta, m, scale, ey, a, yi, tt
    cdef int64_t t = 0, i
    cdef Py_ssize_t s, j
    with nogil:
        for s in range(T):
            i = order[s]
            t += 1
            yi = y[i]
            tt = t + t0
            eta = 1.0 / (lam * tt)
            m = 0.0
            for j in range(d):
                m += X[i, j] * w[j]
            m = yi * (m + b)
            scale = 1.0 - 1.0 / tt
            for j in range(d):
                w[j] = w[j] * scale
            if m < 1.0:
                ey = eta * yi
                for j in range(d):
                    w[j] = w[j] + ey * X[i, j]
                b = b + ey
            a = (avg_c + 1.0) / (t + avg_c)
            for j in range(d):
                wa[j] = (1.0 - a) * wa[j] + a * w[j]
            ba = (1.0 - a) * ba + a * b
    return wa_arr, ba
