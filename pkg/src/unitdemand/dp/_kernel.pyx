# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled transition kernel (int64).

Mirror of _kernel_py.expand_states for the case M*D < 2^61.  All quantities
are nonnegative, so cdivision floor == Python floor.
"""
import numpy as np

cimport numpy as cnp


def expand_states(cnp.int64_t[:, ::1] states,
                  cnp.int64_t[:, ::1] coef,
                  cnp.int64_t[::1] units,
                  long long denom,
                  cnp.int64_t[::1] order,
                  cnp.int64_t[::1] group_start,
                  int second_weak,
                  int k2,
                  cnp.int64_t[:, ::1] out):
    cdef Py_ssize_t ns = states.shape[0]
    cdef Py_ssize_t K = states.shape[1]
    cdef Py_ssize_t G = group_start.shape[0] - 1
    cdef Py_ssize_t s, g, pos, cell, j, ro
    cdef long long acc, gsum, n, q, r, remsum, leftover, cnt, sval

    scratch = np.zeros((3, K), dtype=np.int64)
    cdef cnp.int64_t[::1] s_lt = scratch[0]
    cdef cnp.int64_t[::1] s_le = scratch[1]
    cdef cnp.int64_t[::1] rem = scratch[2]

    for s in range(ns):
        acc = 0
        for g in range(G):
            gsum = 0
            for pos in range(group_start[g], group_start[g + 1]):
                cell = order[pos]
                s_lt[cell] = acc
                gsum += states[s, cell]
            acc += gsum
            for pos in range(group_start[g], group_start[g + 1]):
                s_le[order[pos]] = acc
        for j in range(k2):
            ro = s * k2 + j
            remsum = 0
            for cell in range(K):
                n = states[s, cell] * coef[j, cell]
                if cell % k2 == j:
                    sval = s_le[cell] if second_weak else s_lt[cell]
                    n += sval * units[cell // k2]
                q = n / denom
                r = n - q * denom
                out[ro, cell] = q
                rem[cell] = r
                remsum += r
            leftover = remsum / denom
            if leftover * denom != remsum:
                raise AssertionError("remainders must sum to a multiple of denom")
            cnt = 0
            for cell in range(K):
                if cnt == leftover:
                    break
                if rem[cell] > 0:
                    out[ro, cell] += 1
                    cnt += 1
