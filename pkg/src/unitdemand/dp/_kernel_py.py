"""Pure-Python transition kernel.

Same algorithm as the compiled extension, but over Python ints so it is safe
for arbitrarily large M*D (exact mode with many items, big lcm denominators).
Kept free of any numpy dependency on purpose: rows are plain lists.
"""
from __future__ import annotations


def expand_states(states, coef, units, denom, order, group_start, second_weak, k2):
    """Expand each state by every price index, one item forward.

    states: sequence of unit vectors (len K ints over M)
    coef: coef[j][cell] = denom * Pr[item gap at price j loses to gap(cell)]
    units: item mass numerators over denom, indexed by value
    order: cells sorted by ascending gap, index breaking ties
    group_start: boundaries of equal-gap runs inside ``order``
    second_weak: displaced-mass sum uses <= when True (later item wins ties)

    Returns rows ordered state-major then price index; each row is the
    canonically rounded successor (floor over denom, leftovers to the first
    cells with a positive remainder in row-major order).
    """
    K = len(order)
    G = len(group_start) - 1
    rows = []
    s_lt = [0] * K
    s_le = [0] * K
    rem = [0] * K
    for u in states:
        acc = 0
        for g in range(G):
            a, b = group_start[g], group_start[g + 1]
            gsum = 0
            for pos in range(a, b):
                cell = order[pos]
                s_lt[cell] = acc
                gsum += u[cell]
            acc += gsum
            for pos in range(a, b):
                s_le[order[pos]] = acc
        for j in range(k2):
            cj = coef[j]
            out = [0] * K
            remsum = 0
            for cell in range(K):
                n = u[cell] * cj[cell]
                if cell % k2 == j:
                    s = s_le[cell] if second_weak else s_lt[cell]
                    n += s * units[cell // k2]
                q, r = divmod(n, denom)
                out[cell] = q
                rem[cell] = r
                remsum += r
            leftover, check = divmod(remsum, denom)
            assert check == 0, "remainders must sum to a multiple of denom"
            for cell in range(K):
                if leftover == 0:
                    break
                if rem[cell] > 0:
                    out[cell] += 1
                    leftover -= 1
            rows.append(out)
    return rows
