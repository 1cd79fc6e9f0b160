"""Compiled UMDA/PBIL trial loop.

Offspring are stored as *deviation lists*: for every position the model has
a most likely bit ``base[i]`` (1 when ``p[i] >= 1/2``), and an individual
is the sorted list of positions where it differs from ``base``. Positions
with a marginal at a border deviate with probability exactly ``1/n``, so
their deviations are drawn by geometric skipping instead of one uniform per
bit. The sampled distribution is identical to independent Bernoulli
sampling; only the cost changes, from O(lambda * n) uniforms per generation
to O(lambda * (interior + 2)).
"""
import numpy as np

from ._accel import njit

ONEMAX, LEADINGONES, BINVAL = 0, 1, 2


@njit
def _leadingones_from_devs(devs, nd, base, zeros, nz, n):
    zi = 0
    for k in range(nd):
        d = devs[k]
        if zi < nz and zeros[zi] < d:
            return zeros[zi]
        if base[d] == 1:
            return d
        # d is a zero of base that was flipped to one
        zi += 1
    if zi < nz:
        return zeros[zi]
    return n


@njit
def _binval_cmp(dev, nd, a, b, base):
    """Sign of BinVal(a) - BinVal(b) for two deviation lists."""
    na = nd[a]
    nb = nd[b]
    k = 0
    while k < na and k < nb and dev[a, k] == dev[b, k]:
        k += 1
    if k == na and k == nb:
        return 0
    if k == nb or (k < na and dev[a, k] < dev[b, k]):
        # first differing position only deviates in a
        return 1 if base[dev[a, k]] == 0 else -1
    return 1 if base[dev[b, k]] == 1 else -1


@njit
def _before(x, y, code, key, dev, nd, base):
    if code == BINVAL:
        return _binval_cmp(dev, nd, x, y, base) > 0
    return key[x] > key[y]


@njit
def _sort_desc(order, buf, code, key, dev, nd, base):
    """Stable bottom-up merge sort of ``order``, fittest first."""
    m = order.shape[0]
    width = 1
    src = order
    dst = buf
    while width < m:
        lo = 0
        while lo < m:
            mid = min(lo + width, m)
            hi = min(lo + 2 * width, m)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if _before(src[j], src[i], code, key, dev, nd, base):
                    dst[k] = src[j]
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
            lo += 2 * width
        src, dst = dst, src
        width *= 2
    if src is not order:
        order[:] = src[:]


@njit
def run_trial(n, lam, mu, rho, max_generations, code, rng):
    """One run from the uniform model; returns ``(success, generations)``."""
    lo = 1.0 / n
    hi = 1.0 - 1.0 / n
    p = np.full(n, 0.5)
    base = np.zeros(n, np.uint8)
    interior = np.empty(n, np.int64)
    border = np.empty(n, np.int64)
    zeros = np.empty(n, np.int64)
    dev = np.empty((lam, n), np.int32)
    nd = np.zeros(lam, np.int64)
    tmp_int = np.empty(n, np.int32)
    tmp_bor = np.empty(n, np.int32)
    ones = np.empty(lam, np.int64)
    key = np.empty(lam, np.int64)
    order = np.empty(lam, np.int64)
    buf = np.empty(lam, np.int64)
    counts = np.empty(n, np.int64)

    for gen in range(max_generations):
        n_int = 0
        n_bor = 0
        n_zero = 0
        base_ones = 0
        for i in range(n):
            if p[i] <= lo:
                base[i] = 0
                border[n_bor] = i
                n_bor += 1
            elif p[i] >= hi:
                base[i] = 1
                border[n_bor] = i
                n_bor += 1
            else:
                base[i] = 1 if p[i] >= 0.5 else 0
                interior[n_int] = i
                n_int += 1
            if base[i] == 1:
                base_ones += 1
            else:
                zeros[n_zero] = i
                n_zero += 1

        found = False
        for k in range(lam):
            ni = 0
            for t in range(n_int):
                i = interior[t]
                bit = 1 if rng.random() < p[i] else 0
                if bit != base[i]:
                    tmp_int[ni] = i
                    ni += 1
            nb = 0
            if n_bor > 0:
                pos = -1
                while True:
                    pos += rng.geometric(lo)
                    if pos >= n_bor:
                        break
                    tmp_bor[nb] = border[pos]
                    nb += 1
            # merge the two sorted deviation lists
            a = 0
            b = 0
            c = 0
            delta = 0
            while a < ni or b < nb:
                if b >= nb or (a < ni and tmp_int[a] < tmp_bor[b]):
                    d = tmp_int[a]
                    a += 1
                else:
                    d = tmp_bor[b]
                    b += 1
                dev[k, c] = d
                c += 1
                delta += 1 - 2 * np.int64(base[d])
            nd[k] = c
            ones[k] = base_ones + delta
            if ones[k] == n:
                found = True
        if found:
            return True, gen + 1

        if code == ONEMAX:
            for k in range(lam):
                key[k] = ones[k]
        elif code == LEADINGONES:
            for k in range(lam):
                key[k] = _leadingones_from_devs(dev[k], nd[k], base, zeros, n_zero, n)

        # uniform tie-breaking: shuffle, then stable sort
        for k in range(lam):
            order[k] = k
        for k in range(lam - 1, 0, -1):
            j = rng.integers(0, k + 1)
            tmp = order[k]
            order[k] = order[j]
            order[j] = tmp
        _sort_desc(order, buf, code, key, dev, nd, base)

        for i in range(n):
            counts[i] = mu * np.int64(base[i])
        for s in range(mu):
            k = order[s]
            for t in range(nd[k]):
                d = dev[k, t]
                counts[d] += 1 - 2 * np.int64(base[d])
        for i in range(n):
            v = (1.0 - rho) * p[i] + rho * (counts[i] / mu)
            if v < lo:
                v = lo
            elif v > hi:
                v = hi
            p[i] = v
    return False, max_generations
