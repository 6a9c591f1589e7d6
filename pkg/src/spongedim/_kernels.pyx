# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: hash-RNG tree expansion and simplex-lattice argmax."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY
from libc.stdint cimport uint64_t, int64_t, int32_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MUL1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MUL2 = 0x94D049BB133111EBULL
cdef double TO_UNIT = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * MUL1
    z = (z ^ (z >> 27)) * MUL2
    return z ^ (z >> 31)


def expand(const uint64_t[::1] keys, const double[::1] q, int mode, const double[::1] p,
           const double[::1] cum, const cnp.uint8_t[:, ::1] masks, const double[::1] w,
           const uint64_t[::1] child_salts, const uint64_t[::1] unif_salts, long limit):
    cdef Py_ssize_t n = keys.shape[0], d = p.shape[0], r_atoms = cum.shape[0]
    cdef Py_ssize_t i, c, r, m = 0, total = 0
    cdef double u
    cdef uint64_t key
    cdef cnp.uint8_t[:, ::1] alive = np.zeros((n, d), dtype=np.uint8)
    with nogil:
        for i in range(n):
            key = keys[i]
            if mode == 0:
                for c in range(d):
                    u = <double>(mix64(key ^ unif_salts[c]) >> 11) * TO_UNIT
                    if u < p[c]:
                        alive[i, c] = 1
                        total += 1
            else:
                u = <double>(mix64(key ^ unif_salts[d]) >> 11) * TO_UNIT
                r = 0
                while r < r_atoms - 1 and not (u < cum[r]):
                    r += 1
                for c in range(d):
                    if masks[r, c]:
                        alive[i, c] = 1
                        total += 1
    if total > limit:
        return None
    out_keys = np.empty(total, dtype=np.uint64)
    out_q = np.empty(total, dtype=np.float64)
    out_parent = np.empty(total, dtype=np.int64)
    out_cell = np.empty(total, dtype=np.int32)
    cdef uint64_t[::1] ok = out_keys
    cdef double[::1] oq = out_q
    cdef int64_t[::1] op = out_parent
    cdef int32_t[::1] oc = out_cell
    with nogil:
        for i in range(n):
            for c in range(d):
                if alive[i, c]:
                    ok[m] = mix64(keys[i] ^ child_salts[c])
                    oq[m] = q[i] * w[c]
                    op[m] = i
                    oc[m] = <int32_t>c
                    m += 1
    return out_keys, out_q, out_parent, out_cell


cdef double objective(double[::1] nu, const double[::1] alpha, const double[::1] phi,
                      const double[:, ::1] beta, const int64_t[:, ::1] proj,
                      const int64_t[::1] sizes, double[::1] buf,
                      double[::1] hl) noexcept nogil:
    cdef Py_ssize_t d = nu.shape[0], n_rows = alpha.shape[0], n_lvl = sizes.shape[0]
    cdef Py_ssize_t j, l, r, b
    cdef double h = 0.0, lin = 0.0, x, val, best
    for j in range(d):
        x = nu[j]
        if x > 0:
            h -= x * log(x)
        lin += x * phi[j]
    for l in range(n_lvl):
        for b in range(sizes[l]):
            buf[b] = 0.0
        for j in range(d):
            buf[proj[l, j]] += nu[j]
        x = 0.0
        for b in range(sizes[l]):
            if buf[b] > 0:
                x -= buf[b] * log(buf[b])
        hl[l] = x
    best = INFINITY
    for r in range(n_rows):
        val = alpha[r] * (h + lin)
        for l in range(n_lvl):
            val += beta[r, l] * hl[l]
        if val < best:
            best = val
    return best


def lattice_argmax(double step, const double[::1] base, const int64_t[::1] lo,
                   const int64_t[::1] hi, long total, const double[::1] alpha,
                   const double[::1] phi, const double[:, ::1] beta,
                   const int64_t[:, ::1] proj, const int64_t[::1] sizes, first=None):
    """Same contract as the numpy fallback: ``(value, delta, n_points)``."""
    cdef Py_ssize_t d = base.shape[0], j
    cdef long maxsize = 1
    for j in range(sizes.shape[0]):
        if sizes[j] > maxsize:
            maxsize = sizes[j]
    cdef int64_t[::1] delta = np.zeros(d, dtype=np.int64)
    cdef int64_t[::1] best_delta = np.zeros(d, dtype=np.int64)
    cdef int64_t[::1] rest_min = np.zeros(d + 1, dtype=np.int64)
    cdef int64_t[::1] rest_max = np.zeros(d + 1, dtype=np.int64)
    cdef int64_t[::1] upper = np.zeros(d, dtype=np.int64)
    cdef int64_t[::1] partial = np.zeros(d + 1, dtype=np.int64)
    cdef double[::1] nu = np.zeros(d, dtype=np.float64)
    cdef double[::1] buf = np.zeros(maxsize, dtype=np.float64)
    cdef double[::1] hl = np.zeros(max(1, sizes.shape[0]), dtype=np.float64)
    cdef long first_lo = lo[0], first_hi = hi[0]
    if first is not None:
        first_lo = max(first_lo, <long>first[0])
        first_hi = min(first_hi, <long>first[1] - 1)
    for j in range(d - 1, -1, -1):
        rest_min[j] = rest_min[j + 1] + lo[j]
        rest_max[j] = rest_max[j + 1] + hi[j]
    cdef double best = -INFINITY, val, x
    cdef long count = 0
    cdef Py_ssize_t pos
    cdef int64_t a, b, remaining
    cdef bint found = False, valid
    with nogil:
        # odometer over coordinates 0..d-1 with feasibility pruning
        pos = 0
        partial[0] = 0
        a = lo[0]
        if total - rest_max[1] > a:
            a = total - rest_max[1]
        if first_lo > a:
            a = first_lo
        b = hi[0]
        if total - rest_min[1] < b:
            b = total - rest_min[1]
        if first_hi < b:
            b = first_hi
        if a <= b:
            delta[0] = a
            upper[0] = b
            while True:
                if pos == d - 1:
                    valid = True
                    for j in range(d):
                        x = base[j] + step * delta[j]
                        if x < -1e-12:
                            valid = False
                            break
                        nu[j] = x if x > 0 else 0.0
                    if valid:
                        count += 1
                        val = objective(nu, alpha, phi, beta, proj, sizes, buf, hl)
                        if val > best or not found:
                            best = val
                            found = True
                            for j in range(d):
                                best_delta[j] = delta[j]
                    # advance
                    while pos >= 0 and delta[pos] >= upper[pos]:
                        pos -= 1
                    if pos < 0:
                        break
                    delta[pos] += 1
                else:
                    partial[pos + 1] = partial[pos] + delta[pos]
                    pos += 1
                    remaining = total - partial[pos]
                    a = lo[pos]
                    if remaining - rest_max[pos + 1] > a:
                        a = remaining - rest_max[pos + 1]
                    b = hi[pos]
                    if remaining - rest_min[pos + 1] < b:
                        b = remaining - rest_min[pos + 1]
                    if a > b:
                        pos -= 1
                        while pos >= 0 and delta[pos] >= upper[pos]:
                            pos -= 1
                        if pos < 0:
                            break
                        delta[pos] += 1
                        continue
                    delta[pos] = a
                    upper[pos] = b
    if not found:
        return -np.inf, None, 0
    return float(best), np.asarray(best_delta).copy(), int(count)
