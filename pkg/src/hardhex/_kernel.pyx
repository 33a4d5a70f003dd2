# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Metropolis hitting-time loop.

Must stay step-for-step identical to :mod:`hardhex._kernel_py`.
"""
cimport cython
from libc.stdint cimport int32_t, int64_t, uint8_t


def advance(uint8_t[::1] occ, const int32_t[:, ::1] nbrs, double p_remove,
            const double[::1] u, Py_ssize_t pos, int64_t count,
            const uint8_t[:, ::1] targets, const int64_t[::1] target_counts,
            int64_t max_steps):
    """Run the chain on ``occ`` in place, consuming uniforms ``u[pos:]``.

    Stops when the state enters a target row, when ``u`` is exhausted or after
    ``max_steps`` steps.  Returns ``(pos, steps, count, hit)`` where ``hit`` is
    the matching target row or -1.
    """
    cdef Py_ssize_t n = occ.shape[0]
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t s, k, t
    cdef int64_t steps = 0
    cdef long hit = -1
    cdef double x, r
    cdef bint changed, blocked, same
    with nogil:
        while pos < m and steps < max_steps:
            x = u[pos] * n
            s = <Py_ssize_t>x
            if s >= n:
                s = n - 1
            r = x - s
            pos += 1
            steps += 1
            changed = False
            if occ[s]:
                if r < p_remove:
                    occ[s] = 0
                    count -= 1
                    changed = True
            else:
                blocked = False
                for k in range(6):
                    if occ[nbrs[s, k]]:
                        blocked = True
                        break
                if not blocked:
                    occ[s] = 1
                    count += 1
                    changed = True
            if changed:
                for t in range(nt):
                    if target_counts[t] != count:
                        continue
                    same = True
                    for k in range(n):
                        if occ[k] != targets[t, k]:
                            same = False
                            break
                    if same:
                        hit = t
                        break
                if hit >= 0:
                    break
    return pos, steps, count, hit
