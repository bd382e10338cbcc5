# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
import numpy as np

cimport numpy as cnp
from libc.stdlib cimport calloc, free

cnp.import_array()


def group_stats(rows, member_cols):
    """Compiled twin of ``_fallback.group_stats``; same arguments and result."""
    cdef double[:, ::1] r = np.ascontiguousarray(rows, dtype=np.float64)
    cdef Py_ssize_t[::1] c = np.ascontiguousarray(member_cols, dtype=np.intp)
    cdef Py_ssize_t m = r.shape[0], n = r.shape[1]
    cdef Py_ssize_t i, j
    cdef double lo, v
    cdef long long n_ic = 0
    cdef char* inside
    if m < 2 or c.shape[0] != m:
        raise ValueError("need at least two members and one column index per member row")
    for i in range(m):
        if c[i] < 0 or c[i] >= n:
            raise ValueError("member columns must be distinct and inside the row width")
    inside = <char*> calloc(n, 1)
    if inside == NULL:
        raise MemoryError()
    try:
        for i in range(m):
            if inside[c[i]]:
                raise ValueError("member columns must be distinct and inside the row width")
            inside[c[i]] = 1
        with nogil:
            lo = r[0, c[1]]
            for i in range(m):
                for j in range(i + 1, m):
                    v = r[i, c[j]]
                    if v < lo:
                        lo = v
            # count the whole row branch-free, then take the member columns back out
            for i in range(m):
                for j in range(n):
                    n_ic += r[i, j] > lo
                for j in range(m):
                    n_ic -= r[i, c[j]] > lo
    finally:
        free(inside)
    return lo, n_ic
