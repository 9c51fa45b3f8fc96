# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the kernels in _pure.py."""

import numpy as np

cimport numpy as cnp

from hierminer._kernels._pure import PropagationError

cnp.import_array()

BACKEND = "compiled"


def sum_product_tree(potentials, parents):
    """See _pure.sum_product_tree; identical contract."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pot = \
        np.ascontiguousarray(potentials, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] par = \
        np.ascontiguousarray(parents, dtype=np.int64)
    cdef Py_ssize_t n = pot.shape[0]
    cdef Py_ssize_t nb = pot.shape[1]

    cdef cnp.ndarray[cnp.float64_t, ndim=2] belief_up = np.empty((n, nb))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] up_msg = np.empty((n, nb))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] down_in = np.ones((n, nb))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] marg = np.empty((n, nb))

    # children grouped contiguously: order nodes by parent
    cdef cnp.ndarray[cnp.int64_t, ndim=1] child_start = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] child_list = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t v, c, b, i, p
    for c in range(n):
        p = par[c]
        if p >= 0:
            child_start[p + 1] += 1
    for v in range(n):
        child_start[v + 1] += child_start[v]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fill = child_start[:n].copy()
    for c in range(n):
        p = par[c]
        if p >= 0:
            child_list[fill[p]] = c
            fill[p] += 1

    cdef double acc, tot
    # upward pass (children have larger ids than parents)
    for v in range(n - 1, -1, -1):
        for b in range(nb):
            acc = pot[v, b]
            for i in range(child_start[v], child_start[v + 1]):
                acc *= up_msg[child_list[i], b]
            belief_up[v, b] = acc
        acc = 0.0
        for b in range(nb):
            acc += belief_up[v, b]
            up_msg[v, b] = acc
        tot = up_msg[v, nb - 1]
        if tot > 0.0:
            for b in range(nb):
                up_msg[v, b] /= tot

    cdef cnp.ndarray[cnp.float64_t, ndim=2] prefix
    cdef cnp.ndarray[cnp.float64_t, ndim=2] suffix
    cdef Py_ssize_t nc, j
    for v in range(n):
        tot = 0.0
        for b in range(nb):
            marg[v, b] = belief_up[v, b] * down_in[v, b]
            tot += marg[v, b]
        if tot <= 0.0:
            raise PropagationError(f"zero marginal mass at node {v}")
        for b in range(nb):
            marg[v, b] /= tot
        nc = child_start[v + 1] - child_start[v]
        if nc == 0:
            continue
        prefix = np.ones((nc + 1, nb))
        suffix = np.ones((nc + 1, nb))
        for j in range(nc):
            c = child_list[child_start[v] + j]
            for b in range(nb):
                prefix[j + 1, b] = prefix[j, b] * up_msg[c, b]
        for j in range(nc - 1, -1, -1):
            c = child_list[child_start[v] + j]
            for b in range(nb):
                suffix[j, b] = suffix[j + 1, b] * up_msg[c, b]
        for j in range(nc):
            c = child_list[child_start[v] + j]
            acc = 0.0
            for b in range(nb - 1, -1, -1):
                acc += pot[v, b] * down_in[v, b] * prefix[j, b] * suffix[j + 1, b]
                down_in[c, b] = acc
            tot = down_in[c, 0]
            if tot > 0.0:
                for b in range(nb):
                    down_in[c, b] /= tot
    return marg


def gather_bucket_sums(table, bucket_index):
    """See _pure.gather_bucket_sums; identical contract."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] t = \
        np.ascontiguousarray(table, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] q = \
        np.ascontiguousarray(bucket_index, dtype=np.int64)
    cdef Py_ssize_t m = t.shape[0]
    cdef Py_ssize_t k = t.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(k)
    cdef Py_ssize_t i, c
    for i in range(m):
        for c in range(k):
            out[c] += t[i, c, q[c]]
    return out
