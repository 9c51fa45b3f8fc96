"""Pure-numpy implementations of the inner-loop kernels.

Reference semantics for the compiled twin in ``_core.pyx``; also the
fallback when the extension was not built. Both backends must agree to
float tolerance (see tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


class PropagationError(RuntimeError):
    """Contradictory evidence: some node marginal collapsed to zero mass."""


def sum_product_tree(potentials: np.ndarray, parents: np.ndarray) -> np.ndarray:
    """Exact marginals of a tree-structured model over ordered buckets.

    Node potentials are rows of ``potentials`` (node x bucket); every edge
    carries the indicator ``bucket(parent) >= bucket(child)``. Node ids must
    be topological (parent before child), with ``parents[root] == -1``.
    Messages are prefix/suffix sums, so each edge costs O(buckets).
    """
    pot = np.asarray(potentials, dtype=np.float64)
    n, nb = pot.shape
    parents = np.asarray(parents, dtype=np.int64)

    children: list[list[int]] = [[] for _ in range(n)]
    for c in range(n):
        p = parents[c]
        if p >= 0:
            children[p].append(c)

    # Upward pass: belief_up[v] = pot[v] * prod of child messages;
    # message to the parent is the prefix sum of belief_up over buckets.
    belief_up = np.empty_like(pot)
    up_msg = np.empty_like(pot)
    for v in range(n - 1, -1, -1):
        b = pot[v].copy()
        for c in children[v]:
            b *= up_msg[c]
        belief_up[v] = b
        m = np.cumsum(b)
        tot = m[-1]
        if tot > 0:
            m = m / tot
        up_msg[v] = m

    # Downward pass: message to child c is the suffix sum over
    # y_parent >= y_child of pot[p] * down_in[p] * prod of other children.
    down_in = np.ones_like(pot)
    marginals = np.empty_like(pot)
    for v in range(n):
        kids = children[v]
        bel = belief_up[v] * down_in[v]
        s = bel.sum()
        if s <= 0.0:
            raise PropagationError(f"zero marginal mass at node {v}")
        marginals[v] = bel / s
        if not kids:
            continue
        msgs = up_msg[kids]  # (nc, nb)
        nc = len(kids)
        prefix = np.ones((nc + 1, nb))
        np.cumprod(msgs, axis=0, out=prefix[1:])
        suffix = np.ones((nc + 1, nb))
        np.cumprod(msgs[::-1], axis=0, out=suffix[1:])
        suffix = suffix[::-1]
        base = pot[v] * down_in[v]
        for i, c in enumerate(kids):
            factor = base * prefix[i] * suffix[i + 1]
            m = np.cumsum(factor[::-1])[::-1]
            tot = m[0]
            if tot > 0:
                m = m / tot
            down_in[c] = m
    return marginals


def gather_bucket_sums(
    table: np.ndarray, bucket_index: np.ndarray
) -> np.ndarray:
    """Column sums of ``table[i, c, bucket_index[c]]`` over rows i.

    ``table`` is (rows, concepts, buckets); the result is (concepts,).
    """
    idx = bucket_index[np.newaxis, :, np.newaxis]
    return np.take_along_axis(table, idx, axis=2)[:, :, 0].sum(axis=0)
