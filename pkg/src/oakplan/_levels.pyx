# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled delete-relaxation level sweep (see `_levels_py` for semantics)."""

import numpy as np

UNREACHED = 1 << 30


def compute_levels(int n_facts,
                   int[::1] pre_counts,
                   int[::1] cons_indptr, int[::1] cons_indices,
                   int[::1] add_indptr, int[::1] add_indices,
                   int[::1] init_ids):
    cdef int n_actions = pre_counts.shape[0]
    cdef int unreached = UNREACHED

    fact_level_arr = np.full(n_facts, unreached, dtype=np.int32)
    action_level_arr = np.full(n_actions, unreached, dtype=np.int32)
    remaining_arr = np.asarray(pre_counts).copy()
    frontier_arr = np.empty(max(n_facts, 1), dtype=np.int32)
    next_arr = np.empty(max(n_facts, 1), dtype=np.int32)

    cdef int[::1] fact_level = fact_level_arr
    cdef int[::1] action_level = action_level_arr
    cdef int[::1] remaining = remaining_arr
    cdef int[::1] frontier = frontier_arr
    cdef int[::1] nxt = next_arr

    cdef Py_ssize_t i, k, j
    cdef int f, a, g, level
    cdef int n_frontier = 0, n_next = 0

    for i in range(init_ids.shape[0]):
        f = init_ids[i]
        if fact_level[f] != 0:
            fact_level[f] = 0
            frontier[n_frontier] = f
            n_frontier += 1
    for a in range(n_actions):
        if remaining[a] == 0:
            action_level[a] = 0
            for k in range(add_indptr[a], add_indptr[a + 1]):
                g = add_indices[k]
                if fact_level[g] == unreached:
                    fact_level[g] = 1
                    nxt[n_next] = g
                    n_next += 1

    level = 0
    while n_frontier > 0:
        for i in range(n_frontier):
            f = frontier[i]
            for k in range(cons_indptr[f], cons_indptr[f + 1]):
                a = cons_indices[k]
                remaining[a] -= 1
                if remaining[a] == 0:
                    action_level[a] = level
                    for j in range(add_indptr[a], add_indptr[a + 1]):
                        g = add_indices[j]
                        if fact_level[g] == unreached:
                            fact_level[g] = level + 1
                            nxt[n_next] = g
                            n_next += 1
        frontier, nxt = nxt, frontier
        n_frontier = n_next
        n_next = 0
        level += 1

    return fact_level_arr, action_level_arr
