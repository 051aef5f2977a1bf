"""Pure-Python delete-relaxation level sweep.

Fallback backend for `oakplan.reachability`; mirrors the compiled
`oakplan._levels` extension exactly (same signature, same results).
"""

from __future__ import annotations

import numpy as np

UNREACHED = 1 << 30


def compute_levels(n_facts, pre_counts, cons_indptr, cons_indices,
                   add_indptr, add_indices, init_ids):
    """Fact and action levels of the relaxed planning graph.

    Facts true in the initial set have level 0; an action's level is the
    maximum level of its preconditions; an added fact's level is one more
    than its cheapest adder's level.  UNREACHED marks the rest.
    """
    pre_counts = pre_counts.tolist()
    cons_indptr = cons_indptr.tolist()
    cons_indices = cons_indices.tolist()
    add_indptr = add_indptr.tolist()
    add_indices = add_indices.tolist()
    n_actions = len(pre_counts)

    fact_level = [UNREACHED] * n_facts
    action_level = [UNREACHED] * n_actions
    remaining = list(pre_counts)

    frontier: list[int] = []
    for f in init_ids.tolist():
        if fact_level[f] != 0:
            fact_level[f] = 0
            frontier.append(f)
    nxt: list[int] = []
    for a in range(n_actions):
        if remaining[a] == 0:
            action_level[a] = 0
            for k in range(add_indptr[a], add_indptr[a + 1]):
                g = add_indices[k]
                if fact_level[g] == UNREACHED:
                    fact_level[g] = 1
                    nxt.append(g)

    level = 0
    while frontier:
        for f in frontier:
            for k in range(cons_indptr[f], cons_indptr[f + 1]):
                a = cons_indices[k]
                remaining[a] -= 1
                if remaining[a] == 0:
                    action_level[a] = level
                    for j in range(add_indptr[a], add_indptr[a + 1]):
                        g = add_indices[j]
                        if fact_level[g] == UNREACHED:
                            fact_level[g] = level + 1
                            nxt.append(g)
        frontier = nxt
        nxt = []
        level += 1

    return (np.asarray(fact_level, dtype=np.int32),
            np.asarray(action_level, dtype=np.int32))
