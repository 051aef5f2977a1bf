"""Ground fact/action index and relaxed-reachability levels.

Facts and ground actions are interned to integer ids once per problem so
the level sweep runs over flat int arrays.  The sweep itself lives in the
compiled `oakplan._levels` extension when available, with the identical
pure-Python `oakplan._levels_py` as fallback; set OAKPLAN_PURE=1 to force
the fallback.  `benchmarks/bench_levels.py` compares the two.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from .model import Action, Fact, PlanningProblem

if os.environ.get("OAKPLAN_PURE"):
    from . import _levels_py as _impl

    BACKEND = "pure-python"
else:
    try:
        from . import _levels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _levels_py as _impl

        BACKEND = "pure-python"

UNREACHED: int = _impl.UNREACHED

__all__ = ["BACKEND", "UNREACHED", "GroundIndex", "Levels", "ground_index"]


class Levels:
    """Relaxed planning-graph levels for one initial fact set."""

    __slots__ = ("_index", "_fact_level", "_action_level")

    def __init__(self, index: "GroundIndex", fact_level, action_level):
        self._index = index
        self._fact_level = fact_level
        self._action_level = action_level

    def fact_level(self, fact: Fact) -> int:
        fid = self._index.fact_ids.get(fact)
        if fid is None:
            return UNREACHED
        return int(self._fact_level[fid])

    def action_level(self, action: Action) -> int:
        aid = self._index.action_ids.get(action)
        if aid is None:
            return UNREACHED
        return int(self._action_level[aid])

    def reachable(self, fact: Fact) -> bool:
        return self.fact_level(fact) < UNREACHED


class GroundIndex:
    """Interned facts/actions of one problem plus CSR effect tables."""

    def __init__(self, problem: PlanningProblem):
        actions = problem.ground_actions
        facts: set[Fact] = set(problem.init) | set(problem.goals)
        for a in actions:
            facts |= a.pre
            facts |= a.add
            facts |= a.delete
        self.facts: tuple[Fact, ...] = tuple(sorted(facts))
        self.fact_ids: dict[Fact, int] = {f: i for i, f in enumerate(self.facts)}
        self.actions: tuple[Action, ...] = actions
        self.action_ids: dict[Action, int] = {a: i for i, a in enumerate(actions)}

        pre_counts = np.array([len(a.pre) for a in actions], dtype=np.int32)
        cons: list[list[int]] = [[] for _ in self.facts]
        add_indptr = [0]
        add_indices: list[int] = []
        adders: dict[int, list[int]] = {}
        for aid, a in enumerate(actions):
            for f in a.pre:
                cons[self.fact_ids[f]].append(aid)
            for f in sorted(a.add):
                gid = self.fact_ids[f]
                add_indices.append(gid)
                adders.setdefault(gid, []).append(aid)
            add_indptr.append(len(add_indices))
        cons_indptr = [0]
        cons_indices: list[int] = []
        for lst in cons:
            cons_indices.extend(lst)
            cons_indptr.append(len(cons_indices))

        self._pre_counts = pre_counts
        self._cons_indptr = np.array(cons_indptr, dtype=np.int32)
        self._cons_indices = np.array(cons_indices, dtype=np.int32)
        self._add_indptr = np.array(add_indptr, dtype=np.int32)
        self._add_indices = np.array(add_indices, dtype=np.int32)
        self._adders = {gid: tuple(aids) for gid, aids in adders.items()}

    def adders_of(self, fact: Fact) -> tuple[Action, ...]:
        fid = self.fact_ids.get(fact)
        if fid is None:
            return ()
        return tuple(self.actions[aid] for aid in self._adders.get(fid, ()))

    def compute(self, state) -> Levels:
        """Levels for the relaxed graph grown from `state`.

        Facts outside this problem's index are ignored: they can support
        nothing the index knows about.
        """
        ids = sorted(
            self.fact_ids[f] for f in state if f in self.fact_ids
        )
        init_ids = np.array(ids, dtype=np.int32)
        fact_level, action_level = _impl.compute_levels(
            len(self.facts),
            self._pre_counts,
            self._cons_indptr,
            self._cons_indices,
            self._add_indptr,
            self._add_indices,
            init_ids,
        )
        return Levels(self, fact_level, action_level)


@lru_cache(maxsize=64)
def ground_index(problem: PlanningProblem) -> GroundIndex:
    return GroundIndex(problem)
