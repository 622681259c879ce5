"""Pure-Python LRU cache kernel (fallback for the Cython extension).

Per set, lines are kept in recency order, index 0 being the most recently
used. ``access`` returns a flag word: bit 0 set on hit, bit 1 set when a
dirty line was evicted. Both kernel implementations must be behaviorally
identical; the test suite cross-checks them access-for-access.
"""

from __future__ import annotations

HIT = 1
EVICTED_DIRTY = 2

IMPL = "pure"


class CacheKernel:
    __slots__ = ("sets", "assoc", "_lines")

    def __init__(self, sets: int, assoc: int):
        self.sets = sets
        self.assoc = assoc
        # Each entry: [tag, dirty] lists in MRU->LRU order.
        self._lines: list[list[list[int]]] = [[] for _ in range(sets)]

    def reset(self) -> None:
        self._lines = [[] for _ in range(self.sets)]

    def access(self, set_index: int, tag: int, is_write: bool) -> int:
        ways = self._lines[set_index]
        for i, entry in enumerate(ways):
            if entry[0] == tag:
                if i:
                    ways.insert(0, ways.pop(i))
                if is_write:
                    ways[0][1] = 1
                return HIT
        flags = 0
        ways.insert(0, [tag, 1 if is_write else 0])
        if len(ways) > self.assoc:
            victim = ways.pop()
            if victim[1]:
                flags |= EVICTED_DIRTY
        return flags

    def set_contents(self, set_index: int) -> list[tuple[int, bool]]:
        """(tag, dirty) pairs in MRU->LRU order, for tests and dumps."""
        return [(t, bool(d)) for t, d in self._lines[set_index]]
