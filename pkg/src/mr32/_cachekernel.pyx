# cython: boundscheck=False, wraparound=False
"""Cython LRU cache kernel: the hot per-access loop of the simulator.

Mirrors _cachekernel_py exactly; see there for the contract.
"""

from libc.stdlib cimport calloc, free

HIT = 1
EVICTED_DIRTY = 2

IMPL = "compiled"

cdef int C_HIT = 1
cdef int C_EVICTED_DIRTY = 2


cdef class CacheKernel:
    cdef public int sets
    cdef public int assoc
    cdef long long *_tags      # [sets * assoc], MRU first; -1 = empty
    cdef char *_dirty

    def __cinit__(self, int sets, int assoc):
        self.sets = sets
        self.assoc = assoc
        self._tags = <long long *> calloc(sets * assoc, sizeof(long long))
        self._dirty = <char *> calloc(sets * assoc, sizeof(char))
        if self._tags == NULL or self._dirty == NULL:
            raise MemoryError()
        self.reset()

    def __dealloc__(self):
        if self._tags != NULL:
            free(self._tags)
        if self._dirty != NULL:
            free(self._dirty)

    cpdef reset(self):
        cdef int i
        for i in range(self.sets * self.assoc):
            self._tags[i] = -1
            self._dirty[i] = 0

    cpdef int access(self, int set_index, long long tag, bint is_write):
        cdef int base = set_index * self.assoc
        cdef int i, j
        cdef int flags = 0
        cdef long long t, victim_tag
        cdef char d, victim_dirty
        for i in range(self.assoc):
            t = self._tags[base + i]
            if t == tag:
                d = self._dirty[base + i]
                for j in range(i, 0, -1):
                    self._tags[base + j] = self._tags[base + j - 1]
                    self._dirty[base + j] = self._dirty[base + j - 1]
                self._tags[base] = tag
                self._dirty[base] = 1 if is_write else d
                return C_HIT
            if t == -1:
                break
        # Miss: shift everything down, possibly evicting the LRU way.
        victim_tag = self._tags[base + self.assoc - 1]
        victim_dirty = self._dirty[base + self.assoc - 1]
        if victim_tag != -1 and victim_dirty:
            flags |= C_EVICTED_DIRTY
        for j in range(self.assoc - 1, 0, -1):
            self._tags[base + j] = self._tags[base + j - 1]
            self._dirty[base + j] = self._dirty[base + j - 1]
        self._tags[base] = tag
        self._dirty[base] = 1 if is_write else 0
        return flags

    def set_contents(self, int set_index):
        cdef int base = set_index * self.assoc
        cdef int i
        out = []
        for i in range(self.assoc):
            if self._tags[base + i] != -1:
                out.append((self._tags[base + i], bool(self._dirty[base + i])))
        return out
