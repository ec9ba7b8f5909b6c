# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LRU trace replay over a dense integer key space."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint8_t

cnp.import_array()


cdef class LruReplay:
    """LRU table over keys in ``[0, key_space)``, replayed a trace at a time.

    State persists between ``replay`` calls, so a trace may be fed in
    chunks (e.g. one time period at a time).
    """

    cdef readonly Py_ssize_t capacity
    cdef readonly Py_ssize_t key_space
    cdef Py_ssize_t size
    cdef int32_t head  # least recently used
    cdef int32_t tail  # most recently used
    cdef int32_t[::1] prev
    cdef int32_t[::1] nxt
    cdef uint8_t[::1] present

    def __init__(self, Py_ssize_t capacity, Py_ssize_t key_space):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if key_space < 1 or key_space > 2**31 - 1:
            raise ValueError("key_space must be in [1, 2**31)")
        self.capacity = capacity
        self.key_space = key_space
        self.size = 0
        self.head = -1
        self.tail = -1
        self.prev = np.full(key_space, -1, dtype=np.int32)
        self.nxt = np.full(key_space, -1, dtype=np.int32)
        self.present = np.zeros(key_space, dtype=np.uint8)

    def __len__(self):
        return self.size

    def __contains__(self, key):
        k = int(key)
        return 0 <= k < self.key_space and self.present[k] != 0

    cdef inline void _unlink(self, int32_t k) noexcept nogil:
        cdef int32_t p = self.prev[k]
        cdef int32_t n = self.nxt[k]
        if p >= 0:
            self.nxt[p] = n
        else:
            self.head = n
        if n >= 0:
            self.prev[n] = p
        else:
            self.tail = p
        self.prev[k] = -1
        self.nxt[k] = -1

    cdef inline void _push_mru(self, int32_t k) noexcept nogil:
        self.prev[k] = self.tail
        self.nxt[k] = -1
        if self.tail >= 0:
            self.nxt[self.tail] = k
        else:
            self.head = k
        self.tail = k

    def replay(self, keys):
        """Touch each key in order; returns a uint8 array, 1 where it hit."""
        cdef const int64_t[::1] ks = np.ascontiguousarray(keys, dtype=np.int64)
        cdef Py_ssize_t n = ks.shape[0]
        out = np.zeros(n, dtype=np.uint8)
        cdef uint8_t[::1] hits = out
        cdef Py_ssize_t i
        cdef int64_t k64
        cdef int32_t k, victim
        for i in range(n):
            k64 = ks[i]
            if k64 < 0 or k64 >= self.key_space:
                raise ValueError(f"key {k64} outside [0, {self.key_space})")
        with nogil:
            for i in range(n):
                k = <int32_t>ks[i]
                if self.present[k]:
                    hits[i] = 1
                    if self.tail != k:
                        self._unlink(k)
                        self._push_mru(k)
                else:
                    self.present[k] = 1
                    self._push_mru(k)
                    self.size += 1
                    if self.size > self.capacity:
                        victim = self.head
                        self._unlink(victim)
                        self.present[victim] = 0
                        self.size -= 1
        return out

    def order(self):
        """Keys from least to most recently used."""
        res = []
        cdef int32_t k = self.head
        while k >= 0:
            res.append(k)
            k = self.nxt[k]
        return res
