"""Pure-Python LRU trace replay; same interface as the compiled ``_lru``."""

from collections import OrderedDict

import numpy as np


class LruReplay:
    def __init__(self, capacity: int, key_space: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if key_space < 1 or key_space > 2**31 - 1:
            raise ValueError("key_space must be in [1, 2**31)")
        self.capacity = capacity
        self.key_space = key_space
        self._table = OrderedDict()

    def __len__(self):
        return len(self._table)

    def __contains__(self, key):
        return int(key) in self._table

    def replay(self, keys):
        keys = np.ascontiguousarray(keys, dtype=np.int64)
        if keys.size and (keys.min() < 0 or keys.max() >= self.key_space):
            bad = keys[(keys < 0) | (keys >= self.key_space)][0]
            raise ValueError(f"key {bad} outside [0, {self.key_space})")
        table = self._table
        capacity = self.capacity
        out = np.zeros(keys.size, dtype=np.uint8)
        for i, k in enumerate(keys.tolist()):
            if k in table:
                table.move_to_end(k)
                out[i] = 1
            else:
                table[k] = None
                if len(table) > capacity:
                    table.popitem(last=False)
        return out

    def order(self):
        return list(self._table)
