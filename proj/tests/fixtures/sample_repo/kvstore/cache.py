"""Least-recently-used cache used in front of the store."""

from collections import OrderedDict


class LRUCache:
    """Bounded mapping that evicts the least recently used entry."""

    def __init__(self, capacity: int = 128):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, key, default=None):
        """Return the cached value and mark it as recently used."""
        if key in self._data:
            self._data.move_to_end(key)
            self.hits += 1
            return self._data[key]
        self.misses += 1
        return default

    def put(self, key, value):
        self._data[key] = value
        self._data.move_to_end(key)
        if len(self._data) > self.capacity:
            self._data.popitem(last=False)

    def invalidate(self, key):
        self._data.pop(key, None)

    def __len__(self):
        return len(self._data)


def hit_ratio(cache: LRUCache) -> float:
    """Fraction of lookups served from the cache."""
    total = cache.hits + cache.misses
    return cache.hits / total if total else 0.0
