"""Persistent dictionary backed by an append-only log file."""

import os

from kvstore.cache import LRUCache
from kvstore.errors import KeyNotFound
from kvstore.serializers import get_serializer


class Store:
    """Key/value store with a write-through cache."""

    def __init__(self, path, serializer="json", cache_size=256):
        self.path = path
        self.serializer = get_serializer(serializer)
        self.cache = LRUCache(cache_size)
        self._index = {}
        if os.path.exists(path):
            self._replay()

    def _replay(self):
        with open(self.path, "rb") as fh:
            for line in fh:
                key, _, blob = line.rstrip(b"\n").partition(b"\t")
                self._index[key.decode()] = blob

    def set(self, key, value):
        """Append the value to the log and update the index."""
        blob = self.serializer.dumps(value)
        with open(self.path, "ab") as fh:
            fh.write(key.encode() + b"\t" + blob + b"\n")
        self._index[key] = blob
        self.cache.put(key, value)

    def get(self, key):
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        if key not in self._index:
            raise KeyNotFound(key)
        value = self.serializer.loads(self._index[key])
        self.cache.put(key, value)
        return value

    def delete(self, key):
        self._index.pop(key, None)
        self.cache.invalidate(key)

    def keys(self):
        return sorted(self._index)
