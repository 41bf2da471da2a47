"""kvstore: a small key/value store."""

from kvstore.cache import LRUCache
from kvstore.storage import Store

__all__ = ["LRUCache", "Store"]
__version__ = "0.3.1"
