from kvstore.cache import LRUCache, hit_ratio


def test_eviction_order():
    cache = LRUCache(2)
    cache.put("a", 1)
    cache.put("b", 2)
    cache.get("a")
    cache.put("c", 3)
    assert cache.get("b") is None
    assert cache.get("a") == 1


def test_hit_ratio():
    cache = LRUCache(1)
    cache.put("a", 1)
    cache.get("a")
    cache.get("x")
    assert hit_ratio(cache) == 0.5
