"""Key hashing for sharding."""

import hashlib


def stable_hash(key: str) -> int:
    """64-bit hash that does not change between interpreter runs."""
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def shard_for(key: str, shards: int) -> int:
    if shards <= 0:
        raise ValueError("shards must be positive")
    return stable_hash(key) % shards
