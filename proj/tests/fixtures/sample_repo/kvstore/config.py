"""Settings loaded from environment variables."""

import os
from dataclasses import dataclass


@dataclass
class Settings:
    """Runtime configuration for the server and the store."""

    data_path: str = "kv.log"
    host: str = "127.0.0.1"
    port: int = 7379
    cache_size: int = 256


def load_settings(env=None) -> Settings:
    """Build Settings from KV_* environment variables."""
    env = os.environ if env is None else env
    return Settings(
        data_path=env.get("KV_DATA_PATH", "kv.log"),
        host=env.get("KV_HOST", "127.0.0.1"),
        port=int(env.get("KV_PORT", "7379")),
        cache_size=int(env.get("KV_CACHE_SIZE", "256")),
    )
