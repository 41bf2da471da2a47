import pytest

from kvstore.errors import KeyNotFound
from kvstore.storage import Store


def test_roundtrip(tmp_path):
    store = Store(str(tmp_path / "kv.log"))
    store.set("k", {"v": 1})
    assert Store(str(tmp_path / "kv.log")).get("k") == {"v": 1}


def test_missing_key(tmp_path):
    with pytest.raises(KeyNotFound):
        Store(str(tmp_path / "kv.log")).get("nope")
