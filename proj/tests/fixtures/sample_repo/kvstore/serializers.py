"""Value serializers: JSON and pickle."""

import json
import pickle


class Serializer:
    """Base interface for value encoders."""

    name = "base"

    def dumps(self, value) -> bytes:
        raise NotImplementedError

    def loads(self, blob: bytes):
        raise NotImplementedError


class JsonSerializer(Serializer):
    name = "json"

    def dumps(self, value) -> bytes:
        return json.dumps(value, sort_keys=True).encode()

    def loads(self, blob: bytes):
        return json.loads(blob.decode())


class PickleSerializer(Serializer):
    """Pickle encoder; only for trusted data."""

    name = "pickle"

    def dumps(self, value) -> bytes:
        return pickle.dumps(value).hex().encode()

    def loads(self, blob: bytes):
        return pickle.loads(bytes.fromhex(blob.decode()))


_REGISTRY = {cls.name: cls for cls in (JsonSerializer, PickleSerializer)}


def get_serializer(name: str) -> Serializer:
    """Instantiate the serializer registered under `name`."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown serializer: {name}") from None
