"""Blocking client for the kvstore server."""

import socket

from kvstore.errors import ProtocolError
from kvstore.net.protocol import encode_request


class Client:
    """Keeps one TCP connection open to the server."""

    def __init__(self, host="127.0.0.1", port=7379, timeout=5.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rb")

    def _call(self, command, *args):
        self._sock.sendall(encode_request(command, *args))
        status, _, payload = self._file.readline().decode().rstrip("\n").partition("\t")
        if status != "OK":
            raise ProtocolError(payload)
        return payload

    def get(self, key):
        return self._call("GET", key)

    def set(self, key, value):
        self._call("SET", key, str(value))

    def close(self):
        self._file.close()
        self._sock.close()
