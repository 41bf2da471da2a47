"""Threaded TCP server exposing a Store over the line protocol."""

import socketserver

from kvstore.errors import KVError
from kvstore.net.protocol import decode_request, encode_response
from kvstore.storage import Store


class RequestHandler(socketserver.StreamRequestHandler):
    """Handles one client connection until it closes."""

    def handle(self):
        for line in self.rfile:
            try:
                command, args = decode_request(line)
                reply = self.server.dispatch(command, args)
                self.wfile.write(encode_response(True, reply))
            except KVError as exc:
                self.wfile.write(encode_response(False, str(exc)))


class KVServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True

    def __init__(self, address, store: Store):
        super().__init__(address, RequestHandler)
        self.store = store

    def dispatch(self, command, args):
        if command == "GET":
            return str(self.store.get(args[0]))
        if command == "SET":
            self.store.set(args[0], args[1])
            return ""
        if command == "DEL":
            self.store.delete(args[0])
            return ""
        return ",".join(self.store.keys())


def serve(settings):
    """Start serving forever on settings.host:settings.port."""
    store = Store(settings.data_path, cache_size=settings.cache_size)
    with KVServer((settings.host, settings.port), store) as server:
        server.serve_forever()
