"""Line-based request/response encoding."""

from kvstore.errors import ProtocolError

COMMANDS = ("GET", "SET", "DEL", "KEYS")


def encode_request(command: str, *args: str) -> bytes:
    """Encode a command and its arguments as one tab-separated line."""
    if command not in COMMANDS:
        raise ProtocolError(f"unknown command {command}")
    return ("\t".join((command,) + args) + "\n").encode()


def decode_request(line: bytes):
    parts = line.decode().rstrip("\n").split("\t")
    if not parts or parts[0] not in COMMANDS:
        raise ProtocolError("bad request line")
    return parts[0], parts[1:]


def encode_response(ok: bool, payload: str = "") -> bytes:
    return (("OK" if ok else "ERR") + "\t" + payload + "\n").encode()
