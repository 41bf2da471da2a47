"""Command line entry point: kv get|set|del|serve."""

import argparse
import sys

from kvstore.config import load_settings
from kvstore.storage import Store


def build_parser():
    parser = argparse.ArgumentParser(prog="kv")
    sub = parser.add_subparsers(dest="command", required=True)
    get = sub.add_parser("get")
    get.add_argument("key")
    put = sub.add_parser("set")
    put.add_argument("key")
    put.add_argument("value")
    rm = sub.add_parser("del")
    rm.add_argument("key")
    sub.add_parser("serve")
    return parser


def main(argv=None):
    """Run one command against the configured store."""
    args = build_parser().parse_args(argv)
    settings = load_settings()
    if args.command == "serve":
        from kvstore.net.server import serve

        serve(settings)
        return 0
    store = Store(settings.data_path, cache_size=settings.cache_size)
    if args.command == "get":
        print(store.get(args.key))
    elif args.command == "set":
        store.set(args.key, args.value)
    else:
        store.delete(args.key)
    return 0


if __name__ == "__main__":
    sys.exit(main())
