"""Networking: a line protocol server and client."""
