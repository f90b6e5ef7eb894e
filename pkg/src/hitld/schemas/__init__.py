"""JSON schemas for the teleoperation wire protocol.

``client_message.schema.json`` covers frames sent by a teleop client,
``server_message.schema.json`` covers frames emitted by the server.
"""

from pathlib import Path

SCHEMA_DIR = Path(__file__).parent


def load(name):
    """Return the parsed schema with the given filename."""
    import json

    with open(SCHEMA_DIR / name, "r", encoding="utf-8") as f:
        return json.load(f)
