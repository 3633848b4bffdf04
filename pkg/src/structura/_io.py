import json
import os
from pathlib import Path


def write_atomic(path, data):
    """Write via a sibling temp file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"
