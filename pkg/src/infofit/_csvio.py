"""CSV helpers: every file starts with a provenance comment, then a header."""
from __future__ import annotations

import csv
import hashlib
import json

from . import __version__


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def fmt(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows, config=None, extra_comments=()):
    with open(path, "w", newline="") as fh:
        fh.write(f"# infofit {__version__} config_sha256={config_hash(config)}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """Return (header, rows, comments) with comment lines stripped."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    reader = csv.reader(body)
    header = next(reader)
    return header, list(reader), comments
