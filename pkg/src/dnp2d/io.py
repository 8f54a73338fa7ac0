"""Deterministic, atomic file output shared by all modules."""

import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_bytes(path, data):
    """Write ``data`` to ``path`` via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text):
    return atomic_write_bytes(path, text.encode("utf-8"))


def csv_text(header, columns):
    """CSV with a header line and round-trip (``%.17g``) formatting of every value."""
    lines = [",".join(header)]
    if columns and len(columns[0]):
        cols = [np.asarray(c, dtype=float) for c in columns]
        for row in zip(*cols):
            lines.append(",".join(format(float(v), ".17g") for v in row))
    return "\n".join(lines) + "\n"
