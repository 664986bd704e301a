"""Shared CSV/text output helpers (atomic writes, fixed significant digits)."""
from __future__ import annotations

import os
import tempfile


def fmt(value: float, precision: int = 12) -> str:
    """Format with a fixed number of significant digits."""
    return f"%.{precision}g" % value


def atomic_write_text(path, text: str) -> None:
    """Write-temp-then-rename so partial files never appear."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
