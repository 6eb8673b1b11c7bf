from __future__ import annotations

import json
from pathlib import Path

from activesg.errors import ConfigurationError


def load_json(path: str | Path, error: type[ConfigurationError] = ConfigurationError) -> dict:
    """Parse a JSON object file; failures carry ``path:line:col`` and the offending line."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise error(f"cannot read {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        line = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise error(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}\n    {' ' * (exc.colno - 1)}^") from exc
    if not isinstance(raw, dict):
        raise error(f"{p}:1:1: top level must be a JSON object")
    return raw


def locate_key(path: str | Path, key: str) -> str:
    """``path:line`` of the first line mentioning ``"key"``, for error messages."""
    try:
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if f'"{key}"' in line:
                return f"{path}:{n}"
    except OSError:
        pass
    return str(path)
