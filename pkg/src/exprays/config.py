"""Flat ``key = value`` job files with an ``include`` directive.

    # comment
    include common.cfg
    c = -2+0i
    address = | 0

Later assignments override earlier ones, an included file is read in place
of its include line, and relative includes resolve against the including
file.  Keys use the long option names of the command line with dashes or
underscores.
"""
from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def _norm(key: str) -> str:
    return key.strip().replace("-", "_")


def read_config(path, _stack: tuple = ()) -> dict[str, str]:
    path = Path(path).resolve()
    if path in _stack:
        raise ConfigError(f"include cycle through {path}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "include" and "=" not in line:
            target = Path(rest.strip())
            if not target.is_absolute():
                target = path.parent / target
            out.update(read_config(target, _stack + (path,)))
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = _norm(key)
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out
