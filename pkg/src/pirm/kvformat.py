"""Line-oriented ``key = value`` text format used for cost tables and configs.

One assignment per line, ``#`` starts a comment, blank lines ignored.
Values keep their raw string form; callers convert.
"""

from pirm.errors import ConfigError


def parse_kv_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out
