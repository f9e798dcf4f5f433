"""One-record-per-line key=value text, readable by humans and by `dict`."""

from __future__ import annotations

from .errors import InputError


def format_record(**fields) -> str:
    parts = []
    for key, value in fields.items():
        if isinstance(value, float):
            value = repr(value)
        text = str(value)
        if any(ch.isspace() for ch in text):
            raise InputError(f"record value for {key!r} contains whitespace: {text!r}")
        parts.append(f"{key}={text}")
    return " ".join(parts)


def parse_record(line: str) -> dict[str, str]:
    out = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise InputError(f"bad record token {token!r}")
        out[key] = value
    return out
