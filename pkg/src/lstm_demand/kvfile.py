"""Flat ``key = value`` configuration files (no section headers)."""
from __future__ import annotations

import configparser
import json
from pathlib import Path

_SECTION = "settings"


def parse_value(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def read_kv(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    return parse_kv(text)


def parse_kv(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), delimiters=("=",))
    parser.optionxform = str
    parser.read_string(f"[{_SECTION}]\n" + text)
    return {k: parse_value(v) for k, v in parser[_SECTION].items()}


def write_kv(path, values: dict, header: str | None = None) -> None:
    lines = [f"# {header}"] if header else []
    for k, v in values.items():
        lines.append(f"{k} = {json.dumps(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
