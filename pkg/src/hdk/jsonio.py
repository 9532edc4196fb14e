"""Deterministic JSON/CSV writing shared by the command-line tools.

All floats are emitted with 17 significant digits so that files round-
trip losslessly and byte-compare equal across runs; writes go through a
temp file in the target directory followed by an atomic rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import FormatError


def format_float(value: float) -> str:
    text = format(float(value), ".17g")
    # ".17g" may yield bare "inf"/"nan", which are not JSON; callers
    # validate finiteness, so this is a safety net.
    if text in ("inf", "-inf", "nan"):
        raise FormatError(f"cannot serialize non-finite number {value}")
    return text


def dumps(obj, indent: int = 2) -> str:
    """Serialize to JSON with fixed float formatting and key order."""
    out: list[str] = []
    _write(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def _write(obj, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    closing = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _write(value, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(closing + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(seq):
            out.append(pad)
            _write(value, out, indent, level + 1)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(closing + "]")
    else:
        raise FormatError(f"cannot serialize {type(obj).__name__} to JSON")


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc


def save_depth_csv(path: str, values: np.ndarray) -> None:
    atomic_write_text(path, "".join(format_float(v) + "\n" for v in values))


def load_depth_csv(path: str) -> np.ndarray:
    try:
        with open(path) as handle:
            lines = [line.strip() for line in handle if line.strip()]
        return np.array([float(line) for line in lines])
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path} is not a flat depth CSV: {exc}") from exc


def config_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]


@dataclass
class RunManifest:
    """Provenance block embedded in every output file."""

    command: str
    inputs: list[str]
    config_hash: str
    seed: int
    version: str
    duration_s: float

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "inputs": list(self.inputs),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "duration_s": self.duration_s,
        }
