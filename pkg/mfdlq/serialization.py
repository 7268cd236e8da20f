"""
Byte-stable JSON and CSV output.

Floats are written with 17 significant digits so every double survives a
round trip; key order is the insertion order of the document.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

import numpy as np

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    """Format a finite float with 17 significant digits."""
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"Cannot serialize non-finite value {value!r}")
    return format(value, ".17g")


def to_plain(value: Any) -> Any:
    """Convert numpy containers and scalars into plain Python values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


def _emit(value: Any, indent: int, level: int, out: List[str]) -> None:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if value is None or isinstance(value, bool):
        out.append(json.dumps(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            out.append(f"{pad}{json.dumps(str(key))}: ")
            _emit(item, indent, level + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(close + "}")
    elif isinstance(value, list):
        if not value:
            out.append("[]")
            return
        # Rows of numbers stay on one line; nested containers are expanded.
        if all(not isinstance(v, (dict, list)) for v in value):
            parts: List[str] = []
            for item in value:
                chunk: List[str] = []
                _emit(item, indent, level + 1, chunk)
                parts.append("".join(chunk))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(pad)
            _emit(item, indent, level + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(close + "]")
    else:
        raise TypeError(f"Cannot serialize object of type {type(value).__name__}")


def dumps(document: Any, indent: int = 2) -> str:
    """
    Serialize a document to deterministic JSON text.

    Args:
        document: Dicts, lists, numbers, strings, booleans, None or numpy values.
        indent: Spaces per nesting level.

    Returns:
        str: JSON text terminated by a single LF.
    """
    out: List[str] = []
    _emit(to_plain(document), indent, 0, out)
    out.append("\n")
    return "".join(out)


def write_text(path: PathLike, text: str) -> None:
    """Write text with LF line endings regardless of platform."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV text; floats use 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [
                format_float(cell) if isinstance(cell, (float, np.floating)) else cell
                for cell in row
            ]
        )
    return buffer.getvalue()


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV file with a header row and LF line endings."""
    write_text(path, csv_text(header, rows))
