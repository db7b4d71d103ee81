"""Run manifests and reproducible JSON/CSV writers.

Floats are written with 17 significant digits, NaN and infinities as
JSON ``null``, and CSV with '.' decimals, LF line endings and a header row.  The
manifest timestamp honours ``SOURCE_DATE_EPOCH`` so that repeated runs can be
byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from mvhbond import __version__


def fmt_float(x: float) -> str:
    """Fixed 17-significant-digit form: exact round trip, independent of platform repr."""
    return format(float(x), ".17g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with 17-significant-digit floats and NaN/inf as null; ends with a newline."""
    return _encode(obj, indent, 0) + "\n"


def timestamp() -> str:
    """UTC ISO-8601 time, taken from SOURCE_DATE_EPOCH when that is set."""
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    secs = int(raw) if raw is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(secs))


@dataclass(frozen=True)
class RunManifest:
    command: str
    params_file: str | None
    overrides: dict
    params: dict
    numerics: dict
    output: str | None
    seed: int | None
    timestamp: str = field(default_factory=timestamp)
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


def write_text(text: str, path: str | None) -> None:
    if path is None:
        import sys
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def json_document(manifest: RunManifest, result: Any) -> str:
    return dumps({"manifest": manifest.to_dict(), "result": result})


def csv_document(manifest: RunManifest, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV whose first line is '# manifest <json>', then a header row."""
    buf = io.StringIO(newline="")
    compact = "".join(line.strip() for line in dumps(manifest.to_dict(), indent=0).splitlines())
    buf.write(f"# manifest {compact}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_float(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by ``csv_document`` (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]
