"""Grid parsing, CSV tables and run manifests."""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["parse_grid", "parse_int_set", "fixed", "write_table", "render_table", "write_manifest", "read_manifest"]

MANIFEST_SUFFIX = ".manifest.json"


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included within 1e-12) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} must look like start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9))
        values = [start + i * step for i in range(n + 2)]
        return [round(v, 12) for v in values if v <= stop + 1e-12]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"cannot parse grid {text!r}") from None


def parse_int_set(text: str) -> list[int]:
    try:
        values = sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError:
        raise ValueError(f"malformed runlength set {text!r}") from None
    if not values or values[0] < 1:
        raise ValueError(f"runlength set {text!r} must hold positive integers")
    return values


def fixed(x, digits: int = 12) -> str:
    """Locale-independent fixed-point rendering; empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, f".{digits}f")


def render_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_table(path: str | Path | None, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    text = render_table(header, rows)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def write_manifest(table_path: str | Path, subcommand: str, params: dict, seed: int, version: str,
                   started: datetime, backend: str) -> Path:
    path = Path(str(table_path) + MANIFEST_SUFFIX)
    doc = {
        "subcommand": subcommand,
        "params": params,
        "master_seed": seed,
        "version": version,
        "kernel_backend": backend,
        "python": platform.python_version(),
        "outputs": [str(table_path)],
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
