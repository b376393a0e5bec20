"""Report bundle: named tables rendered to CSV and aligned text, plus
metadata, written atomically (temp file + rename)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"table {self.name}: row width mismatch")


@dataclass
class ReportBundle:
    tables: dict[str, Table] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def add(self, table: Table) -> None:
        self.tables[table.name] = table


def fmt_value(x, digits: int = 2) -> str:
    """Blank for undefined; fixed decimals otherwise."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, int):
        return str(x)
    return f"{x:.{digits}f}"


def fmt_p(p) -> str:
    if p is None:
        return ""
    return f"{p:.4g}"


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    writer.writerows(table.rows)
    return buf.getvalue()


def render_text(table: Table) -> str:
    widths = [len(c) for c in table.columns]
    for row in table.rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [f"== {table.name} =="]
    header = "  ".join(c.ljust(widths[i]) for i, c in enumerate(table.columns))
    lines.append(header.rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in table.rows:
        cells = []
        for i, cell in enumerate(row):
            if i == 0:
                cells.append(cell.ljust(widths[i]))
            else:
                cells.append(cell.rjust(widths[i]))
        lines.append("  ".join(cells).rstrip())
    if not table.rows:
        lines.append("(empty)")
    return "\n".join(lines) + "\n"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def write_bundle(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """Persist every table as <name>.csv and <name>.txt plus metadata.json.

    All file contents are rendered before anything is written, and each file
    lands via an atomic rename, so a failure never leaves partial tables.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged: list[tuple[Path, bytes]] = []
    for table in bundle.tables.values():
        staged.append((out / f"{table.name}.csv", render_csv(table).encode()))
        staged.append((out / f"{table.name}.txt", render_text(table).encode()))
    staged.append(
        (
            out / "metadata.json",
            (json.dumps(bundle.metadata, indent=2, sort_keys=True) + "\n").encode(),
        )
    )
    written = []
    for path, data in staged:
        write_atomic(path, data)
        written.append(path)
    return written
