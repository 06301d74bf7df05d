"""Small deterministic CSV writer shared by the result modules.

Floats are rendered with repr(), the shortest digit string that round-trips,
so equal results always produce byte-identical files.
"""

from __future__ import annotations

import os


def format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_rows(path: str, header: list[str], rows: list, preamble: list | None = None) -> None:
    """Write a CSV; preamble lines are emitted first, prefixed with '# '."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    lines = [f"# {note}" for note in (preamble or [])]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_cell(c) for c in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_rows(path: str) -> tuple:
    """Inverse of write_rows: (preamble, header, rows) with cells as strings.

    Quoted cells are undone; numeric parsing is the caller's business.
    """
    preamble, header, rows = [], None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                preamble.append(line[1:].strip())
                continue
            cells = _split_csv_line(line)
            if header is None:
                header = cells
            else:
                rows.append(cells)
    return preamble, header or [], rows


def _split_csv_line(line: str) -> list:
    cells, cur, quoted = [], [], False
    i = 0
    while i < len(line):
        ch = line[i]
        if quoted:
            if ch == '"':
                if i + 1 < len(line) and line[i + 1] == '"':
                    cur.append('"')
                    i += 1
                else:
                    quoted = False
            else:
                cur.append(ch)
        elif ch == '"':
            quoted = True
        elif ch == ",":
            cells.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    cells.append("".join(cur))
    return cells
