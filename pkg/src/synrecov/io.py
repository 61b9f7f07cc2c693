"""CSV and SVG emission."""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np


class OutputError(OSError):
    """Writing an output file failed; ``path`` names the file."""

    def __init__(self, path, cause):
        super().__init__(f"cannot write {path}: {cause}")
        self.path = str(path)


def _cell(v):
    if v is None or v is np.ma.masked:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # repr is the shortest string that round-trips exactly
        return repr(float(v))
    return str(v)


def _column(c):
    if isinstance(c, np.ma.MaskedArray):
        return [None if m else v for v, m in zip(c.data.tolist(), np.ma.getmaskarray(c).tolist())]
    if isinstance(c, np.ndarray):
        return c.tolist()
    return list(c)


def csv_text(header, columns) -> str:
    """CSV text with a header row and one row per aligned column entry (LF line endings)."""
    header = list(header)
    cols = [_column(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("header and columns differ in length")
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns are not aligned")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(n):
        w.writerow([_cell(c[i]) for c in cols])
    return buf.getvalue()


def emit_csv(header, columns, path) -> Path:
    """Write aligned columns as CSV; floats round-trip exactly, masked entries are empty."""
    path = Path(path)
    text = csv_text(header, columns)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise OutputError(path, e) from e
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def emit_svg_plot(series, labels, path, title: str = "", xlabel: str = "t [s]",
                  ylabel: str = "") -> Path:
    """Static line plot of ``(x, y)`` pairs; identical input gives byte-identical SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = list(series)
    labels = list(labels)
    if not series:
        raise ValueError("need at least one series")
    if len(labels) != len(series):
        raise ValueError("one label per series")
    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "synrecov", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        for i, ((x, y), lab) in enumerate(zip(series, labels)):
            (line,) = ax.plot(np.asarray(x), np.ma.asarray(y), label=lab, lw=1.2)
            line.set_gid(f"series-{i}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise OutputError(path, e) from e
        finally:
            plt.close(fig)
    return path
