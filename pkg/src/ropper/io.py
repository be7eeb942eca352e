"""CSV input/output with provenance headers, and a small SVG line chart."""

from __future__ import annotations

import csv
import hashlib
import math
import os
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .errors import InputError
from .model import Dataset

REQUIRED = ("id", "y", "sigma")


def format_value(x) -> str:
    """17 significant digits for floats (round-trip exact); plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def provenance_lines(config_text: str, seed, input_hash: str) -> list:
    lines = [f"# ropper {__version__}", f"# seed={seed}", f"# input_sha256={input_hash}"]
    lines += [f"#config {line}" for line in config_text.splitlines()]
    return lines


def write_csv(path: str, header, rows, provenance=()) -> None:
    """Comma-separated, UTF-8, LF line endings, '#' provenance lines on top."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in provenance:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def read_csv(path: str):
    """``(header, rows)`` with '#' lines skipped."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise InputError(f"{path}: no header row")
    return rows[0], rows[1:]


def read_input_table(path: str, intercept: bool = False) -> Dataset:
    """Unit table with columns ``id, y, sigma[, n]`` plus covariates.

    Every other column is a covariate, in file order. With ``intercept`` a
    column of ones named ``intercept`` is prepended.
    """
    header, body = read_csv(path)
    header = [h.strip() for h in header]
    for col in REQUIRED:
        if col not in header:
            raise InputError(f"{path}: missing required column {col!r}")
    dup = {h for h in header if header.count(h) > 1}
    if dup:
        raise InputError(f"{path}: duplicate column(s) {sorted(dup)}")
    idx = {h: i for i, h in enumerate(header)}
    cov = [h for h in header if h not in REQUIRED and h != "n"]
    if not body:
        raise InputError(f"{path}: no data rows")

    def num(r, row, col):
        line = r + 2  # 1-based, after the header
        try:
            cell = row[idx[col]].strip()
        except IndexError:
            raise InputError(f"{path}: row {line}: missing value in column {col!r}") from None
        if cell == "":
            raise InputError(f"{path}: row {line}, column {col!r}: missing value")
        try:
            val = float(cell)
        except ValueError:
            raise InputError(f"{path}: row {line}, column {col!r}: not a number: {cell!r}") from None
        if not math.isfinite(val):
            raise InputError(f"{path}: row {line}, column {col!r}: non-finite value {cell!r}")
        return val

    ids, y, s, n, X = [], [], [], [], []
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r + 2} has {len(row)} fields, expected {len(header)}")
        ids.append(row[idx["id"]].strip())
        y.append(num(r, row, "y"))
        s.append(num(r, row, "sigma"))
        if "n" in idx:
            n.append(num(r, row, "n"))
        X.append([num(r, row, c) for c in cov])
    X = np.asarray(X, dtype=float).reshape(len(body), len(cov))
    data = Dataset(np.array(y), np.array(s), X, ids=ids,
                   n=np.array(n) if n else None, columns=cov)
    if intercept:
        data = data.with_intercept()
    if data.p < 1:
        raise InputError(f"{path}: no covariate columns; add covariates or use --intercept")
    return data


def svg_line_chart(path: str, x, series: dict, xlabel: str = "", ylabel: str = "",
                   title: str = "", width: int = 640, height: int = 420) -> None:
    """Static SVG with axes, one polyline per series and a legend."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    allv = np.concatenate([v[np.isfinite(v)] for v in ys.values()]) if ys else np.array([0.0])
    y0, y1 = (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)
    if y1 == y0:
        y0, y1 = y0 - 0.5 * abs(y0 or 1.0), y1 + 0.5 * abs(y1 or 1.0)
    x0, x1 = float(x.min()), float(x.max())
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    ml, mr, mt, mb = 70, 170, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (1.0 - (v - y0) / (y1 - y0)) * ph

    colors = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for t in np.linspace(x0, x1, 5):
        out.append(f'<line x1="{px(t):.1f}" y1="{mt + ph}" x2="{px(t):.1f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.1f}" y="{mt + ph + 18}" text-anchor="middle" font-size="11">{t:.3g}</text>')
    for t in np.linspace(y0, y1, 5):
        out.append(f'<line x1="{ml - 5}" y1="{py(t):.1f}" x2="{ml}" y2="{py(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(t) + 4:.1f}" text-anchor="end" font-size="11">{t:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="13" '
               f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    order = np.argsort(x, kind="stable")
    for i, (name, v) in enumerate(ys.items()):
        c = colors[i % len(colors)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[order], v[order]) if np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{pts}"/>')
        for a, b in zip(x[order], v[order]):
            if np.isfinite(b):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{c}"/>')
        ly = mt + 10 + 18 * i
        out.append(f'<line x1="{ml + pw + 15}" y1="{ly}" x2="{ml + pw + 35}" y2="{ly}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 40}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(out) + "\n")
