"""CSV/JSON/SVG artifact writing, reading and checksum manifests."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

MANIFEST = "manifest.json"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Write rows with shortest round-trip float formatting (deterministic, lossless)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; numeric cells come back as int/float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse(c) for c in row] for row in reader]
    return header, rows


def _parse(cell: str):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir, config: dict, seed, artifacts) -> Path:
    out_dir = Path(out_dir)
    entries = {Path(a).name: sha256_file(a) for a in sorted(map(str, artifacts))}
    return write_json(
        out_dir / MANIFEST,
        {"config": config, "config_sha256": config_hash(config), "seed": seed, "artifacts": entries},
    )


def verify_manifest(out_dir):
    """Return the list of artifacts whose checksum no longer matches (missing files included)."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / MANIFEST).read_text(encoding="utf-8"))
    bad = []
    for name, digest in manifest["artifacts"].items():
        f = out_dir / name
        if not f.exists() or sha256_file(f) != digest:
            bad.append(name)
    if config_hash(manifest["config"]) != manifest["config_sha256"]:
        bad.append(MANIFEST)
    return bad


_COLORS = ["#000000", "#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"]


def line_chart(path, x, series: dict, title: str = "", width: int = 640, height: int = 400) -> Path:
    """Minimal SVG polyline chart with axes and a legend."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    pad = 50
    x0, x1 = float(x.min()), float(x.max())
    lo = min(float(np.nanmin(v)) for v in ys.values())
    hi = max(float(np.nanmax(v)) for v in ys.values())
    if hi == lo:
        hi, lo = hi + 0.5, lo - 0.5
    if x1 == x0:
        x1 = x0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{x0:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{pad - 5}" y="{height - pad}" font-size="10" text-anchor="end">{lo:.3g}</text>',
        f'<text x="{pad - 5}" y="{pad + 5}" font-size="10" text-anchor="end">{hi:.3g}</text>',
    ]
    for i, (name, y) in enumerate(ys.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{width - pad + 5}" y="{pad + 14 * i}" font-size="10" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
