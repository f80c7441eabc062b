"""Deterministic file outputs: table CSVs, raw values, manifests, plot scripts.

Every CSV starts with a comment line carrying the schema version and the
config hash, so each number can be traced to the configuration that made it.
Nothing time- or host-dependent is written into these files.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from . import __version__
from .equilibrium import TABLE_COLUMNS

TABLE_SCHEMA = "rdgrowth.table.v1"
RAW_SCHEMA = "rdgrowth.raw.v1"


def header(schema: str, config_hash: str, extra: str = "") -> str:
    tail = f" {extra}" if extra else ""
    return f"schema={schema} config_sha256={config_hash}{tail}"


def write_table(path: Path, rows: list[tuple[str, dict]], config_hash: str) -> None:
    """Rows of the canonical 14 columns, percent with two decimals."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header(TABLE_SCHEMA, config_hash)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", *TABLE_COLUMNS])
        for label, row in rows:
            w.writerow([label, *(f"{row[c]:.2f}" for c in TABLE_COLUMNS)])


def write_raw(path: Path, rows: list[tuple[str, dict]], config_hash: str) -> None:
    """Same rows at full precision (``repr`` of the float, round-trip exact)."""
    keys = sorted({k for _, r in rows for k in r})
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header(RAW_SCHEMA, config_hash)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", *keys])
        for label, row in rows:
            w.writerow([label, *(repr(float(row[k])) if k in row else "" for k in keys)])


def write_records(path: Path, fieldnames: list[str], records, config_hash: str,
                  schema: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header(schema, config_hash)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for rec in records:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in rec])


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, spec, command: str, files: list[Path]) -> Path:
    """Manifest of a run: config hash, seed, version and output digests.

    Wall-clock timings go to ``timings.json`` so that the manifest itself is
    reproducible byte for byte.
    """
    man = {
        "command": command,
        "config_sha256": spec.config_hash(),
        "seed": spec.seed,
        "tool": "rdgrowth",
        "version": __version__,
        "files": {Path(f).name: file_sha256(f) for f in sorted(files)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return path


def write_timings(out: Path, timings: dict) -> Path:
    path = out / "timings.json"
    path.write_text(json.dumps({k: round(v, 3) for k, v in timings.items()}, indent=2) + "\n")
    return path


PLOT_SCRIPT = '''"""Plot stationary productivity distributions written by rdgrowth.

Usage: python plot_distributions.py distribution.csv [thresholds.csv]
Shaded regions mark relative productivities below each type's exit
threshold, i.e. the unprofitable share of product lines.
"""
import csv
import sys

import matplotlib.pyplot as plt


def read(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    head, body = rows[0], rows[1:]
    return {h: [float(r[i]) for r in body] for i, h in enumerate(head)}


def main(dist_path, thr_path=None):
    d = read(dist_path)
    thr = read(thr_path) if thr_path else None
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    q = d["q_hat"]
    axes[0].plot(q, d["F"], color="k", label="all goods")
    for col, lab, c in (("F_al", "applied-low", "C0"), ("F_ah", "applied-high", "C1"),
                        ("F_b", "basic", "C2")):
        axes[0].plot(q, d[col], color=c, label=lab)
        axes[1].plot(q, d[col], color=c, label=lab)
    if thr:
        for col, c in (("q_al_min", "C0"), ("q_ah_min", "C1"), ("q_b_min", "C2")):
            for ax in axes:
                ax.axvspan(0, thr[col][0], color=c, alpha=0.08)
    axes[0].set_xlim(0, max(q) / 3)
    axes[1].set_xlim(0, max(q) / 3)
    axes[1].set_yscale("log")
    axes[1].set_ylim(1e-5, 1)
    for ax in axes:
        ax.set_xlabel("relative productivity")
        ax.legend()
    axes[0].set_ylabel("cumulative mass")
    fig.tight_layout()
    fig.savefig(dist_path.rsplit(".", 1)[0] + ".png", dpi=150)


if __name__ == "__main__":
    main(*sys.argv[1:3])
'''


def write_plot_script(out: Path) -> Path:
    path = out / "plot_distributions.py"
    path.write_text(PLOT_SCRIPT)
    return path
