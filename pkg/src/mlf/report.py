"""Run reports and deterministic artifact emission (CSV, JSON, SVG, manifest).

Outputs are byte-identical across runs with the same config and seed: the
emitted report carries no wall-clock fields (runtimes are printed to stdout
only) and the SVG writer is hand-rolled.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    name: str
    status: str                  # "pass" | "fail" | "skipped"
    margin: float | None = None
    tolerance: float | None = None
    detail: str = ""
    runtime: float = 0.0         # stdout only; never serialized

    def line(self):
        m = "" if self.margin is None else f" margin={self.margin:.6g}"
        t = "" if self.tolerance is None else f" tol={self.tolerance:.6g}"
        d = f" [{self.detail}]" if self.detail else ""
        return f"{self.status.upper():7s} {self.name}{m}{t}{d} ({self.runtime:.2f}s)"


@dataclass
class RunReport:
    scenario: str
    command: str
    seed: int
    records: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    def add(self, rec: CheckRecord):
        if any(r.name == rec.name for r in self.records):
            raise ValueError(f"duplicate check record: {rec.name}")
        self.records.append(rec)

    def ok(self) -> bool:
        return all(r.status != "fail" for r in self.records)

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "command": self.command,
            "seed": self.seed,
            "checks": [
                {"name": r.name, "status": r.status, "margin": r.margin,
                 "tolerance": r.tolerance, "detail": r.detail}
                for r in self.records
            ],
            "artifacts": sorted(self.artifacts),
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def write_svg_curves(path, curve_sets, size=480, margin=40, title=""):
    """Minimal deterministic SVG: polylines with per-set colors and a legend.

    curve_sets: list of (label, color, points (N,2) array).
    """
    import numpy as np

    allpts = np.vstack([pts for _, _, pts in curve_sets if len(pts)])
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)

    def to_px(p):
        x = margin + (p[0] - lo[0]) / span[0] * (size - 2 * margin)
        y = size - margin - (p[1] - lo[1]) / span[1] * (size - 2 * margin)
        return x, y

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        lines.append(f'<text x="{margin}" y="{margin - 14}" font-size="13" '
                     f'font-family="monospace">{title}</text>')
    for i, (label, color, pts) in enumerate(curve_sets):
        path_d = " ".join(
            ("M" if j == 0 else "L") + f"{to_px(p)[0]:.2f},{to_px(p)[1]:.2f}"
            for j, p in enumerate(pts))
        lines.append(f'<path d="{path_d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = margin + 16 * i
        lines.append(f'<text x="{size - margin - 150}" y="{ly}" font-size="11" '
                     f'font-family="monospace" fill="{color}">{label}</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_outputs(report: RunReport, out_dir: str, tables=None, svgs=None):
    """Write report.json, tables, figures and a hashed manifest.

    tables: dict name -> (header, rows); svgs: dict name -> curve_sets.
    Returns the list of emitted paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, (header, rows) in (tables or {}).items():
        p = os.path.join(out_dir, f"{name}.csv")
        write_csv(p, header, rows)
        paths.append(p)
    for name, curve_sets in (svgs or {}).items():
        p = os.path.join(out_dir, f"{name}.svg")
        write_svg_curves(p, curve_sets, title=name)
        paths.append(p)
    report.artifacts = [os.path.basename(p) for p in paths]
    rp = os.path.join(out_dir, "report.json")
    with open(rp, "w") as fh:
        fh.write(report.to_json() + "\n")
    paths.append(rp)

    manifest = {}
    for p in sorted(paths):
        with open(p, "rb") as fh:
            manifest[os.path.basename(p)] = hashlib.sha256(fh.read()).hexdigest()
    mp = os.path.join(out_dir, "manifest.json")
    with open(mp, "w") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths + [mp]
