"""Dataset writers.  Floats are written with ``repr`` so reruns are byte-identical."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

CURVE_COLUMNS = ("P", "Pr", "dPr", "nP", "NP")
IPR_COLUMNS = ("regime", "P", "z_mm", "mean_IPR", "std_IPR", "w_eff", "n_trials")
FIT_COLUMNS = ("regime", "P", "nu", "intercept", "residual")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_jsonl(path, docs) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for d in docs:
            fh.write(json.dumps(d, sort_keys=True) + "\n")
    return path


def write_curve_csv(path, curve) -> Path:
    return write_csv(path, CURVE_COLUMNS,
                     [(p.P, p.Pr, p.dPr, p.nP, p.NP) for p in curve.points])


def write_grid_csv(path, grid) -> Path:
    return write_csv(path, [f"c{k}" for k in range(grid.shape[1])], grid.tolist())
