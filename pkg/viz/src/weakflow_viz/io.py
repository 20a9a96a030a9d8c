"""Readers for the simulator's CSV / JSON-lines output files.

Validation is strict: a schema mismatch raises SchemaError naming the
offending column, and rendering code never mutates or reorders what was
read.
"""

import json
from dataclasses import dataclass

import numpy as np

CSV_HEADER = "line_id,z,x,weight,flag"
FIELD_KEYS = ("x", "z", "re_kw", "im_kw", "Sx_re", "Sx_im", "W", "Q",
              "I_R", "I_L", "I_H", "I_V", "masks")


class SchemaError(Exception):
    """An input file does not conform to the documented format."""


@dataclass
class FlowLineSet:
    """Flow lines keyed by line id, in file order."""

    line_ids: list
    zs: dict
    xs: dict
    weights: dict
    flags: dict

    @property
    def n_lines(self):
        return len(self.line_ids)


def read_flowlines(path):
    """Flow-line bundle from CSV (default) or JSON lines (by extension)."""
    if str(path).endswith(".jsonl"):
        return _read_flowlines_jsonl(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file, expected header {CSV_HEADER!r}")
    if lines[0] != CSV_HEADER:
        got = lines[0].split(",")
        expected = CSV_HEADER.split(",")
        for g, e in zip(got, expected):
            if g != e:
                raise SchemaError(f"{path}: bad column {g!r}, expected {e!r}")
        raise SchemaError(f"{path}: header has {len(got)} columns, expected "
                          f"{len(expected)}")
    out = FlowLineSet(line_ids=[], zs={}, xs={}, weights={}, flags={})
    for n, row in enumerate(lines[1:], start=2):
        parts = row.split(",")
        if len(parts) != 5:
            raise SchemaError(f"{path}:{n}: expected 5 columns, got {len(parts)}")
        try:
            lid = int(parts[0])
            z = float(parts[1])
            x = float(parts[2])
            w = float(parts[3])
        except ValueError as exc:
            raise SchemaError(f"{path}:{n}: {exc}")
        if lid not in out.zs:
            out.line_ids.append(lid)
            out.zs[lid] = []
            out.xs[lid] = []
            out.weights[lid] = w
            out.flags[lid] = parts[4]
        out.zs[lid].append(z)
        out.xs[lid].append(x)
    if not out.line_ids:
        raise SchemaError(f"{path}: no lines")
    for lid in out.line_ids:
        out.zs[lid] = np.asarray(out.zs[lid])
        out.xs[lid] = np.asarray(out.xs[lid])
    return out


def _read_flowlines_jsonl(path):
    out = FlowLineSet(line_ids=[], zs={}, xs={}, weights={}, flags={})
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{n}: invalid JSON: {exc}")
            for key in ("line_id", "z", "x", "weight", "flag"):
                if key not in row:
                    raise SchemaError(f"{path}:{n}: missing column {key!r}")
            lid = int(row["line_id"])
            if lid not in out.zs:
                out.line_ids.append(lid)
                out.zs[lid] = []
                out.xs[lid] = []
                out.weights[lid] = float(row["weight"])
                out.flags[lid] = row["flag"]
            out.zs[lid].append(float(row["z"]))
            out.xs[lid].append(float(row["x"]))
    if not out.line_ids:
        raise SchemaError(f"{path}: no lines")
    for lid in out.line_ids:
        out.zs[lid] = np.asarray(out.zs[lid])
        out.xs[lid] = np.asarray(out.xs[lid])
    return out


def read_field(path):
    """Field grid from JSON lines; returns column arrays plus the mask.

    Masked cells keep NaN values so downstream rendering shows gaps and
    never interpolates over them.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{n}: invalid JSON: {exc}")
            for key in FIELD_KEYS:
                if key not in row:
                    raise SchemaError(f"{path}:{n}: missing column {key!r}")
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no cells")
    cols = {}
    for key in FIELD_KEYS:
        if key == "masks":
            cols[key] = [row[key] for row in rows]
        else:
            cols[key] = np.array(
                [np.nan if row[key] is None else float(row[key]) for row in rows])
    return cols


def field_to_grid(cols, value_key):
    """Pivot field columns to (xs, zs, grid) with NaN at masked cells."""
    xs = np.unique(cols["x"])
    zs = np.unique(cols["z"])
    grid = np.full((zs.size, xs.size), np.nan)
    xi = np.searchsorted(xs, cols["x"])
    zi = np.searchsorted(zs, cols["z"])
    grid[zi, xi] = cols[value_key]
    return xs, zs, grid


def read_packet(path):
    xs, ps = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            for key in ("x", "p"):
                if key not in row:
                    raise SchemaError(f"{path}:{n}: missing column {key!r}")
            xs.append(float(row["x"]))
            ps.append(float(row["p"]))
    if not xs:
        raise SchemaError(f"{path}: no points")
    return np.asarray(xs), np.asarray(ps)


def rms_deviation(true_set, recon_set):
    """RMS transverse deviation between matching lines, in file order.

    Uses the same accumulation order as the simulator summary, so the two
    figures agree to rounding.
    """
    sq, n = 0.0, 0
    for lid in true_set.line_ids:
        if lid not in recon_set.xs:
            continue
        a = true_set.xs[lid]
        b = recon_set.xs[lid]
        m = min(a.size, b.size)
        d = a[:m] - b[:m]
        sq += float(np.sum(d * d))
        n += m
    if n == 0:
        raise SchemaError("no overlapping lines between the two bundles")
    return float(np.sqrt(sq / n))
