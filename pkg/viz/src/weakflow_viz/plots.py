"""Figure builders: flow-line bundles, true-vs-reconstructed fields, packets.

Figures are regenerated from data files only and rendered with a fixed
style and fixed PNG metadata, so the same input bytes give the same image
bytes.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import (SchemaError, field_to_grid, read_field, read_flowlines,
                 read_packet, rms_deviation)

PNG_METADATA = {"Software": "weakflow-viz"}
DPI = 110

KINDS = ("flowlines", "weakfield-compare", "packet")


@dataclass
class PlotSpec:
    """Parsed figure request: input paths, kind, axis ranges, output path."""

    kind: str
    out: str
    inputs: dict
    xlim: tuple | None = None
    zlim: tuple | None = None

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        kind = raw.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"unknown figure kind {kind!r}, expected one of {KINDS}")
        if "out" not in raw:
            raise SchemaError("plot spec needs an 'out' image path")
        inputs = {k: v for k, v in raw.items()
                  if k not in ("kind", "out", "xlim", "zlim")}
        base = Path(path).parent
        inputs = {k: str((base / v)) if not Path(v).is_absolute() else v
                  for k, v in inputs.items()}
        out = raw["out"]
        if not Path(out).is_absolute():
            out = str(base / out)
        lim = lambda key: tuple(raw[key]) if key in raw else None
        return cls(kind=kind, out=out, inputs=inputs,
                   xlim=lim("xlim"), zlim=lim("zlim"))


def _require(spec, key):
    if key not in spec.inputs:
        raise SchemaError(f"{spec.kind} figure needs an input path {key!r}")
    return spec.inputs[key]


def _save(fig, out):
    fig.savefig(out, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)


def plot_flowlines(spec):
    """Flow-line bundle over the weak-energy-density heatmap."""
    lines = read_flowlines(_require(spec, "flowlines"))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    if "field" in spec.inputs:
        cols = read_field(spec.inputs["field"])
        xs, zs, grid = field_to_grid(cols, "W")
        mesh = ax.pcolormesh(xs, zs, grid, cmap="magma", shading="nearest")
        fig.colorbar(mesh, ax=ax, label="weak energy density")
    for lid in lines.line_ids:
        ax.plot(lines.xs[lid], lines.zs[lid], color="#8ecae6", linewidth=0.8)
    ax.set_xlabel("x (waists)")
    ax.set_ylabel("z (waists)")
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.zlim:
        ax.set_ylim(*spec.zlim)
    _save(fig, spec.out)
    return {"n_lines": lines.n_lines}


def plot_weakfield_compare(spec):
    """True vs reconstructed Re k_w maps plus the recomputed line RMS."""
    cols_true = read_field(_require(spec, "field_true"))
    cols_recon = read_field(_require(spec, "field_recon"))
    true_lines = read_flowlines(_require(spec, "flowlines_true"))
    recon_lines = read_flowlines(_require(spec, "flowlines_recon"))
    rms = rms_deviation(true_lines, recon_lines)

    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.2), sharey=True)
    for ax, cols, title in ((axes[0], cols_true, "true Re k_w"),
                            (axes[1], cols_recon, "reconstructed Re k_w")):
        xs, zs, grid = field_to_grid(cols, "re_kw")
        mesh = ax.pcolormesh(xs, zs, grid, cmap="coolwarm", shading="nearest")
        fig.colorbar(mesh, ax=ax)
        ax.set_title(title)
        ax.set_xlabel("x (waists)")
        if spec.xlim:
            ax.set_xlim(*spec.xlim)
        if spec.zlim:
            ax.set_ylim(*spec.zlim)
    axes[0].set_ylabel("z (waists)")
    fig.suptitle(f"rms line deviation {rms:.6e}")
    _save(fig, spec.out)
    return {"rms_deviation": rms, "n_lines": true_lines.n_lines}


def plot_packet(spec):
    """Detection-probability profile of a photon wave packet."""
    xs, ps = read_packet(_require(spec, "packet"))
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    ax.plot(xs, ps, color="#023047", linewidth=1.2)
    ax.set_xlabel("position along the packet axis")
    ax.set_ylabel("detection probability density")
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    _save(fig, spec.out)
    return {"n_points": int(xs.size), "peak": float(xs[int(np.argmax(ps))])}


def plot(spec):
    """Render the figure described by ``spec``; returns summary statistics."""
    builder = {
        "flowlines": plot_flowlines,
        "weakfield-compare": plot_weakfield_compare,
        "packet": plot_packet,
    }[spec.kind]
    return builder(spec)
