"""Rendering of run diagnostics to figures and raw field dumps.

Figures land next to the delimited diagnostics stream.  Field dumps are
flat little-endian 64-bit binaries in axis-major order with a JSON sidecar
carrying grid, time, name, and checksum.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def dump_field(directory, name, array, grid, t):
    arr = np.ascontiguousarray(array, dtype="<f8")
    raw = arr.tobytes(order="C")
    bin_path = os.path.join(directory, name + ".f64")
    with open(bin_path, "wb") as fh:
        fh.write(raw)
    sidecar = {
        "field": name,
        "time": t,
        "dtype": "<f8",
        "order": "C",
        "shape": list(arr.shape),
        "grid": {"dim": grid.dim, "cells": list(grid.cells),
                 "lengths": list(grid.lengths), "spacing": list(grid.spacing)},
        "checksum": hashlib.blake2b(raw, digest_size=8).hexdigest(),
    }
    with open(os.path.join(directory, name + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
    return bin_path


def load_field(directory, name):
    with open(os.path.join(directory, name + ".json")) as fh:
        sidecar = json.load(fh)
    with open(os.path.join(directory, name + ".f64"), "rb") as fh:
        raw = fh.read()
    if hashlib.blake2b(raw, digest_size=8).hexdigest() != sidecar["checksum"]:
        raise IOError("field dump %s failed its checksum" % name)
    return np.frombuffer(raw, dtype="<f8").reshape(sidecar["shape"]).copy(), sidecar


def render_run_figures(records, state, species, out_dir):
    """Diagnostics time-series panel plus (2D) final-field heatmaps."""
    if records:
        _render_timeseries(records, len(species), out_dir)
    if state.grid.dim == 2:
        _render_fields(state, species, out_dir)


def _render_timeseries(records, m, out_dir):
    t = np.array([r.t for r in records])
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))

    ax = axes[0, 0]
    V = np.array([r.V for r in records])
    ax.plot(t, V - V.min() + 1e-300, label="V - min V")
    ax.set_yscale("log")
    ax.set_title("free energy above minimum")
    ax.set_xlabel("t")

    ax = axes[0, 1]
    ax.plot(t, [max(r.Diss, 1e-300) for r in records], label="dissipation")
    ax.plot(t, [max(r.grad_u_sq, 1e-300) for r in records], label="|grad u|^2")
    ax.set_yscale("log")
    ax.set_title("dissipation channels")
    ax.legend(fontsize=8)

    ax = axes[0, 2]
    for i in range(m):
        m0 = records[0].mass[i]
        drift = [abs(r.mass[i] - m0) / max(abs(m0), 1e-300) for r in records]
        ax.plot(t, np.maximum(drift, 1e-18), label="species %d" % (i + 1))
    ax.set_yscale("log")
    ax.set_title("relative mass drift")
    ax.legend(fontsize=8)

    ax = axes[1, 0]
    for i in range(m):
        mv = [r.mu_var[i] if r.mu_var[i] is not None else np.nan for r in records]
        ax.plot(t, np.maximum(mv, 1e-300), label="species %d" % (i + 1))
    ax.set_yscale("log")
    ax.set_title("electrochemical-potential variance")
    ax.legend(fontsize=8)

    ax = axes[1, 1]
    ax.plot(t, [max(r.u_sq, 1e-300) for r in records], label="|u|^2")
    ax.plot(t, [r.U_T for r in records], label="U(T)")
    ax.set_yscale("log")
    ax.set_title("velocity")
    ax.legend(fontsize=8)

    ax = axes[1, 2]
    br = [abs(r.budget_residual) if r.budget_residual is not None else np.nan
          for r in records]
    ax.plot(t, br)
    ax.set_yscale("log")
    ax.set_title("|energy budget residual|")
    ax.set_xlabel("t")

    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "diagnostics.png"), dpi=130)
    plt.close(fig)


def _render_fields(state, species, out_dir):
    grid = state.grid
    n_panels = len(species) + 2
    fig, axes = plt.subplots(1, n_panels, figsize=(3.6 * n_panels, 3.4))
    extent = (0, grid.lengths[0], 0, grid.lengths[1])

    def show(ax, data, title):
        im = ax.imshow(data.T, origin="lower", extent=extent, aspect="auto")
        ax.set_title(title, fontsize=9)
        fig.colorbar(im, ax=ax, fraction=0.046)

    for i, c in enumerate(state.concentrations):
        show(axes[i], c.interior, "c%d" % (i + 1))
    show(axes[len(species)], state.potential.interior, "potential")
    show(axes[len(species) + 1], state.pressure.interior, "pressure")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "final_fields.png"), dpi=130)
    plt.close(fig)
