"""Configuration loading, strict validation, and field construction.

Configs are JSON trees with six blocks (grid, params, species, boundary,
run, output, checkpoint).  Validation is strict: unknown keys are rejected
by name at every level, defaults are filled in and echoed back, and the
physical admissibility rules (positive diffusivities, positive selective
wall levels, positive capacitance) are enforced before any allocation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fields import (AXIS_NAMES, BoundaryData, PhysicalParams, ScalarField,
                     SimState, SpeciesSpec, StaggeredVectorField, make_grid)

DEFAULTS = {
    "params": {"epsilon": 1.0, "K": 1.0, "nu": 1.0, "tau": 1.0, "fluid_model": "NPS"},
    "boundary": {"xi": {"generator": "constant", "value": 0.0}},
    "run": {"dt": "auto", "t_end": 1.0, "sample_every": 10, "seed": 0,
            "shadow_pair": False},
    "output": {"directory": "out", "formats": ["ndjson", "figures"]},
    "checkpoint": {"every_n_steps": 0, "path": None},
}


def _check_keys(block, allowed, context):
    for key in block:
        if key not in allowed:
            raise ConfigError("unknown key %r in %s (allowed: %s)"
                              % (key, context, ", ".join(sorted(allowed))))


def _number(block, key, context, positive=False, default=None):
    if key not in block:
        if default is None:
            raise ConfigError("missing key %r in %s" % (key, context))
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("%s.%s must be a number, got %r" % (context, key, v))
    if positive and v <= 0:
        raise ConfigError("%s.%s must be strictly positive, got %r" % (context, key, v))
    return float(v)


@dataclass
class SimConfig:
    """Validated configuration; `echo` is the fully defaulted tree."""

    echo: dict

    @property
    def grid_block(self):
        return self.echo["grid"]

    @property
    def run_block(self):
        return self.echo["run"]

    @property
    def output_block(self):
        return self.echo["output"]

    @property
    def checkpoint_block(self):
        return self.echo["checkpoint"]

    def build_grid(self):
        g = self.echo["grid"]
        return make_grid(g["dim"], g["cells"], g["lengths"])

    def build_params(self):
        p = self.echo["params"]
        return PhysicalParams(epsilon=p["epsilon"], K=p["K"], nu=p["nu"],
                              tau=p["tau"], fluid_model=p["fluid_model"])

    def build_species(self):
        specs = []
        for s in self.echo["species"]:
            specs.append(SpeciesSpec(valence=s["valence"], diffusivity=s["diffusivity"],
                                     bc=s["bc"], gamma=s.get("gamma"),
                                     initial_profile=s["initial"]))
        return specs

    def build_xi(self, grid):
        return build_xi(grid, self.echo["boundary"]["xi"])

    def initial_state(self, grid, species):
        concentrations = []
        for spec in species:
            f = ScalarField.zeros(grid)
            f.set_interior(evaluate_profile(grid, spec.initial_profile))
            concentrations.append(f)
        return SimState(
            grid=grid,
            concentrations=concentrations,
            potential=ScalarField.zeros(grid),
            velocity=StaggeredVectorField.zeros(grid),
            pressure=ScalarField.zeros(grid),
        )


def validate_config(tree):
    """Validate a raw config tree and return a SimConfig with defaults echoed."""
    if not isinstance(tree, dict):
        raise ConfigError("config root must be an object")
    _check_keys(tree, {"grid", "params", "species", "boundary", "run",
                       "output", "checkpoint"}, "config")
    if "grid" not in tree:
        raise ConfigError("missing required block 'grid'")
    if "species" not in tree or not tree["species"]:
        raise ConfigError("missing required block 'species' (need at least one)")

    grid = dict(tree["grid"])
    _check_keys(grid, {"dim", "cells", "lengths"}, "grid")
    for key in ("dim", "cells", "lengths"):
        if key not in grid:
            raise ConfigError("missing key %r in grid" % key)
    dim = grid["dim"]
    if dim not in (2, 3):
        raise ConfigError("grid.dim must be 2 or 3")
    if len(grid["cells"]) != dim or len(grid["lengths"]) != dim:
        raise ConfigError("grid.cells and grid.lengths must have dim entries")
    echo_grid = {"dim": dim, "cells": [int(n) for n in grid["cells"]],
                 "lengths": [float(x) for x in grid["lengths"]]}
    if any(n < 2 for n in echo_grid["cells"]):
        raise ConfigError("grid.cells entries must be >= 2")
    if any(x <= 0 for x in echo_grid["lengths"]):
        raise ConfigError("grid.lengths entries must be positive")

    params = dict(DEFAULTS["params"])
    params.update(tree.get("params", {}))
    _check_keys(params, set(DEFAULTS["params"]), "params")
    for key in ("epsilon", "K", "nu"):
        _number(params, key, "params", positive=True)
    if not isinstance(params["tau"], (int, float)) or isinstance(params["tau"], bool) \
            or params["tau"] <= 0:
        raise ConfigError("params.tau must be > 0: the Robin potential closure "
                          "is only positive definite for positive capacitance")
    if params["fluid_model"] not in ("NPNS", "NPS", "Frozen"):
        raise ConfigError("params.fluid_model must be one of NPNS, NPS, Frozen")
    echo_params = {k: (params[k] if k == "fluid_model" else float(params[k]))
                   for k in DEFAULTS["params"]}

    echo_species = []
    for i, raw in enumerate(tree["species"]):
        ctx = "species[%d]" % i
        s = dict(raw)
        _check_keys(s, {"valence", "diffusivity", "bc", "gamma", "initial"}, ctx)
        valence = _number(s, "valence", ctx)
        diffusivity = _number(s, "diffusivity", ctx)
        if diffusivity <= 0:
            raise ConfigError("%s.diffusivity must be > 0" % ctx)
        bc = s.get("bc", "blocking")
        if bc not in ("blocking", "dirichlet"):
            raise ConfigError("%s.bc must be 'blocking' or 'dirichlet'" % ctx)
        gamma = None
        if bc == "dirichlet":
            gamma = _number(s, "gamma", ctx, default=None)
            if gamma is None or gamma <= 0:
                raise ConfigError("%s.gamma must be > 0 for a selective wall: a "
                                  "membrane maintains a positive fixed concentration" % ctx)
        elif "gamma" in s:
            raise ConfigError("%s.gamma only applies to bc='dirichlet'" % ctx)
        initial = validate_profile(s.get("initial", {"profile": "uniform", "value": 1.0}),
                                   ctx + ".initial", dim)
        entry = {"valence": valence, "diffusivity": diffusivity, "bc": bc,
                 "initial": initial}
        if gamma is not None:
            entry["gamma"] = gamma
        echo_species.append(entry)

    boundary = dict(tree.get("boundary", {}))
    _check_keys(boundary, {"xi"}, "boundary")
    xi = validate_xi(boundary.get("xi", DEFAULTS["boundary"]["xi"]), dim)

    run = dict(DEFAULTS["run"])
    run.update(tree.get("run", {}))
    _check_keys(run, set(DEFAULTS["run"]), "run")
    if run["dt"] != "auto":
        if not isinstance(run["dt"], (int, float)) or run["dt"] <= 0:
            raise ConfigError("run.dt must be 'auto' or a positive number")
        run["dt"] = float(run["dt"])
    run["t_end"] = _number(run, "t_end", "run", positive=True)
    if not isinstance(run["sample_every"], int) or run["sample_every"] < 1:
        raise ConfigError("run.sample_every must be a positive integer")
    if not isinstance(run["seed"], int):
        raise ConfigError("run.seed must be an integer")
    if not isinstance(run["shadow_pair"], bool):
        raise ConfigError("run.shadow_pair must be a boolean")

    output = dict(DEFAULTS["output"])
    output.update(tree.get("output", {}))
    _check_keys(output, set(DEFAULTS["output"]), "output")
    if not isinstance(output["directory"], str):
        raise ConfigError("output.directory must be a string")
    fmts = output["formats"]
    if not isinstance(fmts, list) or any(f not in ("ndjson", "figures", "fields")
                                         for f in fmts):
        raise ConfigError("output.formats entries must be among ndjson, figures, fields")

    checkpoint = dict(DEFAULTS["checkpoint"])
    checkpoint.update(tree.get("checkpoint", {}))
    _check_keys(checkpoint, set(DEFAULTS["checkpoint"]), "checkpoint")
    if not isinstance(checkpoint["every_n_steps"], int) or checkpoint["every_n_steps"] < 0:
        raise ConfigError("checkpoint.every_n_steps must be a nonnegative integer")

    echo = {
        "grid": echo_grid,
        "params": echo_params,
        "species": echo_species,
        "boundary": {"xi": xi},
        "run": run,
        "output": output,
        "checkpoint": checkpoint,
    }
    cfg = SimConfig(echo=echo)
    if run["shadow_pair"]:
        _check_pair_hypothesis(echo_species)
    return cfg


def _check_pair_hypothesis(echo_species):
    Ds = {s["diffusivity"] for s in echo_species}
    zs = {abs(s["valence"]) for s in echo_species}
    if len(Ds) != 1 or len(zs) != 1:
        raise ConfigError("run.shadow_pair requires equal diffusivities and "
                          "equal |valences| across all species")
    if any(s["bc"] != "blocking" for s in echo_species):
        raise ConfigError("run.shadow_pair requires blocking walls for all species")


def validate_profile(raw, context, dim):
    if not isinstance(raw, dict) or "profile" not in raw:
        raise ConfigError("%s must be an object with a 'profile' key" % context)
    p = dict(raw)
    kind = p["profile"]
    if kind == "uniform":
        _check_keys(p, {"profile", "value"}, context)
        value = _number(p, "value", context, positive=True, default=1.0)
        return {"profile": "uniform", "value": value}
    if kind == "gaussian":
        _check_keys(p, {"profile", "background", "amplitude", "center", "width"}, context)
        background = _number(p, "background", context, positive=True, default=1.0)
        amplitude = _number(p, "amplitude", context, default=0.5)
        width = _number(p, "width", context, positive=True, default=0.1)
        center = p.get("center", [0.5] * dim)
        if len(center) != dim:
            raise ConfigError("%s.center must have dim entries" % context)
        if background + min(0.0, amplitude) <= 0:
            raise ConfigError("%s: gaussian must stay strictly positive" % context)
        return {"profile": "gaussian", "background": background,
                "amplitude": amplitude, "center": [float(c) for c in center],
                "width": width}
    if kind == "checkerboard":
        _check_keys(p, {"profile", "background", "amplitude"}, context)
        background = _number(p, "background", context, positive=True, default=1.0)
        amplitude = _number(p, "amplitude", context, default=0.1)
        if abs(amplitude) >= background:
            raise ConfigError("%s: checkerboard amplitude must be below the "
                              "background to keep the profile positive" % context)
        return {"profile": "checkerboard", "background": background,
                "amplitude": amplitude}
    raise ConfigError("%s: unknown profile %r (use uniform, gaussian, "
                      "checkerboard)" % (context, kind))


def evaluate_profile(grid, profile):
    kind = profile["profile"]
    if kind == "uniform":
        return np.full(grid.interior_shape, profile["value"])
    if kind == "gaussian":
        w2 = 2.0 * profile["width"] ** 2
        r2 = np.zeros(grid.interior_shape)
        for a in range(grid.dim):
            x = grid.centers_broadcast(a)
            r2 = r2 + (x - profile["center"][a]) ** 2
        return profile["background"] + profile["amplitude"] * np.exp(-r2 / w2)
    if kind == "checkerboard":
        parity = np.zeros(grid.interior_shape)
        for a in range(grid.dim):
            shape = [1] * grid.dim
            shape[a] = grid.cells[a]
            parity = parity + np.arange(grid.cells[a]).reshape(shape)
        return profile["background"] + profile["amplitude"] * np.where(parity % 2 == 0, 1.0, -1.0)
    raise ConfigError("unknown profile %r" % (kind,))


def validate_xi(raw, dim):
    if not isinstance(raw, dict) or "generator" not in raw:
        raise ConfigError("boundary.xi must be an object with a 'generator' key")
    x = dict(raw)
    gen = x["generator"]
    ctx = "boundary.xi"
    if gen == "constant":
        _check_keys(x, {"generator", "value"}, ctx)
        return {"generator": "constant", "value": _number(x, "value", ctx, default=0.0)}
    if gen == "linear":
        _check_keys(x, {"generator", "axis", "slope", "offset"}, ctx)
        axis = x.get("axis", 0)
        if axis not in range(dim):
            raise ConfigError("%s.axis must index a grid axis" % ctx)
        return {"generator": "linear", "axis": axis,
                "slope": _number(x, "slope", ctx, default=1.0),
                "offset": _number(x, "offset", ctx, default=0.0)}
    if gen == "sinusoidal":
        _check_keys(x, {"generator", "axis", "amplitude", "mode", "offset"}, ctx)
        axis = x.get("axis", 0)
        if axis not in range(dim):
            raise ConfigError("%s.axis must index a grid axis" % ctx)
        mode = x.get("mode", 1)
        if not isinstance(mode, int) or mode < 1:
            raise ConfigError("%s.mode must be a positive integer" % ctx)
        return {"generator": "sinusoidal", "axis": axis, "mode": mode,
                "amplitude": _number(x, "amplitude", ctx, default=1.0),
                "offset": _number(x, "offset", ctx, default=0.0)}
    if gen == "table":
        _check_keys(x, {"generator", "path"}, ctx)
        if not isinstance(x.get("path"), str):
            raise ConfigError("%s.path must be a file path string" % ctx)
        return {"generator": "table", "path": x["path"]}
    raise ConfigError("%s: unknown generator %r (use constant, linear, "
                      "sinusoidal, table)" % (ctx, gen))


def build_xi(grid, xi_spec):
    gen = xi_spec["generator"]
    if gen == "constant":
        return BoundaryData.constant(grid, xi_spec["value"])
    if gen == "linear":
        axis, slope, offset = xi_spec["axis"], xi_spec["slope"], xi_spec["offset"]

        def fn(*coords):
            return offset + slope * coords[axis]

        return BoundaryData.from_function(grid, fn)
    if gen == "sinusoidal":
        axis, mode = xi_spec["axis"], xi_spec["mode"]
        amp, offset = xi_spec["amplitude"], xi_spec["offset"]
        L = grid.lengths[axis]

        def fn(*coords):
            return offset + amp * np.sin(2.0 * math.pi * mode * coords[axis] / L)

        return BoundaryData.from_function(grid, fn)
    if gen == "table":
        with open(xi_spec["path"]) as fh:
            table = json.load(fh)
        values = {}
        for axis, side in grid.boundary_slabs():
            key = AXIS_NAMES[axis] + ("-" if side == 0 else "+")
            if key not in table:
                raise ConfigError("xi table missing boundary %r" % key)
            arr = np.asarray(table[key], dtype=float)
            if arr.shape != grid.slab_shape(axis):
                raise ConfigError("xi table entry %r has shape %r, expected %r"
                                  % (key, arr.shape, grid.slab_shape(axis)))
            values[(axis, side)] = arr
        return BoundaryData(grid, values)
    raise ConfigError("unknown xi generator %r" % (gen,))


def load_config(path):
    """Read and validate a config file; parse errors carry line and column."""
    try:
        with open(path) as fh:
            tree = json.load(fh)
    except OSError as e:
        raise ConfigError("cannot read config %s: %s" % (path, e)) from e
    except json.JSONDecodeError as e:
        raise ConfigError("config parse error at %s:%d:%d: %s"
                          % (path, e.lineno, e.colno, e.msg)) from e
    return validate_config(tree)
