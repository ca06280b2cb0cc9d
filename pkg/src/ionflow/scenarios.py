"""Built-in scenario library: named, fully validated configurations."""

from __future__ import annotations

import copy

from .config import SimConfig, validate_config
from .errors import ConfigError

_LIBRARY = {
    # Two oppositely charged blocking species relaxing to the uniform
    # equilibrium under Stokes coupling; masses balance so the terminal state
    # is electroneutral with vanishing velocity.
    "two_species_relaxation": {
        "grid": {"dim": 2, "cells": [32, 32], "lengths": [1.0, 1.0]},
        "params": {"epsilon": 1.0, "K": 0.25, "nu": 1.0, "tau": 1.0,
                   "fluid_model": "NPS"},
        "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.5, "center": [0.35, 0.5], "width": 0.12}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.5, "center": [0.65, 0.5], "width": 0.12}},
        ],
        "boundary": {"xi": {"generator": "constant", "value": 0.0}},
        "run": {"dt": "auto", "t_end": 2.0, "sample_every": 10, "seed": 0},
        "output": {"directory": "out/two_species_relaxation",
                   "formats": ["ndjson", "figures"]},
    },
    # Three species with equal diffusivities and equal |valence|; the paired
    # charge/total-concentration shadow run is enabled so the reduction is
    # monitored live.
    "equal_diffusivity_m3": {
        "grid": {"dim": 2, "cells": [16, 16], "lengths": [1.0, 1.0]},
        "params": {"epsilon": 1.0, "K": 0.25, "nu": 1.0, "tau": 1.0,
                   "fluid_model": "NPS"},
        "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.4, "center": [0.3, 0.3], "width": 0.15}},
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.4, "center": [0.7, 0.4], "width": 0.15}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 2.0,
                         "amplitude": 0.8, "center": [0.5, 0.7], "width": 0.15}},
        ],
        "boundary": {"xi": {"generator": "constant", "value": 0.0}},
        "run": {"dt": "auto", "t_end": 0.25, "sample_every": 10, "seed": 0,
                "shadow_pair": True},
        "output": {"directory": "out/equal_diffusivity_m3",
                   "formats": ["ndjson", "figures"]},
    },
    # Cation held at the walls by a selective membrane, trace anion blocked:
    # the anion inventory is one thousandth of the cation's.
    "mixed_small_anion": {
        "grid": {"dim": 2, "cells": [32, 32], "lengths": [1.0, 1.0]},
        "params": {"epsilon": 1.0, "K": 0.25, "nu": 1.0, "tau": 1.0,
                   "fluid_model": "NPS"},
        "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "dirichlet", "gamma": 1.0,
             "initial": {"profile": "uniform", "value": 1.0}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "uniform", "value": 0.001}},
        ],
        "boundary": {"xi": {"generator": "constant", "value": 0.0}},
        # horizon reaches the mixed steady state, so the second-half norm
        # sups witness boundedness rather than the initial transient
        "run": {"dt": "auto", "t_end": 2.0, "sample_every": 10, "seed": 0},
        "output": {"directory": "out/mixed_small_anion",
                   "formats": ["ndjson", "figures"]},
    },
    # Nonconstant applied potential with a unit voltage drop across the box,
    # full momentum equation so electroconvective forcing is exercised.
    "applied_voltage": {
        "grid": {"dim": 2, "cells": [32, 32], "lengths": [1.0, 1.0]},
        "params": {"epsilon": 0.5, "K": 0.5, "nu": 1.0, "tau": 1.0,
                   "fluid_model": "NPNS"},
        "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "uniform", "value": 1.0}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "uniform", "value": 1.0}},
        ],
        "boundary": {"xi": {"generator": "linear", "axis": 0, "slope": 1.0,
                            "offset": -0.5}},
        "run": {"dt": "auto", "t_end": 0.5, "sample_every": 10, "seed": 0},
        "output": {"directory": "out/applied_voltage",
                   "formats": ["ndjson", "figures"]},
    },
}


def scenario_names():
    return sorted(_LIBRARY)


def scenario(name):
    """Return the named scenario as a validated SimConfig."""
    if name not in _LIBRARY:
        raise ConfigError("unknown scenario %r; available: %s"
                          % (name, ", ".join(scenario_names())))
    return validate_config(copy.deepcopy(_LIBRARY[name]))


def scenario_with(name, **overrides):
    """Scenario with shallow block overrides merged in (tests and studies)."""
    tree = copy.deepcopy(_LIBRARY[name]) if name in _LIBRARY else None
    if tree is None:
        raise ConfigError("unknown scenario %r; available: %s"
                          % (name, ", ".join(scenario_names())))
    for block, value in overrides.items():
        if isinstance(value, dict) and isinstance(tree.get(block), dict):
            tree[block].update(value)
        else:
            tree[block] = value
    return validate_config(tree)
