import json

import numpy as np
import pytest

import ionflow as io
from ionflow.config import build_xi, evaluate_profile
from ionflow.errors import ConfigError


MINIMAL = {
    "grid": {"dim": 2, "cells": [8, 8], "lengths": [1.0, 1.0]},
    "species": [
        {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
         "initial": {"profile": "uniform", "value": 1.0}},
        {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
         "initial": {"profile": "uniform", "value": 1.0}},
    ],
}


def test_minimal_config_defaults():
    cfg = io.validate_config(MINIMAL)
    assert cfg.echo["params"]["fluid_model"] == "NPS"
    assert cfg.echo["run"]["dt"] == "auto"
    assert cfg.echo["run"]["sample_every"] == 10
    assert cfg.echo["boundary"]["xi"] == {"generator": "constant", "value": 0.0}
    assert cfg.echo["checkpoint"]["every_n_steps"] == 0


def test_unknown_key_rejected_by_name():
    bad = json.loads(json.dumps(MINIMAL))
    bad["params"] = {"viscocity": 1.0}
    with pytest.raises(ConfigError) as err:
        io.validate_config(bad)
    assert "viscocity" in str(err.value)


def test_tau_zero_rejected_with_reason():
    bad = json.loads(json.dumps(MINIMAL))
    bad["params"] = {"tau": 0.0}
    with pytest.raises(ConfigError) as err:
        io.validate_config(bad)
    assert "tau" in str(err.value)
    assert "positive" in str(err.value) or "definite" in str(err.value)


def test_gamma_and_diffusivity_validation():
    bad = json.loads(json.dumps(MINIMAL))
    bad["species"][0] = {"valence": 1.0, "diffusivity": 1.0, "bc": "dirichlet",
                         "gamma": -1.0, "initial": {"profile": "uniform", "value": 1.0}}
    with pytest.raises(ConfigError) as err:
        io.validate_config(bad)
    assert "gamma" in str(err.value)
    bad = json.loads(json.dumps(MINIMAL))
    bad["species"][0]["diffusivity"] = 0.0
    with pytest.raises(ConfigError):
        io.validate_config(bad)


def test_gamma_on_blocking_rejected():
    bad = json.loads(json.dumps(MINIMAL))
    bad["species"][0]["gamma"] = 1.0
    with pytest.raises(ConfigError):
        io.validate_config(bad)


def test_load_config_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "grid": {,}\n}\n')
    with pytest.raises(ConfigError) as err:
        io.load_config(str(path))
    msg = str(err.value)
    assert ":2:" in msg       # line number of the syntax error


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "ok.json"
    path.write_text(json.dumps(MINIMAL))
    cfg = io.load_config(str(path))
    assert cfg.echo["grid"]["cells"] == [8, 8]


def test_profiles_evaluate():
    g = io.make_grid(2, (8, 8), (1.0, 1.0))
    u = evaluate_profile(g, {"profile": "uniform", "value": 2.0})
    assert np.all(u == 2.0)
    gz = evaluate_profile(g, {"profile": "gaussian", "background": 1.0,
                              "amplitude": 0.5, "center": [0.5, 0.5], "width": 0.1})
    assert gz.max() <= 1.5 + 1e-12
    assert gz.min() >= 1.0
    cb = evaluate_profile(g, {"profile": "checkerboard", "background": 1.0,
                              "amplitude": 0.25})
    assert set(np.round(np.unique(cb), 12)) == {0.75, 1.25}
    assert np.all(cb > 0)


def test_profile_validation():
    with pytest.raises(ConfigError):
        io.validate_config({**MINIMAL, "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "checkerboard", "background": 1.0,
                         "amplitude": 2.0}}]})
    with pytest.raises(ConfigError):
        io.validate_config({**MINIMAL, "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "vortex"}}]})


def test_xi_generators():
    g = io.make_grid(2, (4, 4), (1.0, 2.0))
    const = build_xi(g, {"generator": "constant", "value": 0.7})
    assert np.all(const[(0, 0)] == 0.7)
    lin = build_xi(g, {"generator": "linear", "axis": 0, "slope": 2.0, "offset": -1.0})
    # on the x- wall, the x coordinate is 0; on x+, it is 1
    assert np.all(lin[(0, 0)] == -1.0)
    assert np.all(lin[(0, 1)] == 1.0)
    # on the y walls, xi varies with the x cell centers
    assert np.allclose(lin[(1, 0)], -1.0 + 2.0 * g.centers(0))
    sin = build_xi(g, {"generator": "sinusoidal", "axis": 1, "amplitude": 1.0,
                       "mode": 1, "offset": 0.0})
    assert np.allclose(sin[(0, 0)], np.sin(2 * np.pi * g.centers(1) / 2.0))


def test_xi_table(tmp_path):
    g = io.make_grid(2, (3, 2), (1.0, 1.0))
    table = {
        "x-": np.full(g.slab_shape(0), 1.0).tolist(),
        "x+": np.full(g.slab_shape(0), 2.0).tolist(),
        "y-": np.full(g.slab_shape(1), 3.0).tolist(),
        "y+": np.full(g.slab_shape(1), 4.0).tolist(),
    }
    path = tmp_path / "xi.json"
    path.write_text(json.dumps(table))
    xi = build_xi(g, {"generator": "table", "path": str(path)})
    assert np.all(xi[(0, 1)] == 2.0)
    assert np.all(xi[(1, 0)] == 3.0)
    # wrong shape rejected
    table["y+"] = [[1.0, 2.0], [3.0, 4.0]]
    path.write_text(json.dumps(table))
    with pytest.raises(ConfigError):
        build_xi(g, {"generator": "table", "path": str(path)})


def test_shadow_pair_hypothesis_checked():
    bad = json.loads(json.dumps(MINIMAL))
    bad["species"][1]["diffusivity"] = 2.0
    bad["run"] = {"shadow_pair": True}
    with pytest.raises(ConfigError):
        io.validate_config(bad)


def test_scenarios_all_validate():
    for name in io.scenario_names():
        cfg = io.scenario(name)
        assert cfg.echo["grid"]["dim"] == 2


def test_scenario_library_contents():
    two = io.scenario("two_species_relaxation")
    assert [s["bc"] for s in two.echo["species"]] == ["blocking", "blocking"]
    assert two.echo["params"]["fluid_model"] == "NPS"
    assert two.echo["boundary"]["xi"] == {"generator": "constant", "value": 0.0}
    assert [s["initial"]["profile"] for s in two.echo["species"]] \
        == ["gaussian", "gaussian"]

    m3 = io.scenario("equal_diffusivity_m3")
    assert len(m3.echo["species"]) == 3
    assert len({s["diffusivity"] for s in m3.echo["species"]}) == 1
    assert sorted(s["valence"] for s in m3.echo["species"]) == [-1.0, 1.0, 1.0]
    assert m3.echo["run"]["shadow_pair"] is True

    mixed = io.scenario("mixed_small_anion")
    grid = mixed.build_grid()
    species = mixed.build_species()
    state = mixed.initial_state(grid, species)
    m1 = io.integrate_cells(state.concentrations[0])
    m2 = io.integrate_cells(state.concentrations[1])
    assert m2 == pytest.approx(1e-3 * m1, rel=1e-12)
    assert species[0].bc == "dirichlet" and species[1].bc == "blocking"

    volts = io.scenario("applied_voltage")
    xi = volts.build_xi(volts.build_grid())
    lo = min(float(np.min(v)) for v in xi.values.values())
    hi = max(float(np.max(v)) for v in xi.values.values())
    assert hi - lo > 0.5
    assert volts.echo["params"]["fluid_model"] == "NPNS"


def test_unknown_scenario_lists_available():
    with pytest.raises(ConfigError) as err:
        io.scenario("nope")
    for name in io.scenario_names():
        assert name in str(err.value)
