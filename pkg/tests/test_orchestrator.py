import json
import os

import numpy as np
import pytest

import ionflow as io
from ionflow.checkpoint import load_checkpoint, save_checkpoint
from ionflow.errors import InvariantViolation, StabilityError
from ionflow.orchestrator import record_line, stream_keys


def short_cfg(tmp_path, name="two_species_relaxation", **over):
    base = {
        "run": {"t_end": 0.005, "sample_every": 1},
        "output": {"directory": str(tmp_path / "out"), "formats": ["ndjson"]},
    }
    for k, v in over.items():
        if isinstance(v, dict) and k in base:
            base[k].update(v)
        else:
            base[k] = v
    return io.scenario_with(name, **base)


def read_records(path):
    rows = []
    for line in open(path):
        obj = json.loads(line)
        if obj.get("record") == "header":
            continue
        rows.append(obj)
    return rows


def test_electroneutral_uniform_run_is_steady(tmp_path):
    cfg = io.scenario_with(
        "two_species_relaxation",
        species=[
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "uniform", "value": 1.0}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "uniform", "value": 1.0}},
        ],
        run={"t_end": 0.005, "sample_every": 1},
        output={"directory": str(tmp_path / "out"), "formats": ["ndjson"]})
    summary, sim = io.run_simulation(cfg)
    assert summary["exit_code"] == 0
    Vs = [r.V for r in sim.records]
    assert max(Vs) - min(Vs) <= 1e-12
    assert all(r.Diss <= 1e-25 for r in sim.records)
    assert all(r.u_sq <= 1e-25 for r in sim.records)


def test_stream_format_and_keys(tmp_path):
    cfg = short_cfg(tmp_path, run={"t_end": 0.002, "sample_every": 1})
    summary, sim = io.run_simulation(cfg)
    path = tmp_path / "out" / "diagnostics.ndjson"
    lines = open(path).read().splitlines()
    header = json.loads(lines[0])
    assert header["record"] == "header"
    assert header["keys"] == stream_keys(2)
    rows = [json.loads(l) for l in lines[1:]]
    assert rows[0]["step"] == 0
    for row in rows:
        assert list(row.keys()) == stream_keys(2)
    assert rows[0]["budget_residual"] is None
    assert rows[1]["budget_residual"] is not None
    # 17 significant digits survive the round trip
    assert rows[1]["V"] == sim.records[1].V


def test_record_line_null_handling():
    rec = io.DiagnosticsRecord(t=0.5, step=3, mass=[1.0], l2=[2.0], linf=[3.0],
                               V=1.0, Diss=0.0, grad_u_sq=0.0, u_sq=0.0,
                               U_T=0.0, mu_var=[None], Q=None)
    line = record_line(rec, 1)
    obj = json.loads(line)
    assert obj["mu_var.1"] is None
    assert obj["Q"] is None
    assert obj["step"] == 3


def test_budget_residual_flagged_for_sparse_sampling(tmp_path):
    cfg = short_cfg(tmp_path, run={"t_end": 0.004, "sample_every": 5})
    summary, sim = io.run_simulation(cfg)
    assert all(r.budget_residual is None for r in sim.records)


def test_determinism_same_seed_same_stream(tmp_path):
    cfg1 = short_cfg(tmp_path / "a")
    s1, sim1 = io.run_simulation(cfg1)
    cfg2 = short_cfg(tmp_path / "b")
    s2, sim2 = io.run_simulation(cfg2)
    a = open(os.path.join(str((tmp_path / "a") / "out"), "diagnostics.ndjson")).read()
    b = open(os.path.join(str((tmp_path / "b") / "out"), "diagnostics.ndjson")).read()
    a_rows = [l for l in a.splitlines() if '"header"' not in l]
    b_rows = [l for l in b.splitlines() if '"header"' not in l]
    assert a_rows == b_rows


def test_checkpoint_round_trip_bit_exact(tmp_path):
    cfg = short_cfg(tmp_path, checkpoint={"every_n_steps": 5})
    summary, sim = io.run_simulation(cfg)
    path = tmp_path / "out" / "checkpoint.ckpt"
    header, arrays = load_checkpoint(str(path))
    assert header["format"] == "ionflow-checkpoint"
    assert header["step"] == summary["steps"]
    assert np.array_equal(arrays["c1"], sim.state.concentrations[0].data)
    assert np.array_equal(arrays["u0"], sim.state.velocity.components[0])
    assert header["t"] == sim.state.t


def test_checkpoint_detects_corruption(tmp_path):
    cfg = short_cfg(tmp_path, checkpoint={"every_n_steps": 5})
    io.run_simulation(cfg)
    path = str(tmp_path / "out" / "checkpoint.ckpt")
    blob = bytearray(open(path, "rb").read())
    blob[-3] ^= 0xFF
    open(path, "wb").write(bytes(blob))
    with pytest.raises(InvariantViolation):
        load_checkpoint(path)


def test_resume_reproduces_stream_bit_for_bit(tmp_path):
    full_cfg = short_cfg(tmp_path / "full", run={"t_end": 0.01, "sample_every": 1},
                         checkpoint={"every_n_steps": 20})
    io.run_simulation(full_cfg)
    part_cfg = short_cfg(tmp_path / "part", run={"t_end": 0.01, "sample_every": 1},
                         checkpoint={"every_n_steps": 20})
    io.run_simulation(part_cfg, until=0.005)
    io.resume_simulation(str((tmp_path / "part") / "out" / "checkpoint.ckpt"),
                         out_dir=str(tmp_path / "resumed"), until=0.01)
    full_rows = open((tmp_path / "full") / "out" / "diagnostics.ndjson").read().splitlines()
    res_rows = open(tmp_path / "resumed" / "diagnostics.ndjson").read().splitlines()
    full_rows = [l for l in full_rows if '"header"' not in l]
    res_rows = [l for l in res_rows if '"header"' not in l]
    k0 = json.loads(res_rows[0])["step"]
    tail = [l for l in full_rows if json.loads(l)["step"] >= k0]
    assert tail == res_rows


def test_abort_writes_error_record_and_checkpoint(tmp_path):
    cfg = short_cfg(tmp_path, run={"dt": 1.0, "t_end": 2.0, "sample_every": 1})
    with pytest.raises(StabilityError):
        io.run_simulation(cfg)
    out = tmp_path / "out"
    err = json.loads(open(out / "error.json").read())
    assert err["module"] == "transport"
    assert err["step"] == 0
    header, arrays = load_checkpoint(str(out / "abort.ckpt"))
    assert "c1" in arrays


def test_auto_dt_respects_both_modules(tmp_path):
    cfg = short_cfg(tmp_path, params={"nu": 50.0})
    sim = io.Simulation(cfg, write_outputs=False)
    dt = sim.resolve_dt()
    from ionflow.fluid import viscous_dt_bound
    assert dt <= viscous_dt_bound(sim.grid, 50.0) * (1 + 1e-12)


def test_shadow_pair_live_deviation(tmp_path):
    cfg = io.scenario_with(
        "equal_diffusivity_m3",
        run={"t_end": 0.01, "sample_every": 5},
        output={"directory": str(tmp_path / "out"), "formats": ["ndjson"]})
    summary, sim = io.run_simulation(cfg)
    assert summary["pair_max_deviation"] is not None
    assert summary["pair_max_deviation"] <= 1e-11


def test_summary_contents(tmp_path):
    cfg = short_cfg(tmp_path)
    summary, sim = io.run_simulation(cfg)
    data = json.loads(open(tmp_path / "out" / "summary.json").read())
    assert data["exit_code"] == 0
    assert data["steps"] == summary["steps"]
    assert data["min_concentration"] > 0
    assert len(data["relative_mass_drift"]) == 2
    assert data["max_abs_budget_residual"] > 0


def test_field_dumps_round_trip(tmp_path):
    cfg = short_cfg(tmp_path, output={"formats": ["ndjson", "fields"],
                                      "directory": str(tmp_path / "out")})
    summary, sim = io.run_simulation(cfg)
    from ionflow.report import load_field
    arr, sidecar = load_field(str(tmp_path / "out" / "fields"), "c1")
    assert np.array_equal(arr, sim.state.concentrations[0].interior)
    assert sidecar["grid"]["cells"] == [32, 32]


def test_figures_rendered(tmp_path):
    cfg = short_cfg(tmp_path, run={"t_end": 0.002, "sample_every": 2},
                    output={"formats": ["ndjson", "figures"],
                            "directory": str(tmp_path / "out")})
    io.run_simulation(cfg)
    assert (tmp_path / "out" / "diagnostics.png").exists()
    assert (tmp_path / "out" / "final_fields.png").exists()


def test_applied_voltage_scenario_runs_npns(tmp_path):
    cfg = io.scenario_with(
        "applied_voltage",
        grid={"cells": [16, 16]},
        run={"t_end": 0.01, "sample_every": 5},
        output={"directory": str(tmp_path / "out"), "formats": ["ndjson"]})
    summary, sim = io.run_simulation(cfg)
    assert summary["exit_code"] == 0
    assert summary["min_concentration"] > 0
    assert max(summary["relative_mass_drift"]) < 1e-12
    # the voltage drop drives a genuine flow
    assert sim.records[-1].u_sq > 0
    assert all(np.isfinite(r.V) for r in sim.records)


def test_checkpoint_version_guard(tmp_path):
    cfg = short_cfg(tmp_path, checkpoint={"every_n_steps": 5})
    io.run_simulation(cfg)
    path = str(tmp_path / "out" / "checkpoint.ckpt")
    import struct
    raw = open(path, "rb").read()
    (hlen,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8:8 + hlen])
    header["version"] = 99
    head = json.dumps(header).encode()
    open(path, "wb").write(struct.pack("<Q", len(head)) + head + raw[8 + hlen:])
    from ionflow.errors import ConfigError
    with pytest.raises(ConfigError):
        load_checkpoint(path)


def test_3d_run_smoke(tmp_path):
    cfg = io.validate_config({
        "grid": {"dim": 3, "cells": [6, 6, 6], "lengths": [1.0, 1.0, 1.0]},
        "params": {"epsilon": 1.0, "K": 0.5, "nu": 1.0, "tau": 1.0,
                   "fluid_model": "NPS"},
        "species": [
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.3, "center": [0.4, 0.5, 0.5],
                         "width": 0.15}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.3, "center": [0.6, 0.5, 0.5],
                         "width": 0.15}},
        ],
        "run": {"t_end": 0.004, "sample_every": 1},
        "output": {"directory": str(tmp_path / "out3"), "formats": ["ndjson"]},
    })
    summary, sim = io.run_simulation(cfg)
    assert summary["exit_code"] == 0
    assert max(summary["relative_mass_drift"]) < 1e-12
    assert summary["min_concentration"] > 0
    recs = sim.records
    assert all(b.V <= a.V + 1e-10 for a, b in zip(recs, recs[1:]))
    assert all(r.Diss >= 0 for r in recs)


def test_save_checkpoint_standalone(tmp_path):
    cfg = short_cfg(tmp_path)
    sim = io.Simulation(cfg, write_outputs=False)
    sim.resolve_dt()
    path = str(tmp_path / "manual.ckpt")
    save_checkpoint(path, sim.echo, sim.state, {"U_T": 0.0})
    header, arrays = load_checkpoint(path)
    assert header["accumulators"]["U_T"] == 0.0
    assert set(arrays) == {"c1", "c2", "phi", "u0", "u1", "p"}
