"""Acceptance gate: every criterion at its stated tolerance, one line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
pass/fail lines.  The heavyweight runs are shared session fixtures.
"""

import json
import math
import time

import numpy as np
import pytest

import ionflow as io
from ionflow.cli import main
from ionflow.diagnostics import v_monotonicity_tol
from ionflow.fluid import PressureProjector, fluid_step, mac_norm_sq, velocity_gradient_norms
from ionflow.verification import (budget_refinement_study, dense_poisson_oracle,
                                  mms_convergence, rho_sigma_equivalence,
                                  trace_inequality_check)


def report(criterion, passed, detail):
    print("\nACCEPTANCE %-2s %s  %s" % (criterion, "PASS" if passed else "FAIL", detail))
    assert passed, "criterion %s: %s" % (criterion, detail)


@pytest.fixture(scope="module")
def main_run():
    """Two-species blocking/Robin NPS run, 64x64, exactly 1e4 auto-dt steps."""
    cfg = io.scenario_with("two_species_relaxation",
                           grid={"cells": [64, 64]},
                           run={"t_end": 1.0, "sample_every": 1},
                           output={"formats": []})
    sim = io.Simulation(cfg, write_outputs=False)
    dt = sim.resolve_dt()
    sim.echo["run"]["t_end"] = 1e4 * dt
    start = time.time()
    summary = sim.run()
    elapsed = time.time() - start
    assert summary["steps"] == 10000
    return sim, summary, elapsed


@pytest.fixture(scope="module")
def relaxation_run():
    """The relaxation scenario to its full horizon (doubled-duration witness)."""
    cfg = io.scenario_with("two_species_relaxation", output={"formats": []})
    sim = io.Simulation(cfg, write_outputs=False)
    summary = sim.run()
    return sim, summary


def test_criterion_1_mass_conservation(main_run):
    sim, summary, elapsed = main_run
    drift = max(summary["relative_mass_drift"])
    ok = drift <= 1e-11 and elapsed < 60.0
    report(1, ok, "mass drift %.3e (<= 1e-11), runtime %.1f s (< 60 s), 1e4 steps"
           % (drift, elapsed))


def test_criterion_2_positivity(main_run, tmp_path):
    sim, summary, _ = main_run
    ok_min = summary["min_concentration"] >= 0.0
    # a deliberately unstable step must abort with exit code 4
    cfg = io.scenario_with("two_species_relaxation",
                           run={"dt": 1.0, "t_end": 2.0, "sample_every": 1},
                           output={"directory": str(tmp_path / "boom"),
                                   "formats": ["ndjson"]})
    path = tmp_path / "boom.json"
    path.write_text(json.dumps(cfg.echo))
    code = main(["simulate", "--config", str(path)])
    report(2, ok_min and code == 4,
           "min concentration %.6f >= 0 over 1e4 steps; violation exit code %d"
           % (summary["min_concentration"], code))


def test_criterion_3_lyapunov_decay_and_budget(main_run):
    sim, summary, _ = main_run
    recs = sim.records
    dt = summary["dt"]
    h = max(sim.grid.spacing)
    worst = -math.inf
    ok_v = True
    for a, b in zip(recs, recs[1:]):
        tol = v_monotonicity_tol(dt, h, b.t - a.t, 1.0 + max(abs(a.V), a.Diss))
        worst = max(worst, b.V - a.V - tol)
        if b.V > a.V + tol:
            ok_v = False
    ok_d = min(r.Diss for r in recs) >= 0.0
    start = time.time()
    study = budget_refinement_study()
    study_time = time.time() - start
    ok_study = study.passed and study_time < 300.0
    report(3, ok_v and ok_d and ok_study,
           "V monotone (worst slack margin %.2e), Diss >= 0, residual ratios %s "
           "in <= 0.65, study %.1f s (< 5 min)"
           % (worst, ", ".join("%.3f" % q for q in study.ratios), study_time))


def test_criterion_4_equilibrium_exactness():
    g = io.make_grid(2, (24, 24), (1.0, 1.0))
    rng = np.random.default_rng(17)
    phi = io.ScalarField.from_interior(g, 0.5 * rng.standard_normal(g.interior_shape))
    phi.fill_ghosts_mirror()
    species = [io.SpeciesSpec(valence=1.0, diffusivity=1.0, bc="blocking"),
               io.SpeciesSpec(valence=-1.0, diffusivity=0.8, bc="blocking")]
    amps = [1.3, 0.9]
    state = io.SimState(
        grid=g,
        concentrations=[io.ScalarField.from_interior(
            g, A * np.exp(-s.valence * phi.interior)) for A, s in zip(amps, species)],
        potential=phi,
        velocity=io.StaggeredVectorField.zeros(g),
        pressure=io.ScalarField.zeros(g))
    dt = io.stable_dt(g, phi, species, state.velocity)
    prev = [c.interior.copy() for c in state.concentrations]
    worst_step = 0.0
    for _ in range(100):
        io.advance_concentrations(state, species, dt)
        for c, p in zip(state.concentrations, prev):
            worst_step = max(worst_step, float(np.max(np.abs(c.interior - p) / p)))
        prev = [c.interior.copy() for c in state.concentrations]
    report(4, worst_step <= 1e-13,
           "max per-step relative drift %.3e (<= 1e-13) over 100 steps" % worst_step)


def test_criterion_5_steady_state_attraction(relaxation_run):
    sim, summary = relaxation_run
    rec = sim.records[-1]
    ok_mu = all(v is not None and v < 1e-8 for v in rec.mu_var)
    ok_u = rec.u_sq < 1e-10
    phi = sim.state.potential.interior
    vol = sim.grid.cell_volume
    worst_fit = 0.0
    for i, spec in enumerate(sim.species):
        w = np.exp(-spec.valence * phi)
        A = io.integrate_cells(sim.state.concentrations[i]) / (float(np.sum(w)) * vol)
        fit = A * w
        worst_fit = max(worst_fit, float(np.max(
            np.abs(sim.state.concentrations[i].interior - fit) / np.abs(fit))))
    report(5, ok_mu and ok_u and worst_fit < 1e-6,
           "mu variance %.2e (< 1e-8), |u|^2 %.2e (< 1e-10), Boltzmann-fit "
           "error %.2e (< 1e-6)" % (max(rec.mu_var), rec.u_sq, worst_fit))


def test_criterion_6_uniform_l2_witness(relaxation_run):
    sim, summary = relaxation_run
    recs = sim.records
    T = recs[-1].t
    dt = summary["dt"]
    h = max(sim.grid.spacing)
    half = T / 2.0
    ok = True
    detail = []
    scale = 1.0 + max(max(abs(r.V) for r in recs), max(r.Diss for r in recs))
    tol = v_monotonicity_tol(dt, h, dt, scale) * T
    for i in range(len(sim.species)):
        for line in ("l2", "linf"):
            first = max(getattr(r, line)[i] for r in recs if r.t <= half)
            second = max(getattr(r, line)[i] for r in recs if r.t > half)
            ok = ok and (second <= first + tol)
        first = max(r.l2[i] for r in recs if r.t <= half)
        second = max(r.l2[i] for r in recs if r.t > half)
        detail.append("s%d %.6f -> %.6f" % (i + 1, first, second))
    q_min = min(r.Q for r in recs)
    ok_q = q_min >= -1e-12
    report(6, ok and ok_q,
           "half-run L2 sups [%s], min Q %.3e (>= -1e-12)" % ("; ".join(detail), q_min))


def test_criterion_7_equal_diffusivity_reduction():
    cfg = io.scenario_with("equal_diffusivity_m3", run={"shadow_pair": False},
                           output={"formats": []})
    rep = rho_sigma_equivalence(cfg, n_steps=500)
    report(7, rep["max_deviation"] <= 1e-10,
           "m=3 16x16 500-step pair deviation %.3e (<= 1e-10)" % rep["max_deviation"])


def test_criterion_8_mixed_bc_scenario():
    q1_series = []

    class MixedSim(io.Simulation):
        def _sample(self, grad_u_sq, u_sq, fh):
            q1, _, _ = io.mixed_bc_monitors(self.state, self.species)
            q1_series.append((self.state.t, q1))
            super()._sample(grad_u_sq, u_sq, fh)

    cfg = io.scenario_with("mixed_small_anion", run={"sample_every": 1},
                           output={"formats": []})
    sim = MixedSim(cfg, write_outputs=False)
    summary = sim.run()
    recs = sim.records
    m2_0 = recs[0].mass[1]
    drift = max(abs(r.mass[1] - m2_0) for r in recs) / abs(m2_0)
    T = recs[-1].t
    half = T / 2.0
    dt = summary["dt"]
    h = max(sim.grid.spacing)
    scale = 1.0 + max(max(abs(r.V) for r in recs), max(r.Diss for r in recs))
    tol = v_monotonicity_tol(dt, h, dt, scale) * T
    # shifted cation variable and the anion, second-half sup vs first-half sup
    q1_first = max(q for t, q in q1_series if t <= half)
    q1_second = max(q for t, q in q1_series if t > half)
    c2_first = max(r.l2[1] for r in recs if r.t <= half)
    c2_second = max(r.l2[1] for r in recs if r.t > half)
    ok_bounded = (q1_second <= q1_first + tol) and (c2_second <= c2_first + tol)
    integral = summary["rho_sq_time_integral"]
    ok_integral = math.isfinite(integral) and integral >= 0.0
    report(8, drift <= 1e-11 and ok_bounded and ok_integral,
           "anion mass drift %.3e (<= 1e-11), ||q1|| sup %.4e -> %.4e, ||c2|| sup "
           "%.4e -> %.4e, int ||rho||^2 dt = %.6e"
           % (drift, q1_first, q1_second, c2_first, c2_second, integral))


def test_criterion_9_poisson_solver():
    rng = np.random.default_rng(23)
    worst = 0.0
    for n, lengths in (((24, 24), (1.0, 1.0)), ((8, 8, 8), (1.0, 1.2, 0.7))):
        g = io.make_grid(len(n), n, lengths)
        rho = io.ScalarField.from_interior(g, rng.standard_normal(g.interior_shape))
        xi = io.BoundaryData(g, {k: rng.standard_normal(g.slab_shape(k[0]))
                                 for k in g.boundary_slabs()})
        problem = io.RobinPoissonProblem(rho=rho, epsilon=1.1, tau=0.8, xi=xi,
                                         rtol=1e-13)
        phi = io.solve_potential(problem)
        truth = dense_poisson_oracle(problem)
        worst = max(worst, float(np.max(np.abs(phi.interior - truth.interior))))
    mms = mms_convergence("poisson_robin")
    g = io.make_grid(2, (16, 16), (1.0, 1.0))
    tau, xi0 = 0.7, 2.1
    const = io.solve_potential(io.RobinPoissonProblem(
        rho=io.ScalarField.zeros(g), epsilon=1.0, tau=tau,
        xi=io.BoundaryData.constant(g, xi0), rtol=1e-12))
    const_err = float(np.max(np.abs(const.interior - xi0 / tau)))
    ok = worst <= 1e-12 and mms.fitted_order >= 1.9 and const_err <= 1e-10
    report(9, ok, "dense-oracle agreement %.2e (<= 1e-12), order %.3f (>= 1.9), "
           "constant case error %.2e" % (worst, mms.fitted_order, const_err))


def test_criterion_10_fluid_solver():
    g = io.make_grid(2, (8, 8), (1.0, 1.0))
    params = io.PhysicalParams(epsilon=1.0, K=1.0, nu=0.7, tau=1.0, fluid_model="NPS")
    proj = PressureProjector(g)
    rng = np.random.default_rng(29)
    u = io.StaggeredVectorField.zeros(g)
    for a in range(2):
        idx = u.interior_faces(a)
        u.components[a][idx] = rng.standard_normal(u.components[a][idx].shape)
    u.enforce_noslip()
    p = proj.solve(-u.divergence())
    for a in range(2):
        idx = u.interior_faces(a)
        u.components[a][idx] -= np.diff(p, axis=a) / g.spacing[a]
    state = io.SimState(grid=g, concentrations=[], potential=io.ScalarField.zeros(g),
                        velocity=u, pressure=io.ScalarField.zeros(g))
    max_div = 0.0
    strictly = True
    for _ in range(50):
        _, rep = fluid_step(state, params, None, 5e-4, projector=proj)
        max_div = max(max_div, rep.post_divergence)
        strictly = strictly and rep.kinetic_energy_after < rep.kinetic_energy_before

    chi = rng.standard_normal(g.interior_shape)
    force = []
    for a in range(2):
        f = np.zeros(g.face_shape(a))
        idx = tuple(slice(1, -1) if b == a else slice(None) for b in range(2))
        f[idx] = np.diff(chi, axis=a) / g.spacing[a]
        force.append(f)
    rest = io.SimState(grid=g, concentrations=[], potential=io.ScalarField.zeros(g),
                       velocity=io.StaggeredVectorField.zeros(g),
                       pressure=io.ScalarField.zeros(g))
    fluid_step(rest, params, force, 1e-3, projector=proj)
    grad_ke = mac_norm_sq(rest.velocity)

    gs, _, _ = velocity_gradient_norms(state.velocity)
    dt_acc = 0.03125
    acc = 0.0
    for _ in range(16):
        _, _, acc = velocity_gradient_norms(state.velocity, acc, dt_acc)
    acc_err = abs(acc - 16 * dt_acc * gs * gs) / max(16 * dt_acc * gs * gs, 1e-300)
    ok = max_div <= 1e-10 and strictly and grad_ke < 1e-20 and acc_err <= 1e-12
    report(10, ok, "max divergence %.2e (<= 1e-10), energy strictly decreasing, "
           "gradient-force KE %.2e, U(T) defect %.2e (<= 1e-12)"
           % (max_div, grad_ke, acc_err))


def test_criterion_11_trace_inequality():
    start = time.time()
    ok = True
    details = []
    for p in (2, 3, 4):
        for family in ("fourier", "boundary_peaked"):
            rep = trace_inequality_check(levels=(16, 32, 64), family=family, p=p)
            ok = ok and rep.passed
            details.append("p=%d %s %.1f%%" % (p, family, 100 * rep.stabilization))
    elapsed = time.time() - start
    ok = ok and elapsed < 120.0
    report(11, ok, "stabilization across two finest levels: %s; %.1f s (< 2 min)"
           % (", ".join(details), elapsed))


def test_criterion_12_determinism_and_persistence(tmp_path):
    full_cfg = io.scenario_with(
        "two_species_relaxation",
        run={"t_end": 0.01, "sample_every": 1},
        checkpoint={"every_n_steps": 25},
        output={"directory": str(tmp_path / "full"), "formats": ["ndjson"]})
    io.run_simulation(full_cfg)
    part_cfg = io.scenario_with(
        "two_species_relaxation",
        run={"t_end": 0.01, "sample_every": 1},
        checkpoint={"every_n_steps": 25},
        output={"directory": str(tmp_path / "part"), "formats": ["ndjson"]})
    io.run_simulation(part_cfg, until=0.005)

    from ionflow.checkpoint import load_checkpoint
    ckpt_path = str(tmp_path / "part" / "checkpoint.ckpt")
    header, arrays = load_checkpoint(ckpt_path)
    _, sim_reload = io.resume_simulation(ckpt_path, out_dir=str(tmp_path / "resumed"),
                                         until=0.01)
    header2, arrays2 = load_checkpoint(ckpt_path)
    round_trip = all(np.array_equal(arrays[k], arrays2[k]) for k in arrays)

    full_rows = [l for l in open(tmp_path / "full" / "diagnostics.ndjson").read().splitlines()
                 if '"header"' not in l]
    res_rows = [l for l in open(tmp_path / "resumed" / "diagnostics.ndjson").read().splitlines()
                if '"header"' not in l]
    k0 = json.loads(res_rows[0])["step"]
    tail = [l for l in full_rows if json.loads(l)["step"] >= k0]
    identical = tail == res_rows
    report(12, round_trip and identical,
           "checkpoint round-trip bit-exact, resumed stream identical from step %d "
           "(%d records)" % (k0, len(res_rows)))
