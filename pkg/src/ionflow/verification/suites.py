"""Named verification suites behind the `verify --suite` CLI surface."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..diagnostics import budget_residual_tol, v_monotonicity_tol
from ..errors import ConfigError
from ..fields import (BoundaryData, ScalarField, SimState, SpeciesSpec,
                      StaggeredVectorField, make_grid)
from ..fluid import (PressureProjector, fluid_step, mac_norm_sq,
                     velocity_gradient_norms)
from ..orchestrator import Simulation
from ..poisson import RobinPoissonProblem, solve_potential
from ..scenarios import scenario_with
from ..transport import advance_concentrations, bernoulli
from .budget import budget_refinement_study
from .dense import dense_poisson_matrix, dense_poisson_oracle
from .mms import mms_convergence
from .pair_reduction import rho_sigma_equivalence
from .trace import trace_inequality_check


@dataclass
class CheckResult:
    name: str
    passed: bool
    info: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = dc_field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def format_text(self):
        lines = ["suite %s: %s" % (self.suite, "pass" if self.passed else "FAIL")]
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            lines.append("  [%s] %s%s" % (mark, c.name, (" - " + c.info) if c.info else ""))
        return "\n".join(lines)

    def to_records(self):
        return [{"suite": self.suite, "check": c.name, "passed": c.passed,
                 "info": c.info} for c in self.checks]


def _random_problem(n=4, seed=7, epsilon=1.1, tau=0.8, method="pcg", rtol=1e-13):
    rng = np.random.default_rng(seed)
    grid = make_grid(2, (n, n), (1.0, 1.0))
    rho = ScalarField.from_interior(grid, rng.standard_normal(grid.interior_shape))
    xi = BoundaryData(grid, {k: rng.standard_normal(grid.slab_shape(k[0]))
                             for k in grid.boundary_slabs()})
    return RobinPoissonProblem(rho=rho, epsilon=epsilon, tau=tau, xi=xi,
                               rtol=rtol, method=method)


def _suite_poisson():
    checks = []
    # constant data: phi is exactly xi0 / tau
    grid = make_grid(2, (8, 8), (1.0, 1.0))
    tau = 0.6
    xi0 = 1.8
    problem = RobinPoissonProblem(
        rho=ScalarField.zeros(grid), epsilon=2.0, tau=tau,
        xi=BoundaryData.constant(grid, xi0), rtol=1e-12, method="pcg")
    phi = solve_potential(problem)
    err = float(np.max(np.abs(phi.interior - xi0 / tau)))
    checks.append(CheckResult("constant data gives phi = xi/tau", err < 1e-10,
                              "max error %.2e" % err))
    for method in ("pcg", "separable"):
        problem = _random_problem(method=method)
        ours = solve_potential(problem)
        truth = dense_poisson_oracle(problem)
        err = float(np.max(np.abs(ours.interior - truth.interior)))
        checks.append(CheckResult("dense oracle agreement (%s)" % method,
                                  err <= 1e-12, "max diff %.2e" % err))
    A, _ = dense_poisson_matrix(_random_problem())
    asym = float(np.max(np.abs(A - A.T)))
    eigmin = float(np.min(np.linalg.eigvalsh(A)))
    checks.append(CheckResult("assembled matrix symmetric", asym <= 1e-14,
                              "max asymmetry %.2e" % asym))
    checks.append(CheckResult("assembled matrix positive definite", eigmin > 0,
                              "min eigenvalue %.2e" % eigmin))
    report = mms_convergence("poisson_robin")
    checks.append(CheckResult("manufactured-solution order >= 1.9", report.passed,
                              "fitted %.3f" % report.fitted_order))
    return checks


def _suite_np():
    checks = []
    b0 = bernoulli(0.0)
    checks.append(CheckResult("B(0) = 1", b0 == 1.0, "%r" % b0))
    worst = 0.0
    for x in (0.5, 2.0, 10.0):
        worst = max(worst, abs(bernoulli(-x) - bernoulli(x) * math.exp(x)))
    checks.append(CheckResult("B(-x) = B(x) e^x", worst < 1e-13, "max defect %.2e" % worst))
    # discrete equilibrium is an exact fixed point
    grid = make_grid(2, (12, 12), (1.0, 1.0))
    rng = np.random.default_rng(3)
    phi = ScalarField.from_interior(grid, 0.3 * rng.standard_normal(grid.interior_shape))
    phi.fill_ghosts_mirror()
    specs = [SpeciesSpec(valence=1.0, diffusivity=1.0, bc="blocking"),
             SpeciesSpec(valence=-2.0, diffusivity=0.5, bc="blocking")]
    state = SimState(grid=grid,
                     concentrations=[ScalarField.from_interior(
                         grid, 1.5 * np.exp(-s.valence * phi.interior)) for s in specs],
                     potential=phi, velocity=StaggeredVectorField.zeros(grid),
                     pressure=ScalarField.zeros(grid))
    before = [c.interior.copy() for c in state.concentrations]
    for _ in range(5):
        advance_concentrations(state, specs, 1e-4)
    drift = max(float(np.max(np.abs(c.interior - b) / np.abs(b)))
                for c, b in zip(state.concentrations, before))
    checks.append(CheckResult("Boltzmann states are fixed points", drift < 5e-13,
                              "relative drift %.2e" % drift))
    for case in ("diffusion_blocking", "advection_diffusion_frozen_u"):
        report = mms_convergence(case)
        checks.append(CheckResult("%s convergence" % case, report.passed,
                                  "fitted %.3f" % report.fitted_order))
    return checks


def _suite_fluid():
    from ..fields import PhysicalParams
    checks = []
    grid = make_grid(2, (8, 8), (1.0, 1.0))
    params = PhysicalParams(epsilon=1.0, K=1.0, nu=0.7, tau=1.0, fluid_model="NPS")
    projector = PressureProjector(grid)

    def make_state(u=None):
        return SimState(grid=grid, concentrations=[],
                        potential=ScalarField.zeros(grid),
                        velocity=u or StaggeredVectorField.zeros(grid),
                        pressure=ScalarField.zeros(grid))

    # rest state stays at rest
    state = make_state()
    _, rep = fluid_step(state, params, None, 1e-3, projector=projector)
    checks.append(CheckResult("rest state stays at rest",
                              rep.kinetic_energy_after == 0.0,
                              "KE %.2e" % rep.kinetic_energy_after))
    # a gradient force is annihilated by the projection
    rng = np.random.default_rng(5)
    chi = rng.standard_normal(grid.interior_shape)
    force = []
    for a in range(grid.dim):
        f = np.zeros(grid.face_shape(a))
        idx = tuple(slice(1, -1) if b == a else slice(None) for b in range(grid.dim))
        f[idx] = np.diff(chi, axis=a) / grid.spacing[a]
        force.append(f)
    state = make_state()
    _, rep = fluid_step(state, params, force, 1e-3, projector=projector)
    ke = mac_norm_sq(state.velocity)
    checks.append(CheckResult("projection annihilates gradient forces",
                              ke < 1e-22, "KE %.2e" % ke))
    # random divergence-free start decays monotonically, force free
    state = make_state()
    for a in range(grid.dim):
        idx = state.velocity.interior_faces(a)
        state.velocity.components[a][idx] = rng.standard_normal(
            state.velocity.components[a][idx].shape)
    state.velocity.enforce_noslip()
    div = state.velocity.divergence()
    p = projector.solve(-div)
    for a in range(grid.dim):
        idx = state.velocity.interior_faces(a)
        state.velocity.components[a][idx] -= np.diff(p, axis=a) / grid.spacing[a]
    decays = []
    divs = []
    for _ in range(25):
        _, rep = fluid_step(state, params, None, 5e-4, projector=projector)
        decays.append(rep.kinetic_energy_after < rep.kinetic_energy_before)
        divs.append(rep.post_divergence)
    checks.append(CheckResult("force-free kinetic energy strictly decreases",
                              all(decays), "%d/%d steps" % (sum(decays), len(decays))))
    checks.append(CheckResult("post-projection divergence <= 1e-10",
                              max(divs) <= 1e-10, "max %.2e" % max(divs)))
    gs, us, acc = velocity_gradient_norms(state.velocity, 0.0, 0.0)
    target = 7 * 0.125 * gs * gs
    acc = 0.0
    for _ in range(7):
        _, _, acc = velocity_gradient_norms(state.velocity, acc, 0.125)
    checks.append(CheckResult("4th-power accumulator matches rectangle rule",
                              abs(acc - target) <= 1e-12 * max(target, 1.0),
                              "defect %.2e" % abs(acc - target)))
    return checks


def _suite_energy():
    checks = []
    config = scenario_with("two_species_relaxation",
                           run={"t_end": 0.05, "sample_every": 1},
                           output={"formats": []})
    sim = Simulation(config, write_outputs=False)
    sim.run()
    recs = sim.records
    dt = sim.accumulators["dt_resolved"]
    h = max(sim.grid.spacing)
    ok = True
    worst = -math.inf
    for a, b in zip(recs, recs[1:]):
        tol = v_monotonicity_tol(dt, h, b.t - a.t, 1.0 + max(abs(a.V), a.Diss))
        worst = max(worst, b.V - a.V - tol)
        if b.V > a.V + tol:
            ok = False
    checks.append(CheckResult("V nonincreasing within budget slack", ok,
                              "worst margin %.2e" % worst))
    worst_ratio = 0.0
    for a, b in zip(recs, recs[1:]):
        if b.budget_residual is None:
            continue
        bound = budget_residual_tol(dt, h, 1.0 + max(abs(a.V), a.Diss))
        worst_ratio = max(worst_ratio, abs(b.budget_residual) / bound)
    checks.append(CheckResult("|residual| within the pinned budget bound",
                              worst_ratio <= 1.0,
                              "worst |r|/bound %.3f" % worst_ratio))
    dmin = min(r.Diss for r in recs)
    checks.append(CheckResult("dissipation nonnegative", dmin >= 0.0,
                              "min %.2e" % dmin))
    gmin = min(r.grad_u_sq for r in recs)
    checks.append(CheckResult("velocity Dirichlet form nonnegative", gmin >= 0.0,
                              "min %.2e" % gmin))
    study = budget_refinement_study()
    checks.append(CheckResult("residual falls >= 35% per dt halving", study.passed,
                              "ratios " + ", ".join("%.3f" % q for q in study.ratios)))
    return checks


def _suite_trace():
    checks = []
    for p in (2, 3, 4):
        for family in ("fourier", "boundary_peaked"):
            rep = trace_inequality_check(p=p, family=family)
            checks.append(CheckResult(
                "p=%d %s stabilization < 20%%" % (p, family), rep.passed,
                "max ratios " + ", ".join("%.3f" % r for r in rep.max_ratios)))
    return checks


def _suite_rho_sigma():
    checks = []
    config = scenario_with("equal_diffusivity_m3", run={"shadow_pair": False})
    rep = rho_sigma_equivalence(config, n_steps=500)
    checks.append(CheckResult("m=3 equivalence <= 1e-10", rep["max_deviation"] <= 1e-10,
                              "deviation %.2e" % rep["max_deviation"]))
    two = scenario_with(
        "two_species_relaxation",
        params={"fluid_model": "Frozen"},
        run={"shadow_pair": False},
        output={"formats": []})
    rep2 = rho_sigma_equivalence(two, n_steps=200)
    checks.append(CheckResult("m=2 equivalence <= 1e-12", rep2["max_deviation"] <= 1e-12,
                              "deviation %.2e" % rep2["max_deviation"]))
    flat = scenario_with(
        "two_species_relaxation",
        species=[
            {"valence": 1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.4, "center": [0.4, 0.5], "width": 0.15}},
            {"valence": -1.0, "diffusivity": 1.0, "bc": "blocking",
             "initial": {"profile": "gaussian", "background": 1.0,
                         "amplitude": 0.4, "center": [0.4, 0.5], "width": 0.15}},
        ],
        params={"fluid_model": "Frozen"},
        output={"formats": []})
    rep3 = rho_sigma_equivalence(flat, n_steps=200)
    checks.append(CheckResult("heat-equation limit <= 1e-12",
                              rep3["max_deviation"] <= 1e-12,
                              "deviation %.2e" % rep3["max_deviation"]))
    return checks


_SUITES = {
    "poisson": _suite_poisson,
    "np": _suite_np,
    "fluid": _suite_fluid,
    "energy": _suite_energy,
    "trace": _suite_trace,
    "rho-sigma": _suite_rho_sigma,
}


def suite_names():
    return sorted(_SUITES)


def run_suite(name):
    if name not in _SUITES:
        raise ConfigError("unknown suite %r; available: %s"
                          % (name, ", ".join(suite_names())))
    return SuiteReport(suite=name, checks=_SUITES[name]())
