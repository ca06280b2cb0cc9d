"""Time loop: potential solve -> transport -> fluid -> diagnostics.

The loop never advances concentrations against a stale potential: the
potential is re-solved from the current charge density at the top of every
step, so the lagged coupling is one step at most by construction.  Sampling
and checkpointing both happen at the top of a step, against the freshly
solved potential, which makes a resumed stream reproduce the uninterrupted
one bit for bit from the checkpoint step onward.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from . import checkpoint as ckpt
from .config import SimConfig, validate_config
from .diagnostics import collect, energy_budget_residual
from .errors import ConfigError, IonflowError
from .fields import ScalarField
from .fluid import (PressureProjector, electric_force, fluid_step,
                    velocity_gradient_norms, viscous_dt_bound)
from .poisson import (RobinPoissonProblem, SeparableSolver, charge_density,
                      solve_potential)
from .transport import advance_concentrations, rho_sigma_step, stable_dt

STREAM_NAME = "diagnostics.ndjson"
SUMMARY_NAME = "summary.json"
CHECKPOINT_NAME = "checkpoint.ckpt"
ABORT_CHECKPOINT_NAME = "abort.ckpt"
ERROR_RECORD_NAME = "error.json"

_ERROR_MODULE = {
    "PositivityError": "transport",
    "StabilityError": "transport",
    "SolverError": "solver",
    "InvariantViolation": "invariants",
    "ConfigError": "config",
}


def _fmt(x):
    if x is None:
        return "null"
    if isinstance(x, int):
        return "%d" % x
    return "%.17g" % x


def record_line(rec, m):
    """Serialize one diagnostics record with the fixed key order."""
    parts = ['"t": %s' % _fmt(rec.t), '"step": %d' % rec.step]
    parts += ['"mass.%d": %s' % (i + 1, _fmt(rec.mass[i])) for i in range(m)]
    parts += ['"l2.%d": %s' % (i + 1, _fmt(rec.l2[i])) for i in range(m)]
    parts += ['"linf.%d": %s' % (i + 1, _fmt(rec.linf[i])) for i in range(m)]
    parts += ['"V": %s' % _fmt(rec.V), '"Diss": %s' % _fmt(rec.Diss),
              '"grad_u_sq": %s' % _fmt(rec.grad_u_sq),
              '"u_sq": %s' % _fmt(rec.u_sq),
              '"U_T": %s' % _fmt(rec.U_T),
              '"budget_residual": %s' % _fmt(rec.budget_residual)]
    parts += ['"mu_var.%d": %s' % (i + 1, _fmt(rec.mu_var[i])) for i in range(m)]
    parts += ['"Q": %s' % _fmt(rec.Q), '"phi_h1": %s' % _fmt(rec.phi_h1)]
    return "{" + ", ".join(parts) + "}"


def stream_keys(m):
    keys = ["t", "step"]
    keys += ["mass.%d" % (i + 1) for i in range(m)]
    keys += ["l2.%d" % (i + 1) for i in range(m)]
    keys += ["linf.%d" % (i + 1) for i in range(m)]
    keys += ["V", "Diss", "grad_u_sq", "u_sq", "U_T", "budget_residual"]
    keys += ["mu_var.%d" % (i + 1) for i in range(m)]
    keys += ["Q", "phi_h1"]
    return keys


class Simulation:
    """A configured run: owns the state, the solvers, and the sinks."""

    def __init__(self, config, out_dir=None, until=None, write_outputs=True):
        if not isinstance(config, SimConfig):
            config = validate_config(config)
        self.config = config
        self.echo = json.loads(json.dumps(config.echo))
        if out_dir is not None:
            self.echo["output"]["directory"] = str(out_dir)
        if until is not None:
            if until <= 0:
                raise ConfigError("--until must be positive")
            self.echo["run"]["t_end"] = float(until)
        self.grid = config.build_grid()
        self.params = config.build_params()
        self.species = config.build_species()
        self.xi = config.build_xi(self.grid)
        self.state = config.initial_state(self.grid, self.species)
        self.write_outputs = write_outputs
        self.records = []
        self.accumulators = {
            "U_T": 0.0,
            "rho_sq_integral": 0.0,
            "min_concentration": math.inf,
            "prev_V": None, "prev_step": None, "prev_Diss": None,
            "prev_grad_u_sq": None, "dt_resolved": None,
            "pair_max_deviation": None,
        }
        self._solver_cache = SeparableSolver(self.grid, self.params.epsilon,
                                             tau=self.params.tau)
        self._projector = (PressureProjector(self.grid)
                           if self.params.fluid_model != "Frozen" else None)
        self.shadow = None
        if self.echo["run"]["shadow_pair"]:
            self._init_shadow()

    # -- shadow pair system (equal-diffusivity reduction, live monitor) -----

    def _init_shadow(self):
        z = abs(self.species[0].valence)
        D = self.species[0].diffusivity
        rho_p = ScalarField.zeros(self.grid)
        sigma_p = ScalarField.zeros(self.grid)
        for spec, c in zip(self.species, self.state.concentrations):
            rho_p.interior[...] += spec.valence * c.interior
            sigma_p.interior[...] += z * c.interior
        self.shadow = {"z": z, "D": D, "rho": rho_p, "sigma": sigma_p,
                       "max_dev": 0.0}
        self.accumulators["pair_max_deviation"] = 0.0

    def _shadow_deviation(self):
        sh = self.shadow
        z = sh["z"]
        rho_f = np.zeros(self.grid.interior_shape)
        sigma_f = np.zeros(self.grid.interior_shape)
        for spec, c in zip(self.species, self.state.concentrations):
            rho_f += spec.valence * c.interior
            sigma_f += z * c.interior
        dev = float(np.max(np.abs(rho_f - sh["rho"].interior))
                    + np.max(np.abs(sigma_f - sh["sigma"].interior)))
        sh["max_dev"] = max(sh["max_dev"], dev)
        self.accumulators["pair_max_deviation"] = sh["max_dev"]

    def _shadow_step(self, dt):
        sh = self.shadow
        problem = RobinPoissonProblem(rho=sh["rho"], epsilon=self.params.epsilon,
                                      tau=self.params.tau, xi=self.xi,
                                      method="separable")
        phi_p = solve_potential(problem, solver_cache=self._solver_cache)
        rho_sigma_step(sh["rho"], sh["sigma"], sh["z"], sh["D"], phi_p,
                       self.state.velocity, dt)

    # -- time-step resolution ------------------------------------------------

    def resolve_dt(self):
        run = self.echo["run"]
        rho = charge_density(self.state, self.species)
        problem = RobinPoissonProblem(rho=rho, epsilon=self.params.epsilon,
                                      tau=self.params.tau, xi=self.xi,
                                      method="separable")
        self.state.potential = solve_potential(problem, solver_cache=self._solver_cache)
        if run["dt"] == "auto":
            dt = stable_dt(self.grid, self.state.potential, self.species,
                           self.state.velocity)
            if self.params.fluid_model != "Frozen":
                dt = min(dt, viscous_dt_bound(self.grid, self.params.nu))
        else:
            dt = float(run["dt"])
        self.accumulators["dt_resolved"] = dt
        return dt

    # -- output sinks --------------------------------------------------------

    def _open_stream(self):
        if not self.write_outputs or "ndjson" not in self.echo["output"]["formats"]:
            return None
        out = self.echo["output"]["directory"]
        os.makedirs(out, exist_ok=True)
        fh = open(os.path.join(out, STREAM_NAME), "w")
        header = {
            "record": "header",
            "format": "ionflow-diagnostics",
            "version": 1,
            "keys": stream_keys(len(self.species)),
            "species": len(self.species),
            "config": self.echo,
        }
        fh.write(json.dumps(header) + "\n")
        return fh

    def _emit(self, rec, fh):
        self.records.append(rec)
        if fh is not None:
            fh.write(record_line(rec, len(self.species)) + "\n")

    def _checkpoint_path(self, name=CHECKPOINT_NAME):
        out = self.echo["output"]["directory"]
        os.makedirs(out, exist_ok=True)
        configured = self.echo["checkpoint"]["path"]
        if name == CHECKPOINT_NAME and configured:
            return configured
        return os.path.join(out, name)

    def _save_checkpoint(self, name=CHECKPOINT_NAME):
        extra = None
        if self.shadow is not None:
            extra = {"pair_rho": self.shadow["rho"].data,
                     "pair_sigma": self.shadow["sigma"].data}
        acc = {k: v for k, v in self.accumulators.items()}
        acc["min_concentration"] = (None if math.isinf(acc["min_concentration"])
                                    else acc["min_concentration"])
        path = self._checkpoint_path(name)
        ckpt.save_checkpoint(path, self.echo, self.state, acc, extra)
        return path

    # -- the loop ------------------------------------------------------------

    def _sample(self, grad_u_sq, u_sq, fh):
        rec = collect(self.state, self.species, self.params,
                      self.accumulators["U_T"], grad_u_sq=grad_u_sq, u_sq=u_sq)
        acc = self.accumulators
        if acc["prev_step"] is not None and rec.step - acc["prev_step"] == 1:
            prev = _PrevRecord(acc["prev_V"], acc["prev_Diss"],
                               acc["prev_grad_u_sq"],
                               rec.t - acc["dt_resolved"])
            rec.budget_residual = energy_budget_residual(prev, rec, self.params)
        acc["prev_V"] = rec.V
        acc["prev_step"] = rec.step
        acc["prev_Diss"] = rec.Diss
        acc["prev_grad_u_sq"] = rec.grad_u_sq
        self._emit(rec, fh)

    def run(self):
        """Run to t_end; returns the summary dict (also written to disk)."""
        run_block = self.echo["run"]
        dt = self.accumulators["dt_resolved"]
        if dt is None:
            dt = self.resolve_dt()
        t_end = run_block["t_end"]
        total_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
        sample_every = run_block["sample_every"]
        ckpt_every = self.echo["checkpoint"]["every_n_steps"]
        fh = self._open_stream()
        vol = self.grid.cell_volume
        try:
            while self.state.step < total_steps:
                step = self.state.step
                rho = charge_density(self.state, self.species)
                problem = RobinPoissonProblem(
                    rho=rho, epsilon=self.params.epsilon, tau=self.params.tau,
                    xi=self.xi, method="separable")
                self.state.potential = solve_potential(
                    problem, solver_cache=self._solver_cache)
                grad_u_sq, u_sq, _ = velocity_gradient_norms(self.state.velocity)
                if ckpt_every and step % ckpt_every == 0 and step > 0:
                    self._save_checkpoint()
                if step % sample_every == 0:
                    self._sample(grad_u_sq, u_sq, fh)
                if self.shadow is not None:
                    self._shadow_deviation()
                    self._shadow_step(dt)
                rho_sq = float(np.sum(rho.interior ** 2)) * vol
                self.accumulators["rho_sq_integral"] += dt * rho_sq
                advance_concentrations(self.state, self.species, dt)
                mn = min(float(np.min(c.interior)) for c in self.state.concentrations)
                self.accumulators["min_concentration"] = min(
                    self.accumulators["min_concentration"], mn)
                if self.params.fluid_model != "Frozen":
                    force = electric_force(rho, self.state.potential, self.params.K)
                    fluid_step(self.state, self.params, force, dt,
                               projector=self._projector)
                self.accumulators["U_T"] += dt * grad_u_sq * grad_u_sq
                self.state.t += dt
                self.state.step += 1
            # final sample against a potential consistent with the final state
            rho = charge_density(self.state, self.species)
            problem = RobinPoissonProblem(rho=rho, epsilon=self.params.epsilon,
                                          tau=self.params.tau, xi=self.xi,
                                          method="separable")
            self.state.potential = solve_potential(problem,
                                                   solver_cache=self._solver_cache)
            grad_u_sq, u_sq, _ = velocity_gradient_norms(self.state.velocity)
            if self.shadow is not None:
                self._shadow_deviation()
            if self.write_outputs and ckpt_every:
                self._save_checkpoint()
            self._sample(grad_u_sq, u_sq, fh)
        except IonflowError as err:
            if fh is not None:
                fh.close()
            self._write_error_record(err)
            raise
        finally:
            if fh is not None and not fh.closed:
                fh.close()
        summary = self._summary(dt, total_steps)
        if self.write_outputs:
            out = self.echo["output"]["directory"]
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, SUMMARY_NAME), "w") as sfh:
                json.dump(summary, sfh, indent=2)
            if "fields" in self.echo["output"]["formats"]:
                self._dump_fields(out)
            if "figures" in self.echo["output"]["formats"]:
                from .report import render_run_figures
                render_run_figures(self.records, self.state, self.species, out)
        return summary

    def _write_error_record(self, err):
        if not self.write_outputs:
            return
        out = self.echo["output"]["directory"]
        os.makedirs(out, exist_ok=True)
        try:
            path = self._save_checkpoint(ABORT_CHECKPOINT_NAME)
        except Exception:
            path = None
        record = {
            "step": self.state.step,
            "t": self.state.t,
            "module": _ERROR_MODULE.get(type(err).__name__, "run"),
            "type": type(err).__name__,
            "reason": str(err),
            "checkpoint": path,
        }
        with open(os.path.join(out, ERROR_RECORD_NAME), "w") as fh:
            json.dump(record, fh, indent=2)

    def _summary(self, dt, total_steps):
        mass_drift = []
        if self.records:
            first = self.records[0]
            for i in range(len(self.species)):
                m0 = first.mass[i]
                drift = max(abs(r.mass[i] - m0) for r in self.records)
                mass_drift.append(drift / abs(m0) if m0 != 0 else drift)
        residuals = [abs(r.budget_residual) for r in self.records
                     if r.budget_residual is not None]
        summary = {
            "steps": total_steps,
            "t_end": self.state.t,
            "dt": dt,
            "max_abs_budget_residual": max(residuals) if residuals else None,
            "relative_mass_drift": mass_drift,
            "min_concentration": (None if math.isinf(self.accumulators["min_concentration"])
                                  else self.accumulators["min_concentration"]),
            "U_T": self.accumulators["U_T"],
            "rho_sq_time_integral": self.accumulators["rho_sq_integral"],
            "pair_max_deviation": self.accumulators["pair_max_deviation"],
            "exit_code": 0,
        }
        return summary

    def _dump_fields(self, out):
        from .report import dump_field
        fdir = os.path.join(out, "fields")
        os.makedirs(fdir, exist_ok=True)
        for i, c in enumerate(self.state.concentrations):
            dump_field(fdir, "c%d" % (i + 1), c.interior, self.grid, self.state.t)
        dump_field(fdir, "phi", self.state.potential.interior, self.grid, self.state.t)
        dump_field(fdir, "p", self.state.pressure.interior, self.grid, self.state.t)
        for a, comp in enumerate(self.state.velocity.components):
            dump_field(fdir, "u%d" % a, comp, self.grid, self.state.t)


class _PrevRecord:
    __slots__ = ("V", "Diss", "grad_u_sq", "t")

    def __init__(self, V, Diss, grad_u_sq, t):
        self.V = V
        self.Diss = Diss
        self.grad_u_sq = grad_u_sq
        self.t = t


def run_simulation(config, out_dir=None, until=None, write_outputs=True):
    sim = Simulation(config, out_dir=out_dir, until=until, write_outputs=write_outputs)
    return sim.run(), sim


def resume_simulation(checkpoint_path, out_dir=None, until=None, write_outputs=True):
    """Rebuild a simulation from a checkpoint and continue to t_end."""
    header, arrays = ckpt.load_checkpoint(checkpoint_path)
    config = validate_config(header["config"])
    sim = Simulation(config, out_dir=out_dir, until=until, write_outputs=write_outputs)
    state = sim.state
    for i in range(len(sim.species)):
        state.concentrations[i].data[...] = arrays["c%d" % (i + 1)]
    state.potential.data[...] = arrays["phi"]
    for a in range(sim.grid.dim):
        state.velocity.components[a][...] = arrays["u%d" % a]
    state.pressure.data[...] = arrays["p"]
    state.t = header["t"]
    state.step = header["step"]
    acc = dict(header["accumulators"])
    if acc.get("min_concentration") is None:
        acc["min_concentration"] = math.inf
    sim.accumulators.update(acc)
    if sim.shadow is not None:
        sim.shadow["rho"].data[...] = arrays["pair_rho"]
        sim.shadow["sigma"].data[...] = arrays["pair_sigma"]
        sim.shadow["max_dev"] = acc.get("pair_max_deviation") or 0.0
    return sim.run(), sim
