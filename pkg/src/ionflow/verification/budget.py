"""Refinement study of the discrete energy-budget residual.

At fixed spatial resolution the residual of
    (V(t+dt) - V(t))/dt + Diss(t) + (nu/K) ||grad u(t)||^2 = 0
is first order in dt, so halving dt must shrink its maximum by at least
35 percent per level on a smooth run.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from ..errors import InvariantViolation
from ..orchestrator import Simulation
from ..scenarios import scenario_with


@dataclass
class BudgetStudyReport:
    dts: list
    max_residuals: list
    ratios: list
    passed: bool
    details: dict = dc_field(default_factory=dict)

    def table(self):
        lines = ["energy-budget residual refinement: %s"
                 % ("pass" if self.passed else "FAIL")]
        for dt, r in zip(self.dts, self.max_residuals):
            lines.append("  dt=%.6e   max |residual| %.6e" % (dt, r))
        for i, q in enumerate(self.ratios):
            lines.append("  halving %d: ratio %.3f (need <= 0.65)" % (i + 1, q))
        return "\n".join(lines)


def _base_config(t_end):
    return scenario_with(
        "two_species_relaxation",
        grid={"cells": [16, 16]},
        run={"dt": "auto", "t_end": t_end, "sample_every": 1},
        output={"formats": []},
    )


def budget_refinement_study(base_config=None, levels=3, t_end=0.05):
    """Run the dt ladder and assert a >= 35% drop per halving."""
    dts = []
    maxima = []
    for k in range(levels):
        config = base_config if base_config is not None else _base_config(t_end)
        sim = Simulation(config, write_outputs=False)
        dt0 = sim.resolve_dt()
        if k > 0:
            sim.accumulators["dt_resolved"] = dt0 / 2 ** k
        sim.run()
        dts.append(sim.accumulators["dt_resolved"])
        residuals = [abs(r.budget_residual) for r in sim.records
                     if r.budget_residual is not None]
        if not residuals:
            raise InvariantViolation("budget study produced no residual samples")
        maxima.append(max(residuals))
    ratios = [maxima[i + 1] / maxima[i] for i in range(len(maxima) - 1)]
    passed = all(q <= 0.65 for q in ratios)
    return BudgetStudyReport(dts=dts, max_residuals=maxima, ratios=ratios,
                             passed=passed, details={"t_end": t_end})
