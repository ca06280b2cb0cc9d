"""Independent brute-force and analytic oracles for the solver modules.

Every oracle here is a separate code path from the module it certifies:
the dense assembly walks cells with explicit loops, the manufactured
solutions are hand-derived closed forms, and the pair-reduction runs the
two steppers side by side.  Suites are deterministic under a fixed seed.
"""

from .dense import dense_poisson_matrix, dense_poisson_oracle
from .mms import ConvergenceReport, mms_convergence
from .pair_reduction import rho_sigma_equivalence
from .trace import TraceCheckReport, trace_inequality_check
from .budget import budget_refinement_study
from .suites import run_suite, suite_names

__all__ = [
    "dense_poisson_matrix", "dense_poisson_oracle",
    "ConvergenceReport", "mms_convergence",
    "rho_sigma_equivalence",
    "TraceCheckReport", "trace_inequality_check",
    "budget_refinement_study",
    "run_suite", "suite_names",
]
