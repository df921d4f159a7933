"""olplab: a desk-scale laboratory for online linear programming.

Columns of a resource-allocation LP arrive one at a time as i.i.d.
draws; each must be irrevocably accepted or rejected.  The package
provides three dual-price decision policies (a static threshold, exact
re-estimation on a geometric schedule, and per-period resolving with
capacity-to-go), the sampled dual problem and solvers behind them, a
dense bounded-variable simplex core, stochastic input models, a Monte
Carlo benchmarking harness, and a config-driven CLI.
"""

__version__ = "0.1.0"

from .core import (CapacitySpec, ConfigError, ConstraintLedger, DualPrice,
                   ModelBounds, NumericalFailure, Order, SolverOptions,
                   instance_arrays, stopping_time)
from .simplex import BoxLpSession, LpSolution, solve_box_lp
from .dual import (SampledDualProblem, classify_binding, estimate_pstar,
                   f_value, solve_sampled_dual_exact, solve_sampled_dual_warm,
                   subgradient, subgradient_descent, taylor_identity_residual)
from .inputs import (FiniteSupport, MultiSecretary, RandomInputI,
                     RandomInputII, Replay, UniformSquare, generate_instance,
                     make_model, resolve_d)
from .policies import (ResolvingPolicy, ScheduledLearningPolicy,
                       StaticPricePolicy, geometric_schedule, make_ahd_policy,
                       make_dynamic_policy, make_static_policy, policy_step,
                       run_policy)
from .bench import (RegretReport, TrialResult, dual_convergence_experiment,
                    estimate_regret, lagrangian_gap, loglog_slope, run_trial,
                    run_trials, trajectory_export)

__all__ = [
    "__version__",
    "CapacitySpec", "ConfigError", "ConstraintLedger", "DualPrice",
    "ModelBounds", "NumericalFailure", "Order", "SolverOptions",
    "instance_arrays", "stopping_time",
    "BoxLpSession", "LpSolution", "solve_box_lp",
    "SampledDualProblem", "classify_binding", "estimate_pstar", "f_value",
    "solve_sampled_dual_exact", "solve_sampled_dual_warm", "subgradient",
    "subgradient_descent", "taylor_identity_residual",
    "FiniteSupport", "MultiSecretary", "RandomInputI", "RandomInputII",
    "Replay", "UniformSquare", "generate_instance", "make_model", "resolve_d",
    "ResolvingPolicy", "ScheduledLearningPolicy", "StaticPricePolicy",
    "geometric_schedule", "make_ahd_policy", "make_dynamic_policy",
    "make_static_policy", "policy_step", "run_policy",
    "RegretReport", "TrialResult", "dual_convergence_experiment",
    "estimate_regret", "lagrangian_gap", "loglog_slope", "run_trial",
    "run_trials", "trajectory_export",
]
