"""Distributed primal-dual solvers for conically coupled resource sharing.

Modules
-------
cones      supported cones, projections, membership
prox       proximal operators for the nonsmooth objective terms
graphs     topologies, gossip weights, round schedules
mixing     communication budgets and consensus mixers
solver     the distributed and centralized primal-dual iterations
dualbound  multiplier-norm bounds from interior points
problems   sparse-recovery benchmark generation and reformulation
baseline   Jacobi proximal ADMM comparison solver
metrics    progress measures and the CSV row schema
harness    experiment configs, replication running, artifact writing
report     figure rendering for finished runs
cli        the coneshare command line tool
"""

from .cones import (
    MEMBERSHIP_TOL, Cone, NonnegOrthant, Product, SecondOrder, Zero,
    dist_cone, in_cone, in_dual, in_polar, project_cone, project_cone_ball,
    project_polar,
)
from .dualbound import dual_bound, interior_radius
from .graphs import (
    Graph, MixingDecay, Schedule, StaticSchedule, WindowSchedule, digraph_12,
    load_edge_list, save_edge_list, small_world,
)
from .metrics import CSV_COLUMNS, MetricContext, MetricRow
from .mixing import (
    Budget, ConsensusGeometry, ExactMixer, GossipMixer, constant_budget,
    default_budget, exact_projection, explicit_budget, logarithmic_budget,
    polynomial_budget,
)
from .problems import (
    BpdInstance, bpd_metric_context, bpd_to_sharing, chi_square_quantile,
    gen_bpd, load_instance, save_instance, slater_dual_bound,
)
from .prox import (
    BallIndicator, L1Norm, PinnedValue, SeparableProx, ZeroFunction,
    project_ball, soft_threshold,
)
from .baseline import ProxJadmmConfig, prox_jadmm_run
from .solver import (
    AgentData, NumericalError, Reference, RunTrace, SharingProblem,
    StepSizeError, StepSizes, centralized_pda_run, curvature_steps,
    default_dynamic_steps, default_static_steps, dpda_d_run, dpda_s_run,
    ergodic_gap_bound_dynamic, ergodic_gap_bound_static, ergodic_gap_dynamic,
    ergodic_gap_static, reference_solution, validate_step_sizes,
)

__version__ = "0.1.0"
