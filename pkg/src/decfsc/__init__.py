"""Fixed-size stochastic controllers for decentralized POMDPs.

Find memory-bounded joint policies for infinite-horizon multi-agent
planning problems: a projected-gradient solver over per-agent controller
tables (optionally coordinated through a shared correlation device), a
bounded-policy-iteration baseline, exact policy evaluation with gradients,
Monte Carlo validation, three classic benchmark models, text formats, and
an exporter producing the equivalent algebraic program for external
solvers.

Hot numeric kernels run through numba when available; set DECFSC_BACKEND
to "numpy" or "numba" to force a backend ("auto" by default).
"""

from .backend import get_kernels, name as backend_name, using_numba
from .controller import (
    SIMPLEX_TOL,
    CorrelationDevice,
    Fsc,
    JointPolicy,
    attach_trivial_device,
    dims_match,
    random_deterministic,
    simplex_report,
    uncorrelate,
    uniform_device,
)
from .decbpi import (
    BpiConfig,
    LpProblem,
    LpResult,
    NodeImprovement,
    apply_improvement,
    improve_node,
    solve_bpi,
    solve_lp,
)
from .domains import (
    BUILDERS,
    BroadcastParams,
    RecyclingParams,
    TigerParams,
    broadcast,
    build,
    recycling,
    tiger,
)
from .evaluation import (
    PolicyGradient,
    ValueTable,
    bellman_residual,
    evaluate,
    gradient,
    objective,
    value_and_gradient,
)
from .io import (
    BellmanRow,
    InstanceDocument,
    LinearRow,
    NlpExport,
    ParseError,
    export_nlp,
    parse_instance,
    parse_policy,
    write_instance,
    write_policy,
)
from .model import (
    PROB_TOL,
    DecPomdp,
    Violation,
    flatten_joint,
    joint_actions,
    joint_components,
    joint_observations,
    unflatten_joint,
    validate,
)
from .optimizer import (
    NlpConfig,
    RestartRecord,
    SolveReport,
    project_simplex,
    solve_nlp,
    solve_restarts,
)
from .simulate import (
    RolloutConfig,
    ValueEstimate,
    estimate_value,
    truncation_horizon,
)

__version__ = "0.1.0"

__all__ = [
    "BUILDERS",
    "BellmanRow",
    "BpiConfig",
    "BroadcastParams",
    "CorrelationDevice",
    "DecPomdp",
    "Fsc",
    "InstanceDocument",
    "JointPolicy",
    "LinearRow",
    "LpProblem",
    "LpResult",
    "NlpConfig",
    "NlpExport",
    "NodeImprovement",
    "ParseError",
    "PolicyGradient",
    "PROB_TOL",
    "RecyclingParams",
    "RestartRecord",
    "RolloutConfig",
    "SIMPLEX_TOL",
    "SolveReport",
    "TigerParams",
    "ValueEstimate",
    "ValueTable",
    "Violation",
    "apply_improvement",
    "attach_trivial_device",
    "backend_name",
    "bellman_residual",
    "broadcast",
    "build",
    "dims_match",
    "estimate_value",
    "evaluate",
    "export_nlp",
    "flatten_joint",
    "get_kernels",
    "gradient",
    "improve_node",
    "joint_actions",
    "joint_components",
    "joint_observations",
    "objective",
    "parse_instance",
    "parse_policy",
    "project_simplex",
    "random_deterministic",
    "recycling",
    "simplex_report",
    "solve_bpi",
    "solve_lp",
    "solve_nlp",
    "solve_restarts",
    "tiger",
    "truncation_horizon",
    "uncorrelate",
    "unflatten_joint",
    "uniform_device",
    "using_numba",
    "validate",
    "value_and_gradient",
    "write_instance",
    "write_policy",
    "__version__",
]
