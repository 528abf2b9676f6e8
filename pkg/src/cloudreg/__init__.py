"""cloudreg: cloud-model controller toolkit.

Stochastic triangle/normal membership-cloud controllers, numeric
certification of their relay + PD structure split, closed-loop plant
benchmarks (dead-time LTI, nonlinear inverted pendulum), and an LQ
baseline, all reproducible under seeding.
"""

from .analysis import (
    LqController,
    LqDesign,
    REFERENCE_GAMMA,
    REFERENCE_P_MATRICES,
    REFERENCE_PHI_K,
    ResponseMetrics,
    RiccatiError,
    build_stability_report,
    compute_metrics,
    is_positive_definite,
    lq_design,
    lyapunov_residual,
)
from .clouds import (
    CloudDrop,
    NormalCloud,
    TriangleCloud,
    backward_estimate_normal,
    backward_mean,
    drops_to_csv,
    forward_drops,
    normal_membership,
    sample_entropy,
    triangle_membership,
)
from .controller import (
    CloudController,
    ConsequentFamily,
    ControllerConfig,
    ControllerState,
    DegenerateCellError,
    GeneralCloudController,
    InferenceRule,
    Partition,
    RuleBase,
    aggregate,
    build_partition,
    consequent_singletons,
    controller_step,
    fire_corner_weights,
    general_controller_step,
    locate_cell,
    scale_and_clamp,
)
from .decomposition import (
    DecompositionReport,
    DecompositionCertificate,
    global_term,
    local_gains,
    local_term,
    local_term_complement,
    relay_table,
    verify_decomposition,
)
from .plants import (
    FrictionModel,
    LtiPlant,
    PendulumParams,
    PendulumPlant,
    SimConfig,
    SimulationDiverged,
    StateSpacePlant,
    Trajectory,
    ZeroController,
    given_linear_system,
    linearize_pendulum,
    make_lti_from_tf,
    pendulum_deriv,
    rk4_step,
    simulate_closed_loop,
)
from .rng import RandomSource, derive_seed

__version__ = "0.1.0"
