"""Simulation, first variations and maximum-principle checks for controlled
jump-diffusions whose drift is only piecewise Lipschitz in the state."""

__version__ = "0.1.0"

from .drift import DriftDecomposition, Piece, PiecewiseLipschitzFn
from .errors import (EmptyBundle, JumpCtlError, MissingNoise, NoConvergence, NonFiniteState, NoValidC,
                     RankDeficient, ZeroJump)
from .jumps import NO_JUMPS, JumpModel, constant_jumps, normal_jumps, sample_jumps
from .policy import ControlPolicy, ReplayControl
from .simulate import PathBundle, SamplePath, SimConfig, evaluate_cost, simulate_bundle, simulate_path
from .stats import MonteCarloEstimate
from .transform import TransformG, discontinuity_coefficients, select_c, simulate_transformed
from .mollify import Mollifier, MollifiedDrift, mollified_drift, mollify
from .smp import (Objective, adjoint_nested_mc, adjoint_regression, closed_loop_drift, first_variation,
                  first_variation_fd, necessary_condition_scan, sign_relation_check)
from .insurance import SurplusModel, policy_library, sweep_lambda, sweep_T, sweep_tau
from .diagnostics import beta_half, density_sup_scan, kde_sup, last_jump_gap_moment
