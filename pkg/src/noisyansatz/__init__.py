"""Noisy parameterized quantum channels: simulation, control optimization and diagnostics."""

from .ansatz import NmrModel, ParameterTrajectory, apply_constraints, build_generators, init_parameters
from .channels import LayeredChannel, NoiseModel, evolve, evolve_unitary
from .diff import ControlProblem, fisher_state, fisher_unitary, lie_closure, numerical_rank, value_and_gradient
from .fit import fit_critical_depth
from .fperror import FpErrorModel, classical_bound, noisy_chain_multiply, quantum_bound
from .objectives import StatePreparation, UnitaryCompilation, state_metrics
from .optimize import OptimizerConfig, minimize
from .sweep import SampleRecord, SweepSpec, aggregate, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ControlProblem",
    "FpErrorModel",
    "LayeredChannel",
    "NmrModel",
    "NoiseModel",
    "OptimizerConfig",
    "ParameterTrajectory",
    "SampleRecord",
    "StatePreparation",
    "SweepSpec",
    "UnitaryCompilation",
    "aggregate",
    "apply_constraints",
    "build_generators",
    "classical_bound",
    "evolve",
    "evolve_unitary",
    "fisher_state",
    "fisher_unitary",
    "fit_critical_depth",
    "init_parameters",
    "lie_closure",
    "minimize",
    "noisy_chain_multiply",
    "numerical_rank",
    "quantum_bound",
    "run_sweep",
    "state_metrics",
    "value_and_gradient",
]
