"""Logical Wigner's-friend scenarios compiled to augmented circuits, with setting-aware reasoning."""

from .compiler import AugmentedCircuit, compile_circuit, dump, standard_reduction
from .epistemic import (
    AssumptionSet,
    QuantumModel,
    Statement,
    chain,
    check_setting_independence,
    paradox_scan,
    strip_settings,
)
from .errors import LWFSError
from .formats import parse_scenario, serialize
from .library import classical_collider, hardy_map, load
from .predict import (
    SettingPrior,
    distribution,
    event_probability,
    joint_probability,
    prediction_with_prior,
    setting_conditioned,
)
from .scenario import AgentSpec, Channel, LWFSpec, validate
from .tensor import DensityOperator, LinearOperator, RegisterLayout, StateVector

__all__ = [
    "AgentSpec", "AssumptionSet", "AugmentedCircuit", "Channel", "DensityOperator", "LWFSError",
    "LWFSpec", "LinearOperator", "QuantumModel", "RegisterLayout", "SettingPrior", "Statement",
    "StateVector", "chain", "check_setting_independence", "classical_collider", "compile_circuit",
    "distribution", "dump", "event_probability", "hardy_map", "joint_probability", "load",
    "paradox_scan", "parse_scenario", "prediction_with_prior", "serialize", "setting_conditioned",
    "standard_reduction", "strip_settings", "validate",
]
