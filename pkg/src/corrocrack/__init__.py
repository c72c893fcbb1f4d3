"""Simulation of corrosion-induced cracking in reinforced concrete.

Reactive transport of dissolved iron, rust-layer pressure, precipitation
eigenstrain and phase-field cohesive fracture are advanced with a staggered
scheme on a 2D cross-section of an impressed-current test specimen.
"""
from .analysis import CampaignResult, PowerLaw, SlopeFit, correction_factor, crack_width_slope, surface_crack_width
from .chemistry import ChemistryConstants, RustComposition, composition, flux_reduction
from .config import CampaignConfig, emit_config, parse_config, parse_config_text
from .errors import (ConfigError, CorroCrackError, DomainError, FitError, MeshError, NumericalError,
                     OutputError, SolverError, StepRejected)
from .mechanics import MATERIAL_PRESETS, MaterialSet, calibrate_pfczm, compliance, rust_layer_pressure
from .mesh import Mesh, SpecimenGeometry, Tag, build_annulus_mesh, build_specimen_mesh
from .numerics import lambert_w0
from .solver import CaseConfig, RunResult, TimeSeries, run_case, staggered_step
from .transport import TransportProps, TransportState, step_transport

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig", "CampaignResult", "CaseConfig", "ChemistryConstants", "ConfigError",
    "CorroCrackError", "DomainError", "FitError", "MATERIAL_PRESETS", "MaterialSet", "Mesh",
    "MeshError", "NumericalError", "OutputError", "PowerLaw", "RunResult", "RustComposition",
    "SlopeFit", "SolverError", "SpecimenGeometry", "StepRejected", "Tag", "TimeSeries",
    "TransportProps", "TransportState", "build_annulus_mesh", "build_specimen_mesh",
    "calibrate_pfczm", "compliance", "composition", "correction_factor", "crack_width_slope",
    "emit_config", "flux_reduction", "lambert_w0", "parse_config", "parse_config_text",
    "run_case", "rust_layer_pressure", "staggered_step", "step_transport", "surface_crack_width",
]
