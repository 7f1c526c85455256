"""Simulation and tomography of path-entangled two-photon states."""
__version__ = "0.1.0"

from .correlations import kind_rate, normalized_rate, predict, predict_R_comp, rate_curves
from .distinguishability import VisibleStateTomography, hom_source_vis, mle_reconstruct_vis
from .fock import lift_unitary, permanent
from .optics import SetupConfig, build_analysis_setup, build_hom_source
from .records import MeasurementRecord, read_records, write_records
from .states import PSI_2002, PathDensityMatrix, VisDensityMatrix, fixture
from .synth import ExperimentPlan, run_campaign, sample_campaign, sample_records
from .tomography import (
    LinearInversionTomography,
    MaximumLikelihoodTomography,
    fidelity,
    fidelity_scan,
    linear_reconstruct,
    mle_reconstruct,
    source_metrics,
)

__all__ = [
    "ExperimentPlan",
    "LinearInversionTomography",
    "MaximumLikelihoodTomography",
    "MeasurementRecord",
    "PSI_2002",
    "PathDensityMatrix",
    "SetupConfig",
    "VisDensityMatrix",
    "VisibleStateTomography",
    "build_analysis_setup",
    "build_hom_source",
    "fidelity",
    "fidelity_scan",
    "fixture",
    "hom_source_vis",
    "kind_rate",
    "lift_unitary",
    "linear_reconstruct",
    "mle_reconstruct",
    "mle_reconstruct_vis",
    "normalized_rate",
    "permanent",
    "predict",
    "predict_R_comp",
    "rate_curves",
    "read_records",
    "run_campaign",
    "sample_campaign",
    "sample_records",
    "source_metrics",
    "write_records",
]
