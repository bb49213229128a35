"""
rdicausal - causal effect of chemotherapy dose intensity on event-free survival

Emulates a target trial on osteosarcoma chemotherapy records: received dose
intensity (RDI) is the exposure, toxicity the time-varying confounder and
histological response the effect modifier.

Key Components:
- records: patient data model, CSV ingestion and eligibility
- covariates: RDI, exposure category and MOTox scores
- estimation: multinomial weight models, weighted Cox regression, RMST
  contrasts and the stratified weighted bootstrap
- simulation: synthetic datasets with known ground truth
- cli / commands: the staged command-line pipeline
"""

__version__ = "0.1.0"

from .config import ConfigError, PipelineConfig, load_config
from .covariates import DerivedCovariates, derive_all, derive_covariates
from .records import PatientRecord, apply_eligibility, read_patients, write_patients
from .simulation import SimConfig, SimTruth, preset, simulate, true_cate

__all__ = [
    'ConfigError',
    'PipelineConfig',
    'load_config',
    'DerivedCovariates',
    'derive_all',
    'derive_covariates',
    'PatientRecord',
    'apply_eligibility',
    'read_patients',
    'write_patients',
    'SimConfig',
    'SimTruth',
    'preset',
    'simulate',
    'true_cate',
]
