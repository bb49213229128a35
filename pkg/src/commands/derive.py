import logging

import pandas as pd

from ..cli import print_info, print_success
from ..config import PipelineConfig
from ..covariates import build_analysis_frame, derive_all
from ..estimation.cohort import describe_cohort
from ..records import apply_eligibility, read_patients
from ..utils import write_frame, write_json
from ..workspace import Artifact, Workspace
from .options import add_pipeline_options, load_pipeline

logger = logging.getLogger(__name__)


def run_derive(config: PipelineConfig, workspace: Workspace) -> pd.DataFrame:
    """
    Read the dataset, select the analysis cohort and derive covariates.

    Writes consort.json, derived.csv (one row per eligible patient with
    baseline fields and outcome) and the descriptive cohort table.
    """
    source = workspace.input_location(config.input.path, config.input.schema)
    records = read_patients(source, config.input.schema)

    eligibility = apply_eligibility(records)
    consort = eligibility.consort()
    write_json(workspace.path(Artifact.CONSORT), consort.to_dict())

    covariates = derive_all(eligibility.eligible)
    frame = build_analysis_frame(eligibility.eligible, covariates)
    write_frame(workspace.path(Artifact.DERIVED), frame)

    table, tests = describe_cohort(frame)
    write_frame(workspace.path(Artifact.COHORT), table)
    write_json(workspace.path(Artifact.COHORT_TESTS), tests)
    return frame


def cmd_derive(args):
    """Apply eligibility criteria and derive RDI, exposure and MOTox covariates"""
    config, workspace = load_pipeline(args)
    frame = run_derive(config, workspace)
    counts = frame["exposure"].value_counts().reindex([0, 1, 2], fill_value=0).tolist()
    print_success(f"Derived covariates for {len(frame)} eligible patients")
    print_info(f"Exposure groups (standard, reduced, highly reduced): {counts}")
    print_info(f"Output: {workspace.path(Artifact.DERIVED)}")
    return True


def setup_parser(parser):
    """Setup argument parser for derive command"""
    add_pipeline_options(parser)
