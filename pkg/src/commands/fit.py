import logging
from typing import Tuple

import numpy as np
import pandas as pd

from ..cli import print_info, print_success
from ..config import PipelineConfig
from ..estimation.bootstrap import SUB_COHORTS
from ..estimation.iptw import EFFECT_MODIFIER, EXPOSURE, SpecId
from ..estimation.survival import CoxFit, cox_design, fit_weighted_cox, survival_curves
from ..utils import write_frame, write_json
from ..workspace import Artifact, Workspace
from .options import add_pipeline_options, load_pipeline, read_analysis_frame, read_weights

logger = logging.getLogger(__name__)


def fit_both(config: PipelineConfig, frame: pd.DataFrame, weights: np.ndarray) -> Tuple[CoxFit, CoxFit]:
    """Weighted marginal structural Cox model and the unweighted Cox model on the same design"""
    times = frame["efs_time_months"].to_numpy(dtype=float)
    events = frame["efs_event"].to_numpy(dtype=int)
    design = cox_design(frame[EXPOSURE], frame[EFFECT_MODIFIER])
    options = {"tie_method": config.fit.tie_method, "tol": config.fit.tol, "max_iter": config.fit.max_iter}
    weighted = fit_weighted_cox(times, events, design, weights, **options)
    unweighted = fit_weighted_cox(times, events, design, None, **options)
    return weighted, unweighted


def coefficient_table(weighted: CoxFit, unweighted: CoxFit) -> pd.DataFrame:
    """Side by side: robust intervals for the weighted fit, model-based for the unweighted one"""
    frames = []
    for model, fit, robust in (("weighted", weighted, True), ("unweighted", unweighted, False)):
        table = fit.summary(robust=robust)
        table.insert(0, "model", model)
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def run_fit(config: PipelineConfig, workspace: Workspace) -> Tuple[CoxFit, CoxFit]:
    frame = read_analysis_frame(workspace)
    spec = SpecId.parse(config.weights.spec).value
    weighted, unweighted = fit_both(config, frame, read_weights(workspace, frame, spec))

    write_json(
        workspace.path(Artifact.COXFIT),
        {"spec": spec, "weighted": weighted.to_dict(), "unweighted": unweighted.to_dict()},
    )
    write_frame(workspace.path(Artifact.COEFFICIENTS), coefficient_table(weighted, unweighted))
    write_frame(workspace.path(Artifact.CURVES), survival_curves(weighted, SUB_COHORTS))
    return weighted, unweighted


def cmd_fit(args):
    """Fit the weighted Cox model and the unweighted comparison"""
    config, workspace = load_pipeline(args)
    weighted, unweighted = run_fit(config, workspace)
    print_success(f"Fitted Cox models on {weighted.n_subjects} patients ({weighted.n_events} events)")
    for term, w, u in zip(weighted.terms, weighted.hazard_ratios, unweighted.hazard_ratios):
        print_info(f"{term:6s} HR weighted {w:.3f}  unweighted {u:.3f}")
    print_info(f"Coefficients: {workspace.path(Artifact.COEFFICIENTS)}")
    return True


def setup_parser(parser):
    """Setup argument parser for fit command"""
    add_pipeline_options(parser)
