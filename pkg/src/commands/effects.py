import logging

import numpy as np

from ..cli import print_info, print_success, print_warning
from ..config import PipelineConfig
from ..estimation.bootstrap import BootstrapResult, CoxCateEstimator, bootstrap_cate_ci, bootstrap_plan
from ..estimation.iptw import SpecId
from ..utils import write_frame
from ..workspace import Artifact, Workspace
from .options import add_pipeline_options, load_pipeline, read_analysis_frame, read_weights
from .weights import weight_options

logger = logging.getLogger(__name__)


def run_effects(config: PipelineConfig, workspace: Workspace) -> BootstrapResult:
    """CATE point estimates on the configured grid with percentile bootstrap bounds"""
    workspace.require(Artifact.COXFIT)
    frame = read_analysis_frame(workspace)
    spec = SpecId.parse(config.weights.spec).value
    weights = read_weights(workspace, frame, spec)
    effects = config.effects
    grid = effects.grid

    plan = bootstrap_plan(frame, weights, n_replicates=effects.bootstrap_B, seed=effects.seed)
    estimator = CoxCateEstimator(
        frame,
        weights,
        grid,
        tie_method=config.fit.tie_method,
        tol=config.fit.tol,
        max_iter=config.fit.max_iter,
        reestimate_spec=spec if effects.reestimate_weights else None,
        weight_options=weight_options(config),
    )
    result = bootstrap_cate_ci(
        plan,
        estimator,
        grid,
        level=effects.level,
        workers=effects.workers,
        max_failure_rate=effects.max_failure_rate,
    )

    write_frame(workspace.path(Artifact.CATE), result.frame())
    if effects.store_replicates:
        write_frame(workspace.path(Artifact.REPLICATES), result.replicates_frame())
    return result


def cmd_effects(args):
    """Estimate CATE curves with bootstrap confidence bounds"""
    config, workspace = load_pipeline(args)
    result = run_effects(config, workspace)
    if result.failed:
        print_warning(f"{len(result.failed)} bootstrap replicates failed and were excluded")
    print_success(f"CATE curves from {result.n_succeeded} bootstrap replicates")
    for cate in result.results:
        k = int(np.argmin(np.abs(cate.times - config.effects.horizon)))
        print_info(
            f"a={cate.a} v={cate.v} at {cate.times[k]:g} months: "
            f"{cate.estimate[k]:.2f} [{cate.lower[k]:.2f}, {cate.upper[k]:.2f}]"
        )
    print_info(f"Output: {workspace.path(Artifact.CATE)}")
    return True


def setup_parser(parser):
    """Setup argument parser for effects command"""
    add_pipeline_options(parser)
