import logging

from ..cli import print_info, print_success, print_warning
from ..config import ConfigError, PipelineConfig
from ..estimation.effects import STRATA, STRATEGIES
from ..records.io import Schema, write_patients
from ..simulation import SimulationResult, simulate
from ..utils import write_json
from ..workspace import Artifact, Workspace
from .options import add_pipeline_options, load_pipeline

logger = logging.getLogger(__name__)


def run_simulate(config: PipelineConfig, workspace: Workspace) -> SimulationResult:
    """Draw a dataset and write it, with its ground truth, under data/"""
    if config.simulate is None:
        raise ConfigError("No simulate section configured")
    sim_config = config.simulate.build()
    result = simulate(sim_config)

    write_patients(result.records, workspace.path(Artifact.DATA), Schema.LONG)
    grid = config.effects.grid
    payload = {
        "truth": result.truth.to_dict(),
        "simulation": dict(sim_config.to_dict(), preset=config.simulate.preset),
        "assignments": {
            c.id: {"exposure": c.exposure, "effect_modifier": c.effect_modifier, "rdi": c.rdi}
            for c in result.covariates
        },
        "injected": {reason: list(ids) for reason, ids in result.injected.items()},
        "true_cate": [
            {"a": a, "v": v, "t": float(t), "value": result.truth.cate(a, v, float(t))}
            for a in STRATEGIES
            for v in STRATA
            for t in grid
        ],
    }
    write_json(workspace.path(Artifact.TRUTH), payload)
    return result


def cmd_simulate(args):
    """Generate a synthetic dataset with known ground truth"""
    if args.out is None and args.config is None:
        print_warning("Writing to the default output directory 'out'")
    config, workspace = load_pipeline(args)
    result = run_simulate(config, workspace)
    events = sum(1 for r in result.records if r.efs_event)
    print_success(f"Simulated {len(result.records)} patients ({events} events)")
    print_info(f"Data: {workspace.path(Artifact.DATA)}")
    print_info(f"Truth: {workspace.path(Artifact.TRUTH)}")
    return True


def setup_parser(parser):
    """Setup argument parser for simulate command"""
    add_pipeline_options(parser)
