import logging

from ..cli import print_info, print_success
from ..utils import write_json
from ..workspace import Artifact
from .derive import run_derive
from .effects import run_effects
from .fit import run_fit
from .options import add_pipeline_options, load_pipeline
from .simulate import run_simulate
from .weights import run_weights

logger = logging.getLogger(__name__)


def cmd_all(args):
    """Run simulate (when configured), derive, weights, fit and effects"""
    config, workspace = load_pipeline(args)
    write_json(workspace.path(Artifact.CONFIG), config.to_dict())

    if config.input.path is None:
        result = run_simulate(config, workspace)
        print_info(f"Simulated {len(result.records)} patients")
    else:
        print_info(f"Reading {config.input.path}")

    frame = run_derive(config, workspace)
    print_info(f"{len(frame)} eligible patients")
    run_weights(config, workspace)
    weighted, _ = run_fit(config, workspace)
    print_info(f"Weighted Cox fit: {weighted.n_events} events")
    bootstrap = run_effects(config, workspace)

    write_json(workspace.path(Artifact.MANIFEST), workspace.checksums())
    print_success(f"Pipeline complete ({bootstrap.n_succeeded} bootstrap replicates)")
    print_info(f"Outputs: {workspace.root}")
    return True


def setup_parser(parser):
    """Setup argument parser for all command"""
    add_pipeline_options(parser)
