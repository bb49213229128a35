import logging
from typing import Any, Dict

import pandas as pd

from ..cli import print_info, print_success, print_warning
from ..config import PipelineConfig
from ..estimation.base import NumericalError
from ..estimation.iptw import SMD_FORMULA, SpecComparison, SpecId, balance_table, compare_specs, weight_diagnostics
from ..estimation.splines import KnotRule
from ..utils import write_frame, write_json
from ..workspace import Artifact, Workspace
from .options import add_pipeline_options, load_pipeline, read_analysis_frame

logger = logging.getLogger(__name__)


def weight_options(config: PipelineConfig) -> Dict[str, Any]:
    """Keyword arguments of stabilized_weights taken from the configuration"""
    return {
        "tol": config.glm.tol,
        "max_iter": config.glm.max_iter,
        "knot_rule": KnotRule(config.glm.knot_rule),
        "truncate_percentile": config.weights.truncate_percentile,
    }


def _balance(frame: pd.DataFrame, weights=None) -> Dict[str, Any]:
    try:
        return balance_table(frame, weights).to_dict()
    except NumericalError as e:
        logger.warning("Balance table unavailable: %s", e)
        return {"error": f"{type(e).__name__}: {e}"}


def run_weights(config: PipelineConfig, workspace: Workspace) -> SpecComparison:
    """
    Fit every compared specification and write weights.csv (all successful
    specs, long format), diagnostics.json and the comparison table.

    Raises:
        NumericalError: the selected specification itself failed
    """
    frame = read_analysis_frame(workspace)
    selected = SpecId.parse(config.weights.spec).value
    specs = list(dict.fromkeys([SpecId.parse(s).value for s in config.weights.compare] + [selected]))
    comparison = compare_specs(frame, specs, workers=config.weights.workers, **weight_options(config))

    unweighted = _balance(frame)
    report: Dict[str, Any] = {}
    for name, result in comparison.results.items():
        diagnostics = weight_diagnostics(
            result, frame, mean_tolerance=config.weights.mean_tolerance, max_weight=config.weights.max_weight
        )
        report[name] = {
            "diagnostics": diagnostics.to_dict(),
            "flags": diagnostics.flags,
            "balance": {"unweighted": unweighted, "weighted": _balance(frame, result)},
            "truncated_at": list(result.truncated_at) if result.truncated_at else None,
            "denominator_columns": list(result.denominator_fit.columns),
            "denominator_log_likelihood": result.denominator_fit.log_likelihood,
        }

    frames = [comparison.results[name].to_frame() for name in specs if name in comparison.results]
    if frames:
        write_frame(workspace.path(Artifact.WEIGHTS), pd.concat(frames, ignore_index=True))
    write_frame(workspace.path(Artifact.WEIGHTS_COMPARISON), comparison.table())
    write_json(
        workspace.path(Artifact.DIAGNOSTICS),
        {
            "selected": selected,
            "specs": report,
            "failures": dict(comparison.failures),
            "smd_formula": SMD_FORMULA,
        },
    )

    if selected not in comparison.results:
        raise NumericalError(f"Selected weight specification {selected} failed: {comparison.failures[selected]}")
    return comparison


def cmd_weights(args):
    """Fit the weight specifications and report their diagnostics"""
    config, workspace = load_pipeline(args)
    comparison = run_weights(config, workspace)
    selected = SpecId.parse(config.weights.spec).value
    for name, error in comparison.failures.items():
        print_warning(f"{name} failed: {error}")
    summary = comparison.results[selected].summary
    print_success(
        f"{selected} weights: mean {summary.mean:.3f} (sd {summary.sd:.3f}), "
        f"range [{summary.min:.3f}, {summary.max:.3f}]"
    )
    print_info(f"Diagnostics: {workspace.path(Artifact.DIAGNOSTICS)}")
    return True


def setup_parser(parser):
    """Setup argument parser for weights command"""
    add_pipeline_options(parser)
