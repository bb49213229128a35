"""
Options and artifact loaders shared by the pipeline commands.
"""

import argparse
import logging
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from ..config import PipelineConfig, load_config
from ..covariates import BASELINE_COLUMNS, DERIVED_COLUMNS
from ..estimation.iptw import SpecId
from ..estimation.survival import TieMethod
from ..records.base import DataError, MissingColumn
from ..workspace import Artifact, Workspace, WorkspaceError

logger = logging.getLogger(__name__)

WEIGHT_COLUMNS = ("id", "spec", "sw")


def add_pipeline_options(parser: argparse.ArgumentParser) -> None:
    """Options every pipeline command accepts"""
    parser.add_argument(
        "--config",
        type=Path,
        metavar="PATH",
        help="JSON configuration file (defaults: simulate with the default preset)",
    )
    parser.add_argument("--seed", type=int, metavar="N", help="Seed of simulation and bootstrap")
    parser.add_argument("--out", metavar="DIR", help="Output directory")
    parser.add_argument(
        "--spec",
        type=str.upper,
        choices=[s.value for s in SpecId],
        help="Weight specification used for the outcome model",
    )
    parser.add_argument("--bootstrap-B", dest="bootstrap_B", type=int, metavar="N", help="Bootstrap replicates")
    parser.add_argument("--tie", choices=[t.value for t in TieMethod], help="Tie handling of the Cox model")


def load_pipeline(args: argparse.Namespace, check_paths: bool = True) -> Tuple[PipelineConfig, Workspace]:
    """
    Configuration with command-line overrides applied, and its workspace.

    Raises:
        ConfigError: invalid configuration
        WorkspaceError: output directory cannot be created
    """
    config = load_config(getattr(args, "config", None)).with_overrides(
        seed=getattr(args, "seed", None),
        out=getattr(args, "out", None),
        spec=getattr(args, "spec", None),
        bootstrap_B=getattr(args, "bootstrap_B", None),
        tie=getattr(args, "tie", None),
    )
    config.validate(check_paths=check_paths)
    return config, Workspace(config.out_dir).create()


def read_analysis_frame(workspace: Workspace) -> pd.DataFrame:
    """Analysis cohort written by the derive stage"""
    path = workspace.require(Artifact.DERIVED)
    frame = pd.read_csv(path, dtype={"id": str, "trial": str, "age_group": str, "gender": str})
    for column in DERIVED_COLUMNS + BASELINE_COLUMNS:
        if column not in frame.columns:
            raise MissingColumn(column, str(path))
    if frame.empty:
        raise DataError(f"{path}: analysis cohort is empty")
    return frame


def read_weights(workspace: Workspace, frame: pd.DataFrame, spec: str) -> np.ndarray:
    """
    Weights of one specification aligned with the rows of ``frame``.

    Raises:
        WorkspaceError: the specification was not fitted
        DataError: the weight file does not cover the analysis cohort
    """
    path = workspace.require(Artifact.WEIGHTS)
    weights = pd.read_csv(path, dtype={"id": str, "spec": str})
    for column in WEIGHT_COLUMNS:
        if column not in weights.columns:
            raise MissingColumn(column, str(path))
    selected = weights[weights["spec"] == spec]
    if selected.empty:
        raise WorkspaceError(f"{path} holds no weights of {spec}; it failed or was not compared")
    by_id = selected.set_index("id")["sw"]
    missing = sorted(set(frame["id"]) - set(by_id.index))
    if missing:
        raise DataError(f"{path}: no {spec} weight for patient {missing[0]}")
    return by_id.loc[frame["id"]].to_numpy(dtype=float)
