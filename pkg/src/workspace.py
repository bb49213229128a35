"""
Output directory of a pipeline run.

Every stage reads the artifacts of the stages before it from the same
directory, so commands can be run one at a time or all together.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Union

from .records.io import Schema
from .utils import calculate_file_hash, ensure_directory

logger = logging.getLogger(__name__)


class Artifact(Enum):
    """Files written by the pipeline, relative to the output directory"""
    DATA = "data"
    TRUTH = "data/truth.json"
    DERIVED = "derived.csv"
    CONSORT = "consort.json"
    COHORT = "cohort.csv"
    COHORT_TESTS = "cohort_tests.json"
    WEIGHTS = "weights.csv"
    DIAGNOSTICS = "diagnostics.json"
    WEIGHTS_COMPARISON = "weights_comparison.csv"
    COXFIT = "coxfit.json"
    COEFFICIENTS = "coefficients.csv"
    CURVES = "curves.csv"
    CATE = "cate.csv"
    REPLICATES = "replicates.csv"
    CONFIG = "config.json"
    MANIFEST = "manifest.json"


# Command that produces each artifact a later stage may need
PRODUCERS: Dict[Artifact, str] = {
    Artifact.DATA: "simulate",
    Artifact.TRUTH: "simulate",
    Artifact.DERIVED: "derive",
    Artifact.WEIGHTS: "weights",
    Artifact.DIAGNOSTICS: "weights",
    Artifact.COXFIT: "fit",
}


class WorkspaceError(Exception):
    """A required artifact is missing or the directory is unusable"""
    pass


class Workspace:
    """Artifact paths under one output directory"""

    def __init__(self, path: Union[str, Path] = "out"):
        self.root = Path(path).resolve()

    def create(self) -> "Workspace":
        try:
            ensure_directory(self.root)
        except OSError as e:
            raise WorkspaceError(f"Cannot create output directory {self.root}: {e}")
        return self

    def path(self, artifact: Artifact) -> Path:
        return self.root / artifact.value

    def has(self, artifact: Artifact) -> bool:
        return self.path(artifact).exists()

    def require(self, artifact: Artifact) -> Path:
        """Path of an artifact that must already exist"""
        path = self.path(artifact)
        if not path.exists():
            producer = PRODUCERS.get(artifact)
            hint = f"; run 'rdicausal {producer}' first" if producer else ""
            raise WorkspaceError(f"Missing {path}{hint}")
        return path

    def input_location(self, configured: Optional[str], schema: Union[str, Schema]) -> Path:
        """
        Dataset to analyse: the configured input if any, else the simulated
        data of this workspace.
        """
        if configured is not None:
            path = Path(configured)
            if not path.exists():
                raise WorkspaceError(f"Input path does not exist: {path}")
            return path
        if Schema(schema) is not Schema.LONG:
            raise WorkspaceError("Simulated data is written in the long layout")
        return self.require(Artifact.DATA)

    def checksums(self) -> Dict[str, str]:
        """SHA-256 of every file currently in the workspace"""
        result = {}
        for file_path in sorted(self.root.rglob("*")):
            if file_path.is_file() and file_path.name != Artifact.MANIFEST.value:
                result[file_path.relative_to(self.root).as_posix()] = calculate_file_hash(file_path)
        logger.debug("Checksummed %d workspace files", len(result))
        return result

    def __repr__(self) -> str:
        return f"Workspace({self.root})"
