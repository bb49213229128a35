"""
Shared types of the estimation layer: the numeric-failure exception family
and the named design matrix consumed by the regression engines.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

INTERCEPT = "intercept"


class NumericalError(Exception):
    """Base class for failures of a numeric procedure on valid input"""
    pass


class DegenerateInput(NumericalError):
    """Input carries too little information for the requested computation"""
    pass


class Separation(NumericalError):
    """Multinomial coefficients diverge (complete or quasi-complete separation)"""
    pass


class RankDeficient(NumericalError):
    """Design columns are linearly dependent"""
    pass


class NotConverged(NumericalError):
    def __init__(self, max_iter: int, detail: str = ""):
        self.max_iter = max_iter
        suffix = f": {detail}" if detail else ""
        super().__init__(f"No convergence after {max_iter} iterations{suffix}")


class ColumnMismatch(NumericalError):
    """Prediction design does not carry the columns the model was fit on"""
    pass


class ZeroDenominator(NumericalError):
    """A weight denominator probability is numerically zero"""
    pass


class ZeroVariance(NumericalError):
    def __init__(self, confounder: str):
        self.confounder = confounder
        super().__init__(f"Pooled standard deviation of '{confounder}' is zero")


class NoEvents(NumericalError):
    pass


class Collinear(NumericalError):
    pass


class MonotoneLikelihood(NumericalError):
    """Partial likelihood keeps increasing as a coefficient diverges"""
    pass


class MedianUndefined(NumericalError):
    pass


class DegenerateGroups(NumericalError):
    pass


class EmptySubCohort(NumericalError):
    def __init__(self, exposure: int, effect_modifier: int):
        self.exposure = exposure
        self.effect_modifier = effect_modifier
        super().__init__(f"Sub-cohort (A={exposure}, V={effect_modifier}) is empty")


class TooManyFailedReplicates(NumericalError):
    def __init__(self, failed: int, total: int, max_rate: float):
        self.failed = failed
        self.total = total
        super().__init__(f"{failed} of {total} bootstrap replicates failed (limit {max_rate:.1%})")


class PositivityFloorViolated(NumericalError):
    def __init__(self, subject: int, probability: float, floor: float):
        self.subject = subject
        self.probability = probability
        super().__init__(
            f"Exposure probability {probability:.3g} of subject {subject} is below the floor {floor}"
        )


@dataclass(frozen=True)
class DesignMatrix:
    """Real-valued design with named columns and exactly one intercept"""

    values: np.ndarray
    columns: Tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"Design must be two-dimensional, got shape {values.shape}")
        columns = tuple(self.columns)
        if values.shape[1] != len(columns):
            raise ValueError(f"{values.shape[1]} design columns but {len(columns)} names")
        if len(set(columns)) != len(columns):
            raise ValueError(f"Duplicate design column names: {columns}")
        if not np.all(np.isfinite(values)):
            raise DegenerateInput("Design contains non-finite entries")
        if columns.count(INTERCEPT) != 1:
            raise ValueError("Design must contain exactly one intercept column")
        if not np.all(values[:, columns.index(INTERCEPT)] == 1.0):
            raise ValueError("Intercept column must be all ones")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)

    @classmethod
    def from_columns(cls, named: Iterable[Tuple[str, Sequence[float]]], n_rows: int) -> "DesignMatrix":
        """Build a design from (name, values) pairs, prepending the intercept"""
        names = [INTERCEPT]
        arrays = [np.ones(n_rows)]
        for name, column in named:
            names.append(name)
            arrays.append(np.asarray(column, dtype=float))
        return cls(np.column_stack(arrays), tuple(names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def take(self, rows: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.values[rows], self.columns)
