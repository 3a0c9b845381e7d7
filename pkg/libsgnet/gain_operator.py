"""Gain operators built from linear gains and monotone aggregation functions.

Row i of an operator aggregates the weighted neighbour values
``(gamma_ij * s_j)_j`` with its aggregation function mu_i. Rows hold finitely
many entries. An operator is either finite (absolute targets in ``[0, n)``) or
periodic (a prefix of rows followed by a repeated pattern of rows whose
targets are offsets relative to the row index).
"""

import dataclasses
import enum
import logging
import math
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .sequence_space import LinfVector, sup_norm, window

__all__ = ["AggregationKind", "AggregationSpec",
           "GainRow", "FiniteOperator", "PeriodicOperator", "GainOperator",
           "IllFormedOperatorError",
           "apply", "well_definedness_bound", "row_gain_bound", "uniform_aggregation",
           "AxiomViolation", "AxiomReport", "check_mhaf_axioms"]

logger = logging.getLogger(__name__)


class IllFormedOperatorError(ValueError):
    """Operator structure violates its invariants."""


class AggregationKind(enum.Enum):
    SUM = "sum"
    MAX = "max"
    MIXED = "mixed"


@dataclasses.dataclass(frozen=True)
class AggregationSpec:
    """Monotone, subadditive, degree-one homogeneous aggregation function.

    Attributes:
        kind (AggregationKind): Sum, max, or mixed aggregation.
        split_index (int): For mixed aggregation, the number of leading terms
            aggregated by max. The remaining terms are summed.
    """
    kind: AggregationKind
    split_index: int = 0

    def __post_init__(self) -> None:
        if self.kind is AggregationKind.MIXED and self.split_index < 1:
            raise ValueError("mixed aggregation needs a positive split_index")

    @classmethod
    def sum(cls) -> "AggregationSpec":
        return cls(AggregationKind.SUM)

    @classmethod
    def max(cls) -> "AggregationSpec":
        return cls(AggregationKind.MAX)

    @classmethod
    def mixed(cls, split_index: int) -> "AggregationSpec":
        return cls(AggregationKind.MIXED, split_index)

    @classmethod
    def from_name(cls, name: str, split_index: int = 0) -> "AggregationSpec":
        return cls(AggregationKind(name), split_index)

    def aggregate(self, terms: Sequence[float]) -> float:
        """Aggregate already weighted terms, in entry order."""
        if self.kind is AggregationKind.SUM:
            return math.fsum(terms)
        if self.kind is AggregationKind.MAX:
            return max(terms, default=0.0)

        head = terms[:self.split_index]
        return max(head, default=0.0) + math.fsum(terms[self.split_index:])

    def __str__(self) -> str:
        if self.kind is AggregationKind.MIXED:
            return f"mixed({self.split_index})"

        return self.kind.value


@dataclasses.dataclass(frozen=True)
class GainRow:
    """Gains of one subsystem.

    Zero-weight entries are dropped on construction. For mixed aggregation the
    split index is moved so that every remaining entry keeps its group.

    Attributes:
        entries (Tuple[Tuple[int, float], ...]): ``(target, weight)`` pairs.
            Targets are absolute indices in finite operators and offsets in
            periodic ones.
        aggregation (AggregationSpec): Aggregation of the weighted terms.
    """
    entries: Tuple[Tuple[int, float], ...] = ()
    aggregation: AggregationSpec = AggregationSpec.sum()

    def __post_init__(self) -> None:
        kept = []
        split = self.aggregation.split_index
        new_split = 0
        for pos, (target, weight) in enumerate(self.entries):
            weight = float(weight)
            if not math.isfinite(weight) or weight < 0:
                raise ValueError(f"gain weight must be finite and nonnegative, got {weight}")
            if weight == 0:
                continue

            kept.append((int(target), weight))
            if pos < split:
                new_split += 1

        targets = [t for t, _ in kept]
        if len(set(targets)) != len(targets):
            raise ValueError(f"duplicate targets in gain row: {targets}")

        aggregation = self.aggregation
        if aggregation.kind is AggregationKind.MIXED:
            if new_split == 0:
                aggregation = AggregationSpec.sum()
            else:
                aggregation = AggregationSpec.mixed(new_split)

        object.__setattr__(self, "entries", tuple(kept))
        object.__setattr__(self, "aggregation", aggregation)

    @property
    def targets(self) -> Tuple[int, ...]:
        return tuple(t for t, _ in self.entries)

    @property
    def weights(self) -> Tuple[float, ...]:
        return tuple(w for _, w in self.entries)


@dataclasses.dataclass(frozen=True)
class FiniteOperator:
    """Gain operator on n subsystems with absolute targets.

    Attributes:
        rows (Tuple[GainRow, ...]): One row per subsystem.
        dimension (int): Number of subsystems n.
    """
    rows: Tuple[GainRow, ...]
    dimension: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        if len(self.rows) != self.dimension:
            raise IllFormedOperatorError(f"expected {self.dimension} rows, got {len(self.rows)}")

        for i, row in enumerate(self.rows):
            for target in row.targets:
                if not 0 <= target < self.dimension:
                    raise IllFormedOperatorError(
                        f"row {i}: target {target} outside [0, {self.dimension})")

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[float]],
                    aggregation: AggregationSpec = AggregationSpec.sum()) -> "FiniteOperator":
        """Build an operator from a square nonnegative gain matrix.

        Raises:
            IllFormedOperatorError: If the matrix isn't square.
        """
        g = np.asarray(matrix, dtype=float)
        if g.size == 0:
            return cls((), 0)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise IllFormedOperatorError(f"gain matrix must be square, got shape {g.shape}")

        rows = [GainRow(tuple((j, g[i, j]) for j in range(g.shape[1])), aggregation)
                for i in range(g.shape[0])]
        return cls(tuple(rows), g.shape[0])

    def to_matrix(self) -> np.ndarray:
        g = np.zeros((self.dimension, self.dimension))
        for i, row in enumerate(self.rows):
            for target, weight in row.entries:
                g[i, target] = weight

        return g


@dataclasses.dataclass(frozen=True)
class PeriodicOperator:
    """Spatially invariant gain operator.

    Row i uses ``prefix_rows[i]`` for ``i < len(prefix_rows)`` and
    ``period_rows[(i - len(prefix_rows)) % p]`` otherwise. Row targets are
    offsets, row i reaches index ``i + offset``. Targets below 0 are absent.

    Attributes:
        prefix_rows (Tuple[GainRow, ...]): Leading rows.
        period_rows (Tuple[GainRow, ...]): Repeated row pattern, nonempty.
    """
    prefix_rows: Tuple[GainRow, ...]
    period_rows: Tuple[GainRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefix_rows", tuple(self.prefix_rows))
        object.__setattr__(self, "period_rows", tuple(self.period_rows))
        if not self.period_rows:
            raise IllFormedOperatorError("periodic operator needs at least one period row")

    @property
    def prefix_len(self) -> int:
        return len(self.prefix_rows)

    @property
    def period(self) -> int:
        return len(self.period_rows)

    @property
    def min_offset(self) -> int:
        return min((t for row in self._all_rows() for t in row.targets), default=0)

    @property
    def max_offset(self) -> int:
        return max((t for row in self._all_rows() for t in row.targets), default=0)

    def _all_rows(self) -> Iterable[GainRow]:
        return self.prefix_rows + self.period_rows

    def row_at(self, i: int) -> GainRow:
        """Row pattern (with relative offsets) used at index i."""
        if i < self.prefix_len:
            return self.prefix_rows[i]

        return self.period_rows[(i - self.prefix_len) % self.period]

    def absolute_row(self, i: int, limit: Optional[int] = None) -> GainRow:
        """Row i with absolute targets.

        Targets below 0, or at or beyond `limit` if given, are removed.
        """
        row = self.row_at(i)
        entries = []
        for offset, weight in row.entries:
            target = i + offset
            present = target >= 0 and (limit is None or target < limit)
            entries.append((target, weight if present else 0.0))

        return GainRow(tuple(entries), row.aggregation)

    def truncate(self, n: int) -> FiniteOperator:
        """Restriction to the first n subsystems, absent neighbours read as 0."""
        return FiniteOperator(tuple(self.absolute_row(i, n) for i in range(n)), n)


GainOperator = Union[FiniteOperator, PeriodicOperator]


def _evaluate_row(row: GainRow, i: int, values: np.ndarray, relative: bool) -> float:
    terms = []
    for target, weight in row.entries:
        j = i + target if relative else target
        terms.append(weight * values[j] if j >= 0 else 0.0)

    return row.aggregation.aggregate(terms)


def apply(op: GainOperator, s: LinfVector) -> LinfVector:
    """Evaluate the gain operator, ``(mu_i((gamma_ij * s_j)_j))_i``.

    Finite operators read the first n components of `s`. Periodic operators
    zero-extend finite inputs and return an eventually periodic vector.
    """
    if isinstance(op, FiniteOperator):
        values = window(s, op.dimension)
        return LinfVector.finite(_evaluate_row(row, i, values, relative=False)
                                 for i, row in enumerate(op.rows))

    if not isinstance(op, PeriodicOperator):
        raise TypeError(f"not a gain operator: {op!r}")

    if s.is_finite:
        s = LinfVector.periodic(s.prefix, (0.0,))

    back = max(0, -op.min_offset)
    head = max(op.prefix_len, len(s.prefix) + back)
    period = math.lcm(op.period, s.period)
    count = head + period

    values = window(s, count + max(0, op.max_offset))
    out = [_evaluate_row(op.row_at(i), i, values, relative=True) for i in range(count)]
    return LinfVector.periodic(out[:head], out[head:])


def uniform_aggregation(op: GainOperator) -> Optional[AggregationKind]:
    """Aggregation kind shared by all rows, `None` for heterogeneous rows."""
    if isinstance(op, FiniteOperator):
        rows = op.rows
    else:
        rows = op.prefix_rows + op.period_rows

    kinds = {row.aggregation.kind for row in rows if row.entries}
    if len(kinds) > 1:
        return None

    return kinds.pop() if kinds else AggregationKind.SUM


def _effective_rows(op: GainOperator) -> List[GainRow]:
    if isinstance(op, FiniteOperator):
        return list(op.rows)

    count = max(op.prefix_len, max(0, -op.min_offset)) + op.period
    return [op.absolute_row(i) for i in range(count)]


def row_gain_bound(op: GainOperator) -> Optional[float]:
    """Closed-form bound for pure sum or pure max operators.

    Returns ``sup_i sum_j gamma_ij`` for sum operators, ``sup_ij gamma_ij``
    for max operators and `None` otherwise.
    """
    kind = uniform_aggregation(op)
    rows = _effective_rows(op)
    if kind is AggregationKind.SUM:
        return max((math.fsum(row.weights) for row in rows), default=0.0)
    if kind is AggregationKind.MAX:
        return max((w for row in rows for w in row.weights), default=0.0)

    return None


def well_definedness_bound(op: GainOperator) -> float:
    """Norm of the operator applied to the all-ones vector.

    For pure sum or max operators the value is checked against
    `row_gain_bound`.

    Raises:
        ArithmeticError: If the generic and closed-form values disagree.
    """
    bound = sup_norm(apply(op, LinfVector.ones()))

    closed = row_gain_bound(op)
    if closed is not None and closed != bound:
        if abs(closed - bound) > 1e-12 * max(1.0, bound):
            raise ArithmeticError(f"row gain bound {closed} disagrees with operator norm {bound}")

        logger.warning("row gain bound %r differs from operator norm %r by rounding", closed, bound)

    return bound


@dataclasses.dataclass(frozen=True)
class AxiomViolation:
    """Sample on which an aggregation failed an axiom.

    Attributes:
        axiom (str): "homogeneity", "monotonicity" or "subadditivity".
        sample (Tuple[float, ...]): Argument s (for monotonicity the larger one).
        other (Tuple[float, ...]): Second argument, empty for homogeneity.
        scale (float): Scalar c for homogeneity, 1 otherwise.
        defect (float): Size of the violation.
    """
    axiom: str
    sample: Tuple[float, ...]
    other: Tuple[float, ...]
    scale: float
    defect: float


@dataclasses.dataclass(frozen=True)
class AxiomReport:
    trials: int
    violations: Tuple[AxiomViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, axiom: str) -> int:
        return sum(1 for v in self.violations if v.axiom == axiom)


def check_mhaf_axioms(agg: AggregationSpec, weights: Sequence[float], trials: int, seed: int, *,
                      aggregate: Callable[[Sequence[float]], float] = None,
                      tol: float = 1e-12) -> AxiomReport:
    """Randomized check of homogeneity, monotonicity and subadditivity.

    Evaluates ``mu(s) = agg.aggregate(weights * s)`` on sampled nonnegative
    vectors. The deterministic sample ``s = 1, c = 2`` runs before the random
    trials.

    Args:
        agg: Aggregation to check.
        weights: Nonnegative weights applied before aggregation.
        trials: Number of random samples, at least 1.
        seed: Seed for `numpy.random.default_rng`.
        aggregate: Replaces ``agg.aggregate``. Lets tests inject functions
            that aren't valid aggregations.
        tol: Relative tolerance of the comparisons.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")

    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")

    fn = aggregate or agg.aggregate

    def mu(s: np.ndarray) -> float:
        return float(fn(list(w * s)))

    rng = np.random.default_rng(seed)
    violations: List[AxiomViolation] = []

    def check_homogeneity(s: np.ndarray, c: float) -> None:
        lhs, rhs = mu(c * s), c * mu(s)
        defect = abs(lhs - rhs)
        if defect > tol * max(1.0, abs(rhs)):
            violations.append(AxiomViolation("homogeneity", tuple(s), (), c, defect))

    check_homogeneity(np.ones(len(w)), 2.0)

    for _ in range(trials):
        s = rng.uniform(0.0, 10.0, len(w)) * (rng.random(len(w)) < 0.8)
        check_homogeneity(s, float(rng.uniform(0.0, 10.0)))

        r = s * rng.random(len(w))
        mu_r, mu_s = mu(r), mu(s)
        if mu_r - mu_s > tol * max(1.0, abs(mu_s)):
            violations.append(AxiomViolation("monotonicity", tuple(s), tuple(r), 1.0, mu_r - mu_s))

        t = rng.uniform(0.0, 10.0, len(w))
        joint, split = mu(r + t), mu(r) + mu(t)
        if joint - split > tol * max(1.0, abs(split)):
            violations.append(AxiomViolation("subadditivity", tuple(r), tuple(t), 1.0, joint - split))

    return AxiomReport(trials, tuple(violations))
