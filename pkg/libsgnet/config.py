"""Configuration documents.

A document is YAML with the sections ``operator``, ``analysis``, ``example``
and ``report``. Every section is a pydantic model. `parse_config` validates
the whole document before raising, so a `ConfigError` lists every problem,
each with the line it was found on.
"""

from typing import Annotated, Any, Dict, Iterable, List, Literal, Optional, Tuple

import pydantic
import yaml
from pydantic import BaseModel, ConfigDict, Field, StrictBool, StrictInt, StrictStr, field_validator, \
    model_validator

from .gain_operator import AggregationKind, AggregationSpec, FiniteOperator, GainOperator, GainRow, \
    PeriodicOperator
from .network_sim import ExampleParams, derive_example_gains

__all__ = ["OperatorSpec", "RowSpec", "AnalysisOptions", "ExampleSpec", "ReportSpec", "AnalysisConfig",
           "ConfigError",
           "parse_config", "load_config"]

PositiveInt = Annotated[StrictInt, Field(gt=0)]
Weight = Annotated[pydantic.FiniteFloat, Field(ge=0)]


class ConfigError(ValueError):
    """Configuration document failed validation.

    Attributes:
        errors (List[str]): One ``"line N: key: message"`` entry per problem.
    """

    def __init__(self, errors: List[str]) -> None:
        super().__init__("\n".join(errors))
        self.errors = errors


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RowSpec(_Section):
    """One row of gains.

    A bare list of ``[target, weight]`` pairs is short for a mapping with
    only `entries`.

    Attributes:
        entries (Tuple[Tuple[int, float], ...]): ``(target, weight)`` pairs.
        aggregation (Optional[AggregationKind]): Overrides the section's
            aggregation.
        split_index (Optional[int]): Overrides the split of mixed rows.
    """
    entries: Tuple[Tuple[StrictInt, Weight], ...] = ()
    aggregation: Optional[AggregationKind] = None
    split_index: Optional[Annotated[StrictInt, Field(ge=0)]] = None

    @model_validator(mode="before")
    @classmethod
    def _pairs(cls, value: Any) -> Any:
        if isinstance(value, list):
            return {"entries": value}

        return value

    def to_row(self, default: AggregationSpec) -> GainRow:
        """Gain row with the section's `default` aggregation filled in."""
        if self.aggregation is None:
            split = default.split_index if self.split_index is None else self.split_index
            aggregation = AggregationSpec(default.kind, split)
        else:
            # an explicit aggregation doesn't inherit the section's split
            aggregation = AggregationSpec(self.aggregation, self.split_index or 0)

        return GainRow(self.entries, aggregation)


class OperatorSpec(_Section):
    """Gain operator section.

    Attributes:
        kind (str): "finite", "periodic" or "example".
        aggregation (AggregationKind): Default aggregation of the rows.
        split_index (int): Default split of mixed rows.
        matrix (Optional[Tuple[Tuple[float, ...], ...]]): Square gain matrix
            of a finite operator.
        rows (Optional[Tuple[RowSpec, ...]]): Rows of a finite operator, the
            alternative to `matrix`.
        prefix_rows (Tuple[RowSpec, ...]): Leading rows of a periodic operator.
        period_rows (Optional[Tuple[RowSpec, ...]]): Repeated rows of a
            periodic operator.
    """
    kind: Literal["finite", "periodic", "example"]
    aggregation: AggregationKind = AggregationKind.SUM
    split_index: Annotated[StrictInt, Field(ge=0)] = 0
    matrix: Optional[Tuple[Tuple[Weight, ...], ...]] = None
    rows: Optional[Tuple[RowSpec, ...]] = None
    prefix_rows: Tuple[RowSpec, ...] = ()
    period_rows: Optional[Tuple[RowSpec, ...]] = None

    @property
    def aggregation_spec(self) -> AggregationSpec:
        return AggregationSpec(self.aggregation, self.split_index)

    @field_validator("matrix")
    @classmethod
    def _square(cls, matrix: Optional[Tuple[Tuple[float, ...], ...]]) -> Optional[Tuple[Tuple[float, ...], ...]]:
        if matrix is None:
            return None

        n = len(matrix)
        for i, row in enumerate(matrix):
            if len(row) != n:
                raise ValueError(f"matrix must be square, row {i} has {len(row)} entries instead of {n}")

        return matrix

    @field_validator("period_rows")
    @classmethod
    def _period(cls, rows: Optional[Tuple[RowSpec, ...]]) -> Optional[Tuple[RowSpec, ...]]:
        if rows is not None and not rows:
            raise ValueError("periodic operator needs at least one period row")

        return rows

    @model_validator(mode="after")
    def _structure(self) -> "OperatorSpec":
        if self.kind == "finite" and (self.matrix is None) == (self.rows is None):
            raise ValueError("finite operator needs exactly one of matrix or rows")
        if self.kind == "periodic" and self.period_rows is None:
            raise ValueError("periodic operator needs period_rows")

        if self.kind != "example":
            self.build()

        return self

    def build(self) -> GainOperator:
        """Finite or periodic operator described by the section.

        Raises:
            ValueError: If the rows don't form a valid operator.
        """
        default = self.aggregation_spec
        if self.kind == "periodic":
            return PeriodicOperator(tuple(row.to_row(default) for row in self.prefix_rows),
                                    tuple(row.to_row(default) for row in self.period_rows))
        if self.kind != "finite":
            raise ValueError(f"{self.kind} operator is derived from the example section")

        if self.matrix is not None:
            return FiniteOperator.from_matrix(self.matrix, default)

        rows = tuple(row.to_row(default) for row in self.rows)
        return FiniteOperator(rows, len(rows))


class AnalysisOptions(_Section):
    """Options of the operator analysis.

    Attributes:
        n_max (int): Iteration count of the small-gain check.
        lam (Optional[float]): Decay factor, `None` for ``(1 + rho) / 2``.
            Written as ``lambda`` in documents.
        tol (float): Residual accepted by certificates.
        tail_tol (float): Series tail tolerance.
        k_max (int): Maximum number of series terms.
        walk_lengths (Tuple[int, ...]): Walk lengths for graph statistics.
        uges_k_max (int): Iterations of the exponential-decay fit.
        axiom_trials (int): Random trials of the aggregation axiom check.
    """
    model_config = ConfigDict(populate_by_name=True)

    n_max: PositiveInt = 60
    lam: Optional[Annotated[float, Field(gt=0, lt=1)]] = Field(None, alias="lambda")
    tol: float = Field(1e-9, gt=0)
    tail_tol: float = Field(1e-10, gt=0)
    k_max: PositiveInt = 100_000
    walk_lengths: Tuple[PositiveInt, ...] = Field((1, 2), min_length=1)
    uges_k_max: Annotated[StrictInt, Field(ge=3)] = 30
    axiom_trials: PositiveInt = 1000


class ExampleSpec(_Section):
    """Example chain section.

    Attributes:
        b_diag, b_back, b_fwd1, b_fwd2 (float): Chain couplings.
        eps, delta, delta_prime (float): Young's-inequality weights.
        coupling (str): "sum" or "max".
        even_rows_drop_eps (bool): Drop eps on rows without back coupling.
        sizes (Tuple[int, ...]): Truncation sizes N, written as ``N``.
        horizon (float): Simulated time.
        step (float): RK4 step.
        input (float): Amplitude of the constant input on every channel.
        input_gain (str): "identity" or "linear".
        input_gain_slope (float): Slope of a linear input gain.
        workers (int): Threads of the simulation sweep.
    """
    model_config = ConfigDict(populate_by_name=True)

    b_diag: float = Field(gt=0)
    b_back: float = Field(ge=0)
    b_fwd1: float = Field(ge=0)
    b_fwd2: float = Field(ge=0)
    eps: float = Field(gt=0)
    delta: float = Field(gt=0)
    delta_prime: float = Field(gt=0)
    coupling: Literal["sum", "max"] = "sum"
    even_rows_drop_eps: StrictBool = False
    sizes: Tuple[PositiveInt, ...] = Field((50,), alias="N", min_length=1)
    horizon: float = Field(10.0, gt=0)
    step: float = Field(1e-3, gt=0)
    input: float = Field(0.0, ge=0)
    input_gain: Literal["identity", "linear"] = "identity"
    input_gain_slope: float = Field(1.0, ge=0)
    workers: PositiveInt = 1

    @model_validator(mode="after")
    def _margin(self) -> "ExampleSpec":
        # ExampleParams checks the decay margin
        _ = self.params
        return self

    @property
    def params(self) -> ExampleParams:
        """Chain coefficients."""
        return ExampleParams(self.b_diag, self.b_back, self.b_fwd1, self.b_fwd2,
                             self.eps, self.delta, self.delta_prime,
                             AggregationKind(self.coupling), self.even_rows_drop_eps)

    @property
    def input_slope(self) -> float:
        """Slope of the subsystem external gain."""
        if self.input_gain == "identity":
            return 1.0

        return self.input_gain_slope


class ReportSpec(_Section):
    """Report section.

    Attributes:
        prefix (str): Stem of the report file names.
        trajectory_stride (int): Keep every n-th trajectory sample.
        edge_list (bool): Whether graph-check writes the edge list.
    """
    prefix: StrictStr = "report"
    trajectory_stride: PositiveInt = 100
    edge_list: StrictBool = True

    @field_validator("prefix")
    @classmethod
    def _stem(cls, prefix: str) -> str:
        if not prefix or "/" in prefix:
            raise ValueError("must be a nonempty file name stem")

        return prefix


class AnalysisConfig(_Section):
    """Validated configuration document."""
    operator: Optional[OperatorSpec] = None
    analysis: AnalysisOptions = Field(default_factory=AnalysisOptions)
    example: Optional[ExampleSpec] = None
    report: ReportSpec = Field(default_factory=ReportSpec)

    @field_validator("analysis", "example", "report", mode="before")
    @classmethod
    def _empty_section(cls, value: Any) -> Any:
        return {} if value is None else value

    def __str__(self) -> str:
        kind = self.operator.kind if self.operator else None
        return f"(operator={kind}, example={self.example is not None})"

    def require(self, *sections: str) -> None:
        """Make sure the given sections are present.

        Raises:
            ConfigError: For every missing section.
        """
        missing = [f"line 1: {name}: section is required for this command"
                   for name in sections if getattr(self, name) is None]
        if missing:
            raise ConfigError(missing)

    def build_operator(self) -> GainOperator:
        """Gain operator described by the document.

        Raises:
            ConfigError: If there is no operator section.
        """
        self.require("operator")
        if self.operator.kind == "example":
            self.require("example")
            return derive_example_gains(self.example.params)

        return self.operator.build()


def _line_map(node: yaml.Node, path: str = "", lines: Dict[str, int] = None) -> Dict[str, int]:
    if lines is None:
        lines = {}

    lines.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            child = f"{path}.{key.value}" if path else str(key.value)
            lines[child] = key.start_mark.line + 1
            _line_map(value, child, lines)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, f"{path}.{i}", lines)

    return lines


def _line(lines: Dict[str, int], key: str) -> int:
    while key not in lines and "." in key:
        key = key.rsplit(".", 1)[0]

    return lines.get(key, 1)


_MESSAGES = {
    "extra_forbidden": "unknown key",
    "missing": "missing required key",
}


def _located(e: pydantic.ValidationError, lines: Dict[str, int]) -> List[str]:
    errors = []
    for err in e.errors():
        key = ".".join(str(part) for part in err["loc"]) or "<document>"
        if err["type"] == "value_error":
            msg = str(err["ctx"]["error"])
        else:
            msg = _MESSAGES.get(err["type"], err["msg"])

        errors.append(f"line {_line(lines, key)}: {key}: {msg}")

    return errors


def parse_config(text: str, require: Iterable[str] = ()) -> AnalysisConfig:
    """Parse and validate a configuration document.

    Args:
        text: YAML document.
        require: Sections that must be present.

    Raises:
        ConfigError: With every problem found in the document.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ConfigError([f"line {line}: <document>: {getattr(e, 'problem', None) or e}"]) from None

    lines = _line_map(root) if root is not None else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([f"line 1: <document>: expected a mapping of sections, got {type(data).__name__}"])

    errors = []
    cfg = None
    try:
        cfg = AnalysisConfig.model_validate(data)
    except pydantic.ValidationError as e:
        errors.extend(_located(e, lines))

    operator = data.get("operator")
    if isinstance(operator, dict) and operator.get("kind") == "example" and "example" not in data:
        errors.append(f"line {_line(lines, 'operator.kind')}: operator.kind: "
                      f"example operator needs an example section")

    for name in require:
        if name not in data:
            errors.append(f"line {_line(lines, name)}: {name}: section is required for this command")

    if errors:
        raise ConfigError(errors)

    return cfg


def load_config(path: str, require: Iterable[str] = ()) -> AnalysisConfig:
    """Read and parse the configuration document at `path`."""
    with open(path, "r") as f:
        return parse_config(f.read(), require)
