"""Formatting analysis results.

Reports are nested plain mappings. They're rendered as YAML for humans and
as ``section<TAB>key<TAB>value`` records for machines.
"""

import dataclasses
import enum
import math
import os
import tempfile
from typing import Any, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np
import yaml

from .sequence_space import LinfVector

__all__ = ["plain", "human_repr",
           "report_records", "format_records", "format_table",
           "write_atomic"]


def _float_repr(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"

    return repr(float(x))


def plain(o: Any) -> Any:
    """Convert results into YAML-safe builtins.

    Dataclasses become mappings of their fields, enums their values, vectors
    ``{prefix, block}`` mappings and arrays lists.
    """
    if isinstance(o, LinfVector):
        return {"prefix": list(o.prefix), "block": list(o.block)}
    if isinstance(o, enum.Enum):
        return o.value
    if dataclasses.is_dataclass(o) and not isinstance(o, type):
        return {f.name: plain(getattr(o, f.name)) for f in dataclasses.fields(o)}
    if isinstance(o, np.ndarray):
        return plain(o.tolist())
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Mapping):
        return {str(k): plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [plain(v) for v in o]

    return o


def human_repr(o: Any) -> str:
    """Convert the given object to a meaningful representation.

    The output is YAML with keys in insertion order.
    """
    try:
        s = yaml.safe_dump(plain(o), sort_keys=False, default_flow_style=False)
    except yaml.YAMLError:
        return str(o)

    # reports are single documents, drop the explicit end marker
    if s.endswith("\n...\n"):
        return s[:-5]
    else:
        return s


def _value_repr(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower()
    if isinstance(v, float):
        return _float_repr(v)

    return str(v)


def _flatten(prefix: str, o: Any) -> Iterator[Tuple[str, str]]:
    if isinstance(o, Mapping):
        for k, v in o.items():
            yield from _flatten(f"{prefix}.{k}" if prefix else str(k), v)
    elif isinstance(o, list) and any(isinstance(v, (Mapping, list)) for v in o):
        for i, v in enumerate(o):
            yield from _flatten(f"{prefix}.{i}", v)
    elif isinstance(o, list):
        yield prefix, ",".join(_value_repr(v) for v in o)
    else:
        yield prefix, _value_repr(o)


def report_records(report: Mapping[str, Any]) -> List[Tuple[str, str, str]]:
    """Flatten a report into ``(section, key, value)`` records.

    Top-level keys are sections, nested keys are joined with dots and lists
    of scalars are joined with commas.
    """
    records = []
    for section, body in plain(report).items():
        if isinstance(body, Mapping):
            records.extend((section, key, value) for key, value in _flatten("", body))
        else:
            records.append((section, "value", _value_repr(body)))

    return records


def format_records(records: Iterable[Sequence[str]]) -> str:
    return "".join("\t".join(record) + "\n" for record in records)


def format_table(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Tab separated table, floats in repr form."""
    lines = ["\t".join(header)]
    lines.extend("\t".join(_value_repr(float(x)) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write `text` to `path` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
