import json
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import Dataset, Graph
from .errors import InvalidParameterError, ParseError

PathLike = Union[str, Path]

RESULT_HEADER = ["scenario", "method", "replicate", "f1", "tpr", "fdr", "selected_lambda", "selected_nu",
                 "edge_count", "wall_time_ms", "seed", "status"]
SUMMARY_HEADER = ["method", "mean_f1", "sd_f1", "mean_tpr", "mean_fdr", "replicates"]


def format_float(x: float) -> str:
    # 17 significant digits round-trip every double exactly
    return format(float(x), '.17g')


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def parse_dataset(text: str) -> Tuple[Dataset, Optional[List[str]]]:
    """Purpose: parses a comma-separated numeric matrix.

    Rows are observations and columns are features. A first row with any non-numeric field is
    taken as a header. Blank lines are skipped.

    Args:
        (str) The text.

    returns:
        (Dataset) the unstandardized data.
        (list(str)) the header fields, or None when the text has no header.

    Raises:
        ParseError: the text is empty, a row is ragged, a cell is not a number or is not finite.
    """
    lines = [(k + 1, line) for k, line in enumerate(text.splitlines()) if line.strip()]
    if not lines:
        raise ParseError("file is empty")

    header = None
    first = [field.strip() for field in lines[0][1].split(',')]
    if not all(_is_number(field) for field in first):
        header = first
        lines = lines[1:]
        if not lines:
            raise ParseError("file has a header but no data rows", line=1)
    width = len(header) if header is not None else len(first)

    rows = []
    for line_no, line in lines:
        fields = line.split(',')
        if len(fields) != width:
            raise ParseError(f"ragged row: expected {width} fields, got {len(fields)}", line=line_no)
        row = []
        for col, field in enumerate(fields):
            try:
                value = float(field)
            except ValueError:
                raise ParseError(f"not a number: {field.strip()!r}", line=line_no, column=col + 1)
            if not np.isfinite(value):
                raise ParseError(f"non-finite value {field.strip()!r}", line=line_no, column=col + 1)
            row.append(value)
        rows.append(row)
    return Dataset(np.array(rows)), header


def serialize_dataset(data: Union[Dataset, np.ndarray], header: Optional[Sequence[str]] = None) -> str:
    values = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if header is None:
        header = [f"x{j}" for j in range(values.shape[1])]
    if len(header) != values.shape[1]:
        raise InvalidParameterError(f"header has {len(header)} names for {values.shape[1]} columns")
    text = [",".join(header)]
    text.extend(",".join(format_float(x) for x in row) for row in values)
    return "\n".join(text) + "\n"


def load_csv(path: PathLike) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    with open(path) as f:
        return parse_dataset(f.read())[0]


def save_csv(path: PathLike, data: Union[Dataset, np.ndarray], header: Optional[Sequence[str]] = None):
    write_text(path, serialize_dataset(data, header))


def parse_edge_list(text: str, p: int) -> Graph:
    """Purpose: parses a 0-based "i,j" edge list, with an optional "i,j" header.

    Args:
        (str) The text.
        (int) node count of the graph.

    returns:
        (Graph) the graph over p nodes.

    Raises:
        ParseError: a row is not a pair of integers or names a node outside [0, p).
    """
    edges = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = [field.strip() for field in line.split(',')]
        if line_no == 1 and fields == ["i", "j"]:
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", line=line_no)
        try:
            i, j = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(f"edge endpoints must be integers, got {line.strip()!r}", line=line_no)
        if not (0 <= i < p and 0 <= j < p) or i == j:
            raise ParseError(f"edge ({i}, {j}) is invalid for {p} nodes", line=line_no)
        edges.append((i, j))
    return Graph(p, frozenset(edges))


def serialize_edge_list(graph: Graph) -> str:
    return "\n".join(["i,j"] + [f"{i},{j}" for i, j in graph.sorted_edges()]) + "\n"


def load_edge_list(path: PathLike, p: int) -> Graph:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    with open(path) as f:
        return parse_edge_list(f.read(), p)


def serialize_coefficients(coefficients: np.ndarray) -> str:
    # row i, column j: coefficient of node j in the regression of node i
    p = coefficients.shape[0]
    text = ["node," + ",".join(f"x{j}" for j in range(p))]
    text.extend(f"{i}," + ",".join(format_float(x) for x in row) for i, row in enumerate(coefficients))
    return "\n".join(text) + "\n"


def serialize_path(path: Iterable[Tuple[float, Graph]]) -> str:
    return "\n".join(["lambda,edge_count"] + [f"{format_float(lam)},{graph.edge_count}" for lam, graph in path]) + "\n"


def serialize_profile(profile) -> str:
    # one row per node pair i < j
    text = ["i,j,frequency"]
    for i in range(profile.p):
        for j in range(i + 1, profile.p):
            text.append(f"{i},{j},{format_float(profile.frequencies[i, j])}")
    return "\n".join(text) + "\n"


def serialize_profiles(profiles: Sequence) -> str:
    # every grid point of a tuning run, keyed by (nu, lambda)
    text = ["nu,lambda,i,j,frequency"]
    for profile in profiles:
        nu = "" if profile.nu is None else str(profile.nu.nu)
        for i in range(profile.p):
            for j in range(i + 1, profile.p):
                text.append(f"{nu},{format_float(profile.lambda_)},{i},{j},{format_float(profile.frequencies[i, j])}")
    return "\n".join(text) + "\n"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def serialize_rows(header: Sequence[str], rows: Iterable[Any]) -> str:
    text = [",".join(header)]
    for row in rows:
        text.append(",".join(_cell(getattr(row, name)) for name in header))
    return "\n".join(text) + "\n"


def serialize_results(rows: Iterable[Any]) -> str:
    return serialize_rows(RESULT_HEADER, rows)


def serialize_summary(rows: Iterable[Any]) -> str:
    return serialize_rows(SUMMARY_HEADER, rows)


def to_jsonable(obj: Any) -> Any:
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def serialize_metadata(metadata: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(metadata), sort_keys=True, indent=2) + "\n"


def parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno)


def load_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such file: {path}")
    with open(path) as f:
        return parse_json(f.read())


def write_text(path: PathLike, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(text)
