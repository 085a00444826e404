"""
Problem files and tabular output.

A problem file is a JSON document:

    {
        "sigma": 1.5, "b": 1.0, "T": 0.5, "g": "x^0.5 * w",
        "r1": 2.0, "r2": 100.0, "M": null,
        "solver": {"n": 512, "quad_points": 32, "tol": 1e-10, "max_iter": 200, "X": null},
        "certificates": {"L": 0.2, "C": 1.0, "alpha": 0.5, "p": 3.0, "modulus": "u",
                         "samples": 10000, "seed": 0, "eps": [...], "gamma": 1.0, "density": 21}
    }

`solver` and `certificates` are optional. Tables are written with pandas at
17 significant digits so values survive a text round trip.
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO, Union

import numpy as np
import pandas as pd

from fracivp.certificates import CertificateParams
from fracivp.expr import ExprSyntaxError
from fracivp.logger import get_logger
from fracivp.problem import ProblemSpec, ProblemValidationError
from fracivp.solver import SolverConfig

logger = get_logger()

FLOAT_FORMAT = "%.17g"
NA_MARKER = "NA"

REQUIRED_FIELDS = ("sigma", "b", "T", "g", "r1", "r2")
NUMERIC_FIELDS = ("sigma", "b", "T", "r1", "r2", "M")
TOP_LEVEL_FIELDS = REQUIRED_FIELDS + ("M", "name", "solver", "certificates")
SOLVER_FIELDS = ("n", "quad_points", "tol", "max_iter", "X")
CERTIFICATE_FIELDS = ("L", "C", "alpha", "p", "modulus", "samples", "seed", "eps", "gamma",
                      "density")


class ProblemFileError(ValueError):
    """Unreadable or invalid problem file; `field` and `line` locate the problem when known."""

    def __init__(self, message: str, path: Optional[str] = None, field_name: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        location = path or "<problem>"
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        prefix = f"{location}: "
        if field_name is not None:
            prefix += f"field '{field_name}': "
        super().__init__(prefix + message)
        self.path = path
        self.field = field_name
        self.line = line
        self.column = column


@dataclass
class ProblemFile:
    """A loaded problem file."""
    spec: ProblemSpec
    solver: SolverConfig = field(default_factory=SolverConfig)
    certificates: CertificateParams = field(default_factory=CertificateParams)
    path: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            'name': self.spec.name,
            'sigma': self.spec.sigma,
            'b': self.spec.b,
            'T': self.spec.T,
            'g': str(self.spec.g),
            'r1': self.spec.r1,
            'r2': self.spec.r2,
            'M': self.spec.M,
            'solver': self.solver.to_dict(),
            'certificates': self.certificates.to_dict(),
        }


def _field_line(text: str, field_name: str) -> Optional[int]:
    """1-based line of the first literal occurrence of "key" for the last path component."""
    key = field_name.split(".")[-1]
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _check_table(table, name: str, allowed: tuple, path: Optional[str], text: str):
    if not isinstance(table, dict):
        raise ProblemFileError("must be a table", path, name or None,
                               _field_line(text, name) if name else None)
    for key in table:
        if key not in allowed:
            qualified = f"{name}.{key}" if name else key
            raise ProblemFileError(f"unknown field (allowed: {', '.join(allowed)})", path,
                                   qualified, _field_line(text, key))


def parse_problem(text: str, path: Optional[str] = None) -> ProblemFile:
    """
    Parse problem-file text.

    Raises:
        ProblemFileError: JSON syntax error (with line and column), missing or
            unknown field, wrong type, or a violated ProblemSpec invariant
            (with the field name and its line when found in the text).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON: {exc.msg}", path, line=exc.lineno,
                               column=exc.colno) from exc

    _check_table(data, "", TOP_LEVEL_FIELDS, path, text)
    for key in REQUIRED_FIELDS:
        if key not in data:
            raise ProblemFileError("missing required field", path, key)
    for key in NUMERIC_FIELDS:
        value = data.get(key)
        if key == "M" and value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProblemFileError(f"must be a number, got {value!r}", path, key,
                                   _field_line(text, key))
    if not isinstance(data["g"], str):
        raise ProblemFileError("must be an expression string", path, "g", _field_line(text, "g"))

    solver_table = data.get("solver", {})
    certificate_table = data.get("certificates", {})
    _check_table(solver_table, "solver", SOLVER_FIELDS, path, text)
    _check_table(certificate_table, "certificates", CERTIFICATE_FIELDS, path, text)

    try:
        spec = ProblemSpec.from_text(data["sigma"], data["b"], data["T"], data["g"], data["r1"],
                                     data["r2"], M=data.get("M"),
                                     name=data.get("name", Path(path).stem if path else "problem"))
        solver = SolverConfig.from_dict(solver_table)
        certificates = CertificateParams.from_dict(certificate_table)
    except ExprSyntaxError as exc:
        raise ProblemFileError(str(exc), path, "g", _field_line(text, "g")) from exc
    except ProblemValidationError as exc:
        raise ProblemFileError(str(exc).split(": ", 1)[-1], path, exc.field,
                               _field_line(text, exc.field)) from exc
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(str(exc), path) from exc

    logger.debug(f"Loaded problem '{spec.name}': sigma={spec.sigma}, b={spec.b}, T={spec.T}, "
                 f"g={spec.g}")
    return ProblemFile(spec=spec, solver=solver, certificates=certificates, path=path)


def load_problem_file(path: Union[str, Path]) -> ProblemFile:
    """Read and validate a JSON problem file."""
    path = str(path)
    logger.info(f"Loading problem file: {path}")
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read file: {exc.strerror or exc}", path) from exc
    return parse_problem(text, path)


def write_table(frame: pd.DataFrame, out: Union[str, Path, TextIO]):
    """Write a DataFrame as CSV at full precision; NaN is written as NA."""
    frame.to_csv(out, index=False, float_format=FLOAT_FORMAT, na_rep=NA_MARKER,
                 lineterminator="\n")
    if isinstance(out, (str, Path)):
        logger.info(f"Wrote {len(frame)} rows to {out}")


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """Read a table written by write_table."""
    return pd.read_csv(path, na_values=[NA_MARKER], dtype=np.float64)
