"""
Result records emitted by the experiment drivers.

A record is a results table plus enough metadata to read it without the code:
the unit and producing solver of every column, pass/fail flags and plot-ready
two-column series.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import jsonschema
import pandas as pd

from .utils import SteklovError, logger, safe_json_dump

SCHEMA_PATH = Path(__file__).parent / "result_schema.json"
FLOAT_FORMAT = "%.12g"
SOLVERS = ("ball-exact", "fem2d", "formula", "input", "derived")


class RecordValidationError(SteklovError):
    """Raised when a record does not describe itself completely."""
    pass


def eigenvalue_unit(dimension: int) -> str:
    """Unit of a Neumann/Steklov eigenvalue of a unit-size domain in R^N."""
    return f"length^{dimension - 2}/mass" if dimension != 2 else "1/mass"


def load_schema(schema_path: Union[str, Path] = SCHEMA_PATH) -> Dict[str, Any]:
    """Load the JSON schema for result documents."""
    with open(schema_path, "r", encoding="utf-8") as f:
        return json.load(f)


def _plain(value: Any) -> Any:
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class ColumnInfo:
    unit: str
    solver: str


@dataclass
class ResultRecord:
    """Table, column metadata, flags and plot series of one experiment run."""

    experiment: str
    inputs: Dict[str, Any]
    table: pd.DataFrame
    columns: Dict[str, ColumnInfo] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=dict)
    series: Dict[str, pd.DataFrame] = field(default_factory=dict)
    elapsed_seconds: Optional[float] = None

    def describe(self, name: str, unit: str, solver: str) -> "ResultRecord":
        if solver not in SOLVERS:
            raise RecordValidationError(f"Unknown solver tag '{solver}' for column {name}")
        self.columns[name] = ColumnInfo(unit, solver)
        return self

    def add_series(self, name: str, x: str, y: str, frame: pd.DataFrame) -> "ResultRecord":
        self.series[name] = frame[[x, y]].reset_index(drop=True)
        return self

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def check(self) -> None:
        """Every table column must carry a unit and a solver tag."""
        missing = [str(c) for c in self.table.columns if c not in self.columns]
        if missing:
            raise RecordValidationError(
                f"Record '{self.experiment}' has undescribed column(s): {', '.join(missing)}"
            )

    def to_document(self, include_timing: bool = False) -> Dict[str, Any]:
        self.check()
        rows = [{str(k): _plain(v) for k, v in row.items()}
                for row in self.table.to_dict(orient="records")]
        document = {
            "experiment": self.experiment,
            "inputs": {k: _plain(v) if not isinstance(v, (list, dict)) else v
                       for k, v in self.inputs.items()},
            "columns": [{"name": str(c), "unit": self.columns[c].unit,
                         "solver": self.columns[c].solver} for c in self.table.columns],
            "rows": rows,
            "flags": {k: bool(v) for k, v in self.flags.items()},
            "series": {
                name: {"columns": [str(c) for c in frame.columns],
                       "rows": [[_plain(v) for v in row] for row in frame.itertuples(index=False)]}
                for name, frame in self.series.items()
            },
        }
        if include_timing and self.elapsed_seconds is not None:
            document["elapsed_seconds"] = float(self.elapsed_seconds)
        return document

    def validate_document(self, document: Dict[str, Any]) -> None:
        try:
            jsonschema.validate(instance=document, schema=load_schema())
        except jsonschema.ValidationError as e:
            raise RecordValidationError(f"Result document failed schema validation: {e.message}")

    def to_json(self, include_timing: bool = False) -> str:
        document = self.to_document(include_timing)
        self.validate_document(document)
        return safe_json_dump(document) + "\n"

    def to_csv(self) -> str:
        self.check()
        return self.table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    def metadata(self, include_timing: bool = False) -> Dict[str, Any]:
        document = self.to_document(include_timing)
        document.pop("rows")
        document.pop("series")
        return document

    def write(self, out: Union[str, Path], fmt: str = "csv", include_timing: bool = False) -> List[Path]:
        """
        Write the record; returns every file written.

        CSV output writes ``out`` plus ``<stem>.<series>.csv`` per plot series and a
        ``<stem>.meta.json`` sidecar. JSON output is a single schema-validated file.
        """
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            out.write_text(self.to_json(include_timing), encoding="utf-8")
            logger.info(f"Wrote {out}")
            return [out]
        if fmt != "csv":
            raise ValueError(f"Unknown output format '{fmt}'")

        written = [out]
        out.write_text(self.to_csv(), encoding="utf-8")
        for name, frame in self.series.items():
            path = out.with_name(f"{out.stem}.{name}.csv")
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            written.append(path)
        meta = out.with_name(f"{out.stem}.meta.json")
        meta.write_text(safe_json_dump(self.metadata(include_timing)) + "\n", encoding="utf-8")
        written.append(meta)
        logger.info(f"Wrote {len(written)} file(s) next to {out}")
        return written

    def render(self, fmt: str = "csv", include_timing: bool = False) -> str:
        """Text for standard output when no output path is given."""
        return self.to_json(include_timing) if fmt == "json" else self.to_csv()
