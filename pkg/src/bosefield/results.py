"""Result tables: named columns with units, a provenance block and two on-disk formats."""

import hashlib
import json
import math
from datetime import datetime, timezone
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pyarrow as pa
from loguru import logger
from pydantic import Field, field_validator, model_validator
from rich import print as _pprint
from rich.markup import escape
from rich.table import Table
from typing_extensions import Annotated

from bosefield.exceptions import BFFileExists, BFIOError
from bosefield.models import BoseFieldBaseModel

TABLE_MARKER = "# bosefield-table: "
PROVENANCE_MARKER = "# provenance: "
COLUMNS_MARKER = "# columns: "
ARROW_METADATA_KEY = b"bosefield"


class ResultFormat(StrEnum):
    """On-disk format of a result table."""

    TSV = "tsv"
    ARROW = "arrow"

    @property
    def extension(self) -> str:
        return f".{self.value}"


class Column(BoseFieldBaseModel):
    """Metadata of one column."""

    name: str
    units: str = ""
    description: str = ""
    error_of: Annotated[
        str | None, Field(description="name of the column this one is the standard error of")
    ] = None


def _json_value(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class Provenance(BoseFieldBaseModel):
    """Where a table came from."""

    config_hash: str
    version: str
    created: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    wall_clock_seconds: float = 0.0
    notes: dict[str, Any] = {}

    @field_validator("notes")
    @classmethod
    def check_notes(cls, notes: dict[str, Any]) -> dict[str, Any]:
        """Store numpy scalars as Python values and non-finite floats as None."""
        return {key: _json_value(value) for key, value in notes.items()}


class ResultTable(BoseFieldBaseModel):
    """A named table of results."""

    name: str
    columns: list[Column]
    data: pd.DataFrame
    provenance: Provenance

    @model_validator(mode="after")
    def check_columns(self) -> "ResultTable":
        names = [c.name for c in self.columns]
        if names != list(self.data.columns):
            msg = f"Column metadata {names} does not match data columns {list(self.data.columns)}"
            raise ValueError(msg)
        for column in self.columns:
            if column.error_of is not None and column.error_of not in names:
                msg = f"{column.name} is the error of unknown column {column.error_of}"
                raise ValueError(msg)
        return self

    @classmethod
    def from_columns(
        cls,
        name: str,
        columns: list[tuple[Column, Any]],
        provenance: Provenance,
    ) -> "ResultTable":
        """Build a table from (column, values) pairs of equal length."""
        data = pd.DataFrame({column.name: values for column, values in columns})
        return cls(
            name=name, columns=[c for c, _ in columns], data=data, provenance=provenance
        )

    def column(self, name: str) -> Column:
        for column in self.columns:
            if column.name == name:
                return column
        msg = f"No column named {name}"
        raise KeyError(msg)

    def equals(self, other: "ResultTable") -> bool:
        """Return True if both tables have the same metadata and data."""
        return (
            self.name == other.name
            and self.columns == other.columns
            and self.provenance == other.provenance
            and self.data.equals(other.data)
        )

    def render(self, max_rows: int = 20) -> None:
        """Print the table to the console."""
        table = Table(
            title=self.name,
            show_header=True,
            title_justify="left",
            title_style="bold",
        )
        for column in self.columns:
            header = escape(f"{column.name} [{column.units}]" if column.units else column.name)
            table.add_column(header, justify="right")
        for row in self.data.head(max_rows).itertuples(index=False):
            table.add_row(*(_format_cell(value) for value in row))
        _pprint(table)
        if len(self.data) > max_rows:
            _pprint(f"... {len(self.data) - max_rows} more rows")


def _format_cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return f"{value}"


def config_hash(config: dict[str, Any]) -> str:
    """Return the SHA-256 of the canonical JSON form of `config`."""
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_table(
    table: ResultTable,
    directory: Path,
    fmt: ResultFormat | str = ResultFormat.TSV,
    overwrite: bool = False,
) -> Path:
    """Write `table` to `directory/<name><extension>` and return the path."""
    fmt = ResultFormat(fmt)
    filename = directory / f"{table.name}{fmt.extension}"
    if filename.exists() and not overwrite:
        msg = f"{filename=} already exists. Choose a different path or set overwrite=True."
        raise BFFileExists(msg)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        match fmt:
            case ResultFormat.TSV:
                _write_tsv(table, filename)
            case ResultFormat.ARROW:
                _write_arrow(table, filename)
    except OSError as e:
        msg = f"Failed to write {filename}: {e}"
        raise BFIOError(msg) from e
    logger.info("Wrote table {} to {}", table.name, filename)
    return filename


def read_table(filename: Path) -> ResultTable:
    """Read a table written by `write_table`; the format follows from the extension."""
    suffix = filename.suffix.lstrip(".")
    try:
        fmt = ResultFormat(suffix)
    except ValueError as e:
        msg = f"Unknown result file extension {filename.suffix!r}"
        raise BFIOError(msg) from e
    if not filename.exists():
        msg = f"{filename} does not exist"
        raise BFIOError(msg)
    match fmt:
        case ResultFormat.TSV:
            return _read_tsv(filename)
        case ResultFormat.ARROW:
            return _read_arrow(filename)


def _header(table: ResultTable) -> dict[str, Any]:
    return {
        "name": table.name,
        "provenance": table.provenance.model_dump(mode="json"),
        "columns": [c.model_dump(mode="json") for c in table.columns],
    }


def _from_header(header: dict[str, Any], data: pd.DataFrame) -> ResultTable:
    return ResultTable(
        name=header["name"],
        columns=[Column(**c) for c in header["columns"]],
        data=data,
        provenance=Provenance(**header["provenance"]),
    )


def _write_tsv(table: ResultTable, filename: Path) -> None:
    header = _header(table)
    with open(filename, "w", encoding="utf-8", newline="") as f_out:
        f_out.write(f"{TABLE_MARKER}{header['name']}\n")
        f_out.write(f"{PROVENANCE_MARKER}{json.dumps(header['provenance'], sort_keys=True)}\n")
        f_out.write(f"{COLUMNS_MARKER}{json.dumps(header['columns'])}\n")
        table.data.to_csv(f_out, sep="\t", index=False, na_rep="nan", lineterminator="\n")


def _read_tsv(filename: Path) -> ResultTable:
    header: dict[str, Any] = {}
    with open(filename, encoding="utf-8") as f_in:
        for line in f_in:
            if not line.startswith("#"):
                break
            if line.startswith(TABLE_MARKER):
                header["name"] = line[len(TABLE_MARKER) :].rstrip("\n")
            elif line.startswith(PROVENANCE_MARKER):
                header["provenance"] = json.loads(line[len(PROVENANCE_MARKER) :])
            elif line.startswith(COLUMNS_MARKER):
                header["columns"] = json.loads(line[len(COLUMNS_MARKER) :])
    missing = {"name", "provenance", "columns"}.difference(header)
    if missing:
        msg = f"{filename} is missing header entries {sorted(missing)}"
        raise BFIOError(msg)
    data = pd.read_csv(filename, sep="\t", comment="#", float_precision="round_trip")
    logger.trace("Read table from {}", filename)
    return _from_header(header, data)


def _write_arrow(table: ResultTable, filename: Path) -> None:
    arrow_table = pa.Table.from_pandas(table.data, preserve_index=False)
    metadata = dict(arrow_table.schema.metadata or {})
    metadata[ARROW_METADATA_KEY] = json.dumps(_header(table)).encode("utf-8")
    arrow_table = arrow_table.replace_schema_metadata(metadata)
    with pa.OSFile(str(filename), "wb") as sink:  # type: ignore
        with pa.ipc.new_file(sink, arrow_table.schema) as writer:
            writer.write_table(arrow_table)


def _read_arrow(filename: Path) -> ResultTable:
    with pa.memory_map(str(filename), "r") as source:
        arrow_table = pa.ipc.open_file(source).read_all()
        logger.trace("Read table from {}", filename)
    metadata = arrow_table.schema.metadata or {}
    if ARROW_METADATA_KEY not in metadata:
        msg = f"{filename} carries no bosefield metadata"
        raise BFIOError(msg)
    header = json.loads(metadata[ARROW_METADATA_KEY].decode("utf-8"))
    return _from_header(header, arrow_table.to_pandas())
