"""Run artifacts: JSON schemas, provenance records and (de)serialization.

Every command that writes files also writes ``run.json``, a
:class:`RunArtifact` holding the resolved configuration, SHA-256 digests of
inputs and outputs, and timestamps. The configuration is complete enough to
re-execute the command and compare output digests.

Tabular exports are CSV. Each CSV kind has a row schema and a fixed header;
:func:`validate_csv` checks both.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import jsonschema
import numpy as np

from .bootstrap import BootstrapConfig, BootstrapRun, BootstrapSample, TrialOutcome
from .calibration import CalibrationResult
from .market_data import OptionQuote, OptionSurface

TOOL = "svrobust"
UNDEFINED = "--"  # marker for undefined correlation entries


def tool_version() -> str:
    try:
        return version(TOOL)
    except PackageNotFoundError:  # running from a source tree
        return "0+unknown"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path: str | Path, data) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path: str | Path):
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# schemas

_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_int = {"type": "integer"}
_digest = {"type": "string", "pattern": "^[0-9a-f]{64}$"}
_file_ref = {
    "type": "object",
    "required": ["path", "sha256"],
    "properties": {"path": {"type": "string"}, "sha256": _digest},
}
_params = {
    "type": "object",
    "additionalProperties": _num,
    "propertyNames": {"enum": ["v0", "kappa", "theta", "sigma", "rho", "lambda", "muJ", "sigmaJ", "hurst", "epsilon"]},
}
_model = {"enum": ["heston", "bates", "fsv"]}
_mc = {
    "type": ["object", "null"],
    "required": ["paths", "steps_per_year", "seed", "antithetic"],
    "properties": {
        "paths": {"type": "integer", "minimum": 2},
        "steps_per_year": {"type": "integer", "minimum": 50},
        "seed": {"type": "integer", "minimum": 0},
        "antithetic": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
    },
}
_bounds = {
    "type": "object",
    "additionalProperties": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
}

CALIBRATION_SCHEMA = {
    "type": "object",
    "required": ["model", "theta_hat", "objective_value", "model_prices", "aare", "evaluations", "converged", "seed"],
    "properties": {
        "model": _model,
        "theta_hat": _params,
        "objective_value": _nonneg,
        "model_prices": {"type": "array", "items": _num},
        "aare": _nonneg,
        "evaluations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

SURFACE_SCHEMA = {
    "type": "object",
    "required": ["spot", "rate", "quotes"],
    "properties": {
        "spot": {"type": "number", "exclusiveMinimum": 0},
        "rate": _num,
        "valuation_date": {"type": ["string", "null"]},
        "quotes": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        },
    },
}

BOOTSTRAP_SCHEMA = {
    "type": "object",
    "required": ["config", "surface", "param_names", "outcomes", "reference", "theta_bar"],
    "properties": {
        "config": {
            "type": "object",
            "required": ["model", "bounds", "trials", "budget", "master_seed", "mc", "epsilon"],
            "properties": {
                "model": _model,
                "bounds": _bounds,
                "trials": {"type": "integer", "minimum": 2},
                "budget": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0},
                "mc": _mc,
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "surface": SURFACE_SCHEMA,
        "param_names": {"type": "array", "items": {"type": "string"}},
        "outcomes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["trial", "seed", "indices", "result", "full_prices", "full_aare", "error"],
                "properties": {
                    "trial": {"type": "integer", "minimum": 0},
                    "seed": {"type": "integer", "minimum": 0},
                    "indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "result": {"oneOf": [{"type": "null"}, CALIBRATION_SCHEMA]},
                    "full_prices": {"type": ["array", "null"], "items": _num},
                    "full_aare": {"type": ["number", "null"], "minimum": 0},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "reference": {"oneOf": [{"type": "null"}, CALIBRATION_SCHEMA]},
        "theta_bar": _params,
    },
}

FILTER_SCHEMA = {
    "type": "object",
    "required": ["param", "ks_statistic", "p_value", "alpha", "reject_at_5pct", "sizes", "trials", "ecdf"],
    "properties": {
        "param": {"type": "string"},
        "ks_statistic": {"type": "number", "minimum": 0, "maximum": 1},
        "p_value": {"type": "number", "minimum": 0, "maximum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "reject_at_5pct": {"type": "boolean"},
        "sizes": {
            "type": "object",
            "required": ["behavioural", "non_behavioural", "grey"],
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
        "trials": {"type": "object", "additionalProperties": {"type": "array", "items": _int}},
        "ecdf": {
            "type": "object",
            "required": ["behavioural", "non_behavioural"],
            "additionalProperties": {
                "type": "object",
                "required": ["x", "F"],
                "properties": {
                    "x": {"type": "array", "items": _num},
                    "F": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                },
            },
        },
    },
}

SCATTER_SCHEMA = {
    "type": "object",
    "required": ["names", "trials", "points", "pairs", "histograms", "reference", "theta_bar"],
    "properties": {
        "names": {"type": "array", "items": {"type": "string"}},
        "trials": {"type": "integer", "minimum": 2},
        "points": {"type": "object", "additionalProperties": {"type": "array", "items": _num}},
        "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}},
        "histograms": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["edges", "counts"],
                "properties": {
                    "edges": {"type": "array", "items": _num, "minItems": 2},
                    "counts": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                },
            },
        },
        "reference": {"type": ["object", "null"], "additionalProperties": _num},
        "theta_bar": {"type": "object", "additionalProperties": _num},
    },
}

PRICE_SCHEMA = {
    "type": "object",
    "required": ["model", "price"],
    "properties": {
        "model": _model,
        "price": _nonneg,
        "stderr": _nonneg,
        "floor_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "warning": {"type": ["string", "null"]},
    },
}

META_SCHEMA = {
    "type": "object",
    "required": ["spot", "rate"],
    "properties": {
        "spot": {"type": "number", "exclusiveMinimum": 0},
        "rate": _num,
        "valuation_date": {"type": ["string", "null"]},
    },
}

SYNTH_SPEC_SCHEMA = {
    "type": "object",
    "required": ["model", "params"],
    "properties": {
        "model": _model,
        "params": _params,
        "strikes": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "maturities": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "spot": {"type": "number", "exclusiveMinimum": 0},
        "rate": _num,
        "half_spread": _nonneg,
        "floor": {"type": "number", "exclusiveMinimum": 0},
        "noise": _nonneg,
        "seed": {"type": "integer", "minimum": 0},
        "mc": _mc,
        "valuation_date": {"type": ["string", "null"]},
    },
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "command", "config", "inputs", "outputs", "started", "finished"],
    "properties": {
        "tool": {"const": TOOL},
        "version": {"type": "string"},
        "command": {"enum": ["price", "calibrate", "bootstrap-run", "robustness-report", "mc-filter", "synth-gen"]},
        "config": {"type": "object"},
        "inputs": {"type": "object", "additionalProperties": _file_ref},
        "outputs": {"type": "object", "additionalProperties": _file_ref},
        "started": {"type": "string", "format": "date-time"},
        "finished": {"type": "string", "format": "date-time"},
    },
}

JSON_SCHEMAS = {
    "run": RUN_SCHEMA,
    "calibration": CALIBRATION_SCHEMA,
    "bootstrap_run": BOOTSTRAP_SCHEMA,
    "filter_report": FILTER_SCHEMA,
    "scatter": SCATTER_SCHEMA,
    "price": PRICE_SCHEMA,
    "meta": META_SCHEMA,
    "synth_spec": SYNTH_SPEC_SCHEMA,
}

_cell_num = {"type": "number"}
_cell_int = {"type": "integer", "minimum": 0}
_cell_str = {"type": "string"}
_cell_corr = {"oneOf": [{"type": "number", "minimum": -1, "maximum": 1}, {"const": UNDEFINED}]}


@dataclass(frozen=True)
class CsvSchema:
    """Fixed leading columns and a row schema; ``open_tail`` allows extra columns of ``tail`` type."""

    columns: tuple[str, ...]
    cells: dict
    open_tail: bool = False
    tail: dict = field(default_factory=lambda: _cell_num)


CSV_SCHEMAS = {
    "quotes": CsvSchema(("strike", "maturity", "bid", "ask"),
                        {"strike": _cell_num, "maturity": _cell_num, "bid": _cell_num, "ask": _cell_num}),
    "trials": CsvSchema(("trial",), {"trial": _cell_int}, open_tail=True),
    "dispersion": CsvSchema(("j", "K", "T", "mid", "Cbar", "BRE", "V"),
                            {"j": _cell_int, "K": _cell_num, "T": _cell_num, "mid": _cell_num,
                             "Cbar": _cell_num, "BRE": {"type": "number", "minimum": 0},
                             "V": {"type": "number", "minimum": 0}}),
    "correlations": CsvSchema(("param",), {"param": _cell_str}, open_tail=True, tail=_cell_corr),
    "qn": CsvSchema(("k", "normal_quantile", "value"),
                    {"k": _cell_int, "normal_quantile": _cell_num, "value": _cell_num}),
    "bubbles": CsvSchema(("measure", "K", "T", "value", "spot"),
                         {"measure": {"enum": ["BRE", "V"]}, "K": _cell_num, "T": _cell_num,
                          "value": {"type": "number", "minimum": 0}, "spot": _cell_num}),
    "ecdf": CsvSchema(("group", "x", "F"),
                      {"group": {"enum": ["behavioural", "non_behavioural"]}, "x": _cell_num,
                       "F": {"type": "number", "minimum": 0, "maximum": 1}}),
}


class SchemaError(ValueError):
    pass


def validate_json(data, kind: str) -> None:
    try:
        jsonschema.validate(data, JSON_SCHEMAS[kind], format_checker=jsonschema.FormatChecker())
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{kind}: {exc.message} at {list(exc.absolute_path)}") from None


def _cell(text: str):
    if text == UNDEFINED:
        return text
    try:
        value = int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            return text
        if not math.isfinite(value):
            raise SchemaError(f"non-finite value {text!r}")
    return value


def validate_csv(path: str | Path, kind: str) -> int:
    """Check header and every row of a CSV export; returns the row count."""
    schema = CSV_SCHEMAS[kind]
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = tuple(rows[0])
    n_fixed = len(schema.columns)
    if header[:n_fixed] != schema.columns or (not schema.open_tail and len(header) != n_fixed):
        raise SchemaError(f"{path}: header {','.join(header)} does not match {kind}")
    props = dict(schema.cells)
    props.update({name: schema.tail for name in header[n_fixed:]})
    row_schema = {"type": "object", "properties": props, "required": list(header)}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
        record = dict(zip(header, (_cell(c) for c in row)))
        try:
            jsonschema.validate(record, row_schema)
        except jsonschema.ValidationError as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc.message}") from None
    return len(rows) - 1


def dump_schemas(directory: str | Path) -> list[Path]:
    """Write every JSON schema (and CSV row schema) to ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, schema in JSON_SCHEMAS.items():
        path = directory / f"{name}.schema.json"
        write_json(path, {"$schema": "https://json-schema.org/draft/2020-12/schema", "title": name, **schema})
        written.append(path)
    for name, schema in CSV_SCHEMAS.items():
        path = directory / f"{name}.csv.schema.json"
        write_json(path, {"title": f"{name} CSV row", "columns": list(schema.columns),
                          "open_tail": schema.open_tail, "cells": schema.cells, "tail": schema.tail})
        written.append(path)
    return written


# output file name -> schema kind; qn_<param>.csv and ecdf_<param>.csv by prefix
_FILE_KINDS = {
    "run.json": "run", "calibration.json": "calibration", "bootstrap_run.json": "bootstrap_run",
    "filter_report.json": "filter_report", "scatter.json": "scatter", "price.json": "price",
    "meta.json": "meta", "quotes.csv": "quotes", "trials.csv": "trials", "dispersion.csv": "dispersion",
    "correlations.csv": "correlations", "bubbles.csv": "bubbles",
}


def schema_kind(path: str | Path) -> str:
    name = Path(path).name
    if name in _FILE_KINDS:
        return _FILE_KINDS[name]
    for prefix in ("qn_", "ecdf_"):
        if name.startswith(prefix) and name.endswith(".csv"):
            return prefix[:-1]
    raise KeyError(f"no schema for output file {name}")


def validate_file(path: str | Path) -> str:
    """Validate one output file against the schema its name implies; returns the kind."""
    kind = schema_kind(path)
    if Path(path).suffix == ".json":
        validate_json(read_json(path), kind)
    else:
        validate_csv(path, kind)
    return kind


# ---------------------------------------------------------------------------
# run artifact


@dataclass
class RunArtifact:
    command: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    started: str = field(default_factory=_now)
    finished: str | None = None
    version: str = field(default_factory=tool_version)

    def add_input(self, name: str, path: str | Path) -> None:
        path = Path(path).resolve()
        self.inputs[name] = {"path": str(path), "sha256": sha256_file(path)}

    def add_output(self, name: str, path: str | Path) -> None:
        path = Path(path)
        self.outputs[name] = {"path": path.name, "sha256": sha256_file(path)}

    def to_dict(self) -> dict:
        return {
            "tool": TOOL,
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started": self.started,
            "finished": self.finished or _now(),
        }

    def write(self, directory: str | Path) -> Path:
        self.finished = _now()
        data = self.to_dict()
        validate_json(data, "run")
        path = Path(directory) / "run.json"
        write_json(path, data)
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RunArtifact":
        data = read_json(path)
        validate_json(data, "run")
        return cls(command=data["command"], config=data["config"], inputs=data["inputs"],
                   outputs=data["outputs"], started=data["started"], finished=data["finished"],
                   version=data["version"])


# ---------------------------------------------------------------------------
# surfaces and bootstrap runs


def surface_to_dict(surface: OptionSurface) -> dict:
    return {
        "spot": surface.spot,
        "rate": surface.rate,
        "valuation_date": surface.valuation_date,
        "quotes": [[q.strike, q.maturity, q.bid, q.ask] for q in surface.quotes],
    }


def surface_from_dict(data: dict) -> OptionSurface:
    quotes = tuple(OptionQuote(*map(float, row)) for row in data["quotes"])
    return OptionSurface(spot=float(data["spot"]), rate=float(data["rate"]), quotes=quotes,
                         valuation_date=data.get("valuation_date"))


def bootstrap_to_dict(run: BootstrapRun) -> dict:
    from .models import to_dict

    outcomes = []
    for o in run.outcomes:
        outcomes.append({
            "trial": o.trial,
            "seed": o.seed,
            "indices": list(o.sample.indices),
            "result": o.result.to_dict() if o.result is not None else None,
            "full_prices": None if o.full_prices is None else [float(x) for x in o.full_prices],
            "full_aare": o.full_aare,
            "error": o.error,
        })
    return {
        "config": run.config.to_dict(),
        "surface": surface_to_dict(run.surface),
        "param_names": list(run.param_names),
        "outcomes": outcomes,
        "reference": run.reference.to_dict() if run.reference is not None else None,
        "theta_bar": to_dict(run.theta_bar),
    }


def bootstrap_from_dict(data: dict) -> BootstrapRun:
    validate_json(data, "bootstrap_run")
    outcomes = []
    for o in data["outcomes"]:
        result = CalibrationResult.from_dict(o["result"]) if o["result"] is not None else None
        prices = None if o["full_prices"] is None else np.array(o["full_prices"], dtype=float)
        outcomes.append(TrialOutcome(
            trial=int(o["trial"]),
            seed=int(o["seed"]),
            sample=BootstrapSample(tuple(int(i) for i in o["indices"])),
            result=result,
            full_prices=prices,
            full_aare=o["full_aare"],
            error=o["error"],
        ))
    reference = CalibrationResult.from_dict(data["reference"]) if data["reference"] is not None else None
    return BootstrapRun(
        surface=surface_from_dict(data["surface"]),
        config=BootstrapConfig.from_dict(data["config"]),
        outcomes=tuple(outcomes),
        reference=reference,
    )


def save_bootstrap(run: BootstrapRun, path: str | Path) -> None:
    data = bootstrap_to_dict(run)
    validate_json(data, "bootstrap_run")
    write_json(path, data)


def load_bootstrap(path: str | Path) -> BootstrapRun:
    return bootstrap_from_dict(read_json(path))
