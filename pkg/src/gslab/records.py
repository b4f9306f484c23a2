"""Result records, serialization, sweep CSV tables, and the solve cache.

Records are canonical JSON (sorted keys, two-space indent, no NaN/Inf) so
that serialize(parse(b)) == b byte-for-byte.  Sweep grids additionally
flatten to a fixed-column CSV: eps, amplitude, S, sigma, lambda, dist_D1,
nehari_res, pokh_res, converged_flag.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .asymptotics import ScalingReport

SCHEMA_VERSION = "1"

CSV_COLUMNS = (
    "eps",
    "amplitude",
    "S",
    "sigma",
    "lambda",
    "dist_D1",
    "nehari_res",
    "pokh_res",
    "converged_flag",
)


class ParseError(ValueError):
    """Record bytes violate the schema; the message names the field."""


@dataclass
class ResultRecord:
    kind: str                      # "solution" | "sweep" | "emden" | "check"
    config: dict
    payload: dict
    diagnostics: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    created: str = ""

    def __post_init__(self):
        if not self.created:
            self.created = datetime.now(timezone.utc).isoformat(timespec="seconds")


def _check_finite(obj, path: str):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ParseError(f"non-finite numeric field at {path!r}")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")


def _sanitize(obj):
    """Replace non-finite floats by None (payload columns may be empty)."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def serialize(record: ResultRecord) -> bytes:
    doc = {
        "schema_version": record.schema_version,
        "created": record.created,
        "kind": record.kind,
        "config": _sanitize(record.config),
        "payload": _sanitize(record.payload),
        "diagnostics": _sanitize(record.diagnostics),
    }
    return (json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def parse(data: bytes) -> ResultRecord:
    try:
        doc = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"not a record: {exc}") from exc
    for fd in ("schema_version", "kind", "config", "payload"):
        if fd not in doc:
            raise ParseError(f"missing field {fd!r}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ParseError(
            f"schema_version mismatch: got {doc['schema_version']!r}, "
            f"expected {SCHEMA_VERSION!r}"
        )
    _check_finite(doc["payload"], "payload")
    return ResultRecord(
        kind=doc["kind"],
        config=doc["config"],
        payload=doc["payload"],
        diagnostics=doc.get("diagnostics", {}),
        schema_version=doc["schema_version"],
        created=doc.get("created", ""),
    )


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return repr(float(x))


def sweep_rows(report: ScalingReport) -> list[dict]:
    rows = []
    for pt in report.points:
        rows.append({
            "eps": pt.x,
            "amplitude": pt.amplitude,
            "S": pt.S,
            "sigma": pt.sigma,
            "lambda": pt.lam,
            "dist_D1": pt.dist_D1,
            "nehari_res": pt.nehari_res,
            "pokh_res": pt.pokh_res,
            "converged_flag": 1 if pt.converged else 0,
        })
    return rows


def sweep_csv(report: ScalingReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in sweep_rows(report):
        cells = []
        for col in CSV_COLUMNS:
            v = row[col]
            cells.append(str(v) if col == "converged_flag" else _fmt(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def report_record(report: ScalingReport, config: dict,
                  diagnostics: dict | None = None) -> ResultRecord:
    fits = {
        name: {
            "exponent": fit.exponent,
            "log_power": fit.log_power,
            "r2": fit.r2,
            "rms_residual": fit.rms_residual,
            "predicted_exponent": fit.predicted_exponent,
            "predicted_log_power": fit.predicted_log_power,
            "window": list(fit.window),
            "n_points": fit.n_points,
        }
        for name, fit in report.fits.items()
    }
    payload = {
        "regime": report.regime,
        "N": report.N,
        "p": report.p,
        "q": report.q,
        "reference": report.reference,
        "predicted": {k: list(v) for k, v in report.predicted.items()},
        "fits": fits,
        "grid": sweep_rows(report),
        "failures": {repr(pt.x): pt.failure for pt in report.points if not pt.converged},
    }
    return ResultRecord("sweep", config, payload, diagnostics or {})


def refit_record(record: ResultRecord, observable: str = "amplitude",
                 with_log: bool = False) -> dict:
    """Re-fit a saved sweep record's grid column; returns the fit summary."""
    from .asymptotics import fit_exponent

    col = {"amplitude": "amplitude", "lambda": "lambda", "S": "S",
           "sigma": "sigma"}.get(observable)
    if col is None:
        raise ParseError(f"unknown observable {observable!r}")
    pts = [
        (row["eps"], row[col])
        for row in record.payload["grid"]
        if row.get("converged_flag") and row.get(col) is not None and row[col] > 0
    ]
    fit = fit_exponent(pts[2:] if len(pts) > 7 else pts, with_log=with_log)
    return {
        "observable": observable,
        "with_log": with_log,
        "exponent": fit.exponent,
        "log_power": fit.log_power,
        "r2": fit.r2,
        "rms_residual": fit.rms_residual,
        "n_points": fit.n_points,
    }


# --- solve cache ------------------------------------------------------------


def cache_dir() -> Path:
    env = os.environ.get("GSLAB_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "gslab"


def cache_key(config: dict) -> str:
    blob = json.dumps(
        {"config": _sanitize(config), "version": __version__},
        sort_keys=True,
        allow_nan=False,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_load(key: str) -> ResultRecord | None:
    path = cache_dir() / f"{key}.json"
    if not path.is_file():
        return None
    try:
        return parse(path.read_bytes())
    except ParseError:
        return None


def cache_store(key: str, record: ResultRecord) -> None:
    d = cache_dir()
    d.mkdir(parents=True, exist_ok=True)
    tmp = d / f".{key}.tmp"
    tmp.write_bytes(serialize(record))
    tmp.replace(d / f"{key}.json")
