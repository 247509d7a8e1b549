from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np

from caplab.capacity_solver import MeridianField


class BundleError(ValueError):
    """Raised when a report bundle is missing, corrupt or not comparable."""


SUMMARY_COLUMNS = ("task", "name", "status", "lhs", "rhs", "gap", "tolerance", "satisfied")

FIELD_MAGIC = b"CAPLABF1"
FIELD_HEADER = np.dtype(
    [
        ("magic", "S8"),
        ("n_rho", "<i8"),
        ("n_mu", "<i8"),
        ("truncation", "<f8"),
        ("metric_hash", "S64"),
    ]
)


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class ReportStore:
    """One bundle directory per scenario: report/<task>.json, data/<task>.csv, summary.csv."""

    def __init__(self, root_dir: Path, scenario_id: str) -> None:
        self._bundle_dir = Path(root_dir) / scenario_id
        (self._bundle_dir / "report").mkdir(parents=True, exist_ok=True)
        (self._bundle_dir / "data").mkdir(parents=True, exist_ok=True)
        self._logger = logging.getLogger(self.__class__.__name__)

    @property
    def bundle_dir(self) -> Path:
        return self._bundle_dir

    def write_report(self, task: str, payload: Dict[str, Any]) -> Path:
        return self._write_json(self._bundle_dir / "report" / f"{_safe(task)}.json", payload)

    def read_report(self, task: str) -> Optional[Dict[str, Any]]:
        return _read_json(self._bundle_dir / "report" / f"{_safe(task)}.json", self._logger)

    def write_manifest(self, payload: Dict[str, Any]) -> Path:
        return self._write_json(self._bundle_dir / "manifest.json", payload)

    def write_data(self, task: str, rows: Iterable[Mapping[str, Any]]) -> Optional[Path]:
        rows = list(rows)
        if not rows:
            return None
        path = self._bundle_dir / "data" / f"{_safe(task)}.csv"
        _write_csv(path, list(rows[0].keys()), rows)
        return path

    def write_summary(self, rows: Iterable[Mapping[str, Any]]) -> Path:
        path = self._bundle_dir / "summary.csv"
        _write_csv(path, list(SUMMARY_COLUMNS), list(rows))
        return path

    def write_field(self, task: str, meridian_field: MeridianField, metric_hash: str) -> Path:
        """Binary dump of the meridian potential: fixed header, then row-major float64 phi."""
        grid = meridian_field.grid
        header = np.zeros(1, dtype=FIELD_HEADER)
        header["magic"] = FIELD_MAGIC
        header["n_rho"], header["n_mu"] = grid.n_rho, grid.n_mu
        header["truncation"] = grid.truncation_radius
        header["metric_hash"] = metric_hash.encode("ascii")[:64]
        path = self._bundle_dir / "data" / f"{_safe(task)}.field"
        tmp_path = path.with_suffix(".tmp")
        with tmp_path.open("wb") as handle:
            handle.write(header.tobytes())
            handle.write(np.ascontiguousarray(meridian_field.phi, dtype="<f8").tobytes())
        tmp_path.replace(path)
        radii = grid.radii()
        theta = np.broadcast_to(grid.theta, radii.shape)
        self.write_data(
            f"{task}-field",
            (
                {"r": float(r), "theta": float(t), "phi": float(p)}
                for r, t, p in zip(radii.ravel(), theta.ravel(), meridian_field.phi.ravel())
            ),
        )
        return path

    def _write_json(self, path: Path, payload: Dict[str, Any]) -> Path:
        tmp_path = path.with_suffix(".tmp")

        data = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
        try:
            tmp_path.write_text(data + "\n", encoding="utf-8")
            tmp_path.replace(path)
        except OSError as exc:
            self._logger.error("Report write failed for %s: %s", path, exc)
            raise
        return path


def read_field(path: Path) -> Dict[str, Any]:
    raw = Path(path).read_bytes()
    if len(raw) < FIELD_HEADER.itemsize:
        raise BundleError(f"Truncated field file: {path}")
    header = np.frombuffer(raw[: FIELD_HEADER.itemsize], dtype=FIELD_HEADER)[0]
    if bytes(header["magic"]) != FIELD_MAGIC:
        raise BundleError(f"Not a meridian field file: {path}")
    n_rho, n_mu = int(header["n_rho"]), int(header["n_mu"])
    payload = np.frombuffer(raw[FIELD_HEADER.itemsize :], dtype="<f8")
    if payload.size != n_rho * n_mu:
        raise BundleError(f"Field payload has {payload.size} values, header says {n_rho}x{n_mu}")
    return {
        "n_rho": n_rho,
        "n_mu": n_mu,
        "truncation": float(header["truncation"]),
        "metric_hash": bytes(header["metric_hash"]).decode("ascii"),
        "phi": payload.reshape(n_rho, n_mu),
    }


def report_diff(bundle_a: Path, bundle_b: Path) -> Dict[str, Any]:
    """Relative differences of every numeric report value shared by two bundles of one scenario."""
    logger = logging.getLogger("ReportDiff")
    manifest_a = _read_json(Path(bundle_a) / "manifest.json", logger)
    manifest_b = _read_json(Path(bundle_b) / "manifest.json", logger)
    if manifest_a is None or manifest_b is None:
        raise BundleError(f"Missing manifest in {bundle_a if manifest_a is None else bundle_b}")
    if manifest_a.get("scenario_id") != manifest_b.get("scenario_id"):
        raise BundleError(
            f"Scenario ids differ: {manifest_a.get('scenario_id')!r} vs {manifest_b.get('scenario_id')!r}"
        )
    if manifest_a.get("metric_fingerprint") != manifest_b.get("metric_fingerprint"):
        raise BundleError("Bundles were computed on different metrics")

    diffs: Dict[str, float] = {}
    reports_a = sorted((Path(bundle_a) / "report").glob("*.json"))
    for path_a in reports_a:
        path_b = Path(bundle_b) / "report" / path_a.name
        report_a = _read_json(path_a, logger)
        report_b = _read_json(path_b, logger)
        if report_a is None or report_b is None:
            continue
        for key, value_a, value_b in _numeric_pairs(report_a, report_b, path_a.stem):
            scale = max(abs(value_a), abs(value_b))
            diffs[key] = 0.0 if scale == 0.0 else abs(value_a - value_b) / scale
    largest = max(diffs.values()) if diffs else 0.0
    return {
        "scenario_id": manifest_a["scenario_id"],
        "compared": len(diffs),
        "max_relative_diff": largest,
        "relative_diffs": diffs,
    }


def _numeric_pairs(a: Any, b: Any, prefix: str) -> List[tuple]:
    if isinstance(a, dict) and isinstance(b, dict):
        pairs = []
        for key in sorted(set(a) & set(b)):
            pairs.extend(_numeric_pairs(a[key], b[key], f"{prefix}.{key}"))
        return pairs
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        pairs = []
        for index, (item_a, item_b) in enumerate(zip(a, b)):
            pairs.extend(_numeric_pairs(item_a, item_b, f"{prefix}[{index}]"))
        return pairs
    numeric = (int, float)
    if isinstance(a, numeric) and isinstance(b, numeric) and not isinstance(a, bool) and not isinstance(b, bool):
        return [(prefix, float(a), float(b))]
    return []


def _read_json(path: Path, logger: logging.Logger) -> Optional[Dict[str, Any]]:
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        logger.warning("Report read failed for %s: %s", path, exc)
        return None
    if not isinstance(data, dict):
        logger.warning("Report file %s is not a JSON object", path)
        return None
    return data


def _write_csv(path: Path, columns: List[str], rows: List[Mapping[str, Any]]) -> None:
    tmp_path = path.with_suffix(".tmp")
    with tmp_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_value(row.get(key)) for key in columns})
    tmp_path.replace(path)


def _csv_value(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return value


def _safe(task: str) -> str:
    return task.replace("/", "_").replace(":", "-")
