from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from caplab.report_store import BundleError, ReportStore, read_field, report_diff, to_jsonable


def _seed_bundle(root: Path, scenario_id: str, capacity: float, fingerprint: str = "abc") -> Path:
    store = ReportStore(root, scenario_id)
    store.write_report("01-capacity", {"result": {"capacity": capacity, "method": "radial"}})
    store.write_manifest({"scenario_id": scenario_id, "metric_fingerprint": fingerprint})
    return store.bundle_dir


def test_write_then_read_returns_same_payload(tmp_path: Path) -> None:
    store = ReportStore(tmp_path, "demo")
    payload = {"task": "01-capacity", "result": {"capacity": 3.0, "grid": [256, 128]}}

    store.write_report("01-capacity", payload)
    loaded = store.read_report("01-capacity")

    assert loaded == payload
    assert not list((tmp_path / "demo" / "report").glob("*.tmp"))


def test_corrupt_json_returns_none(tmp_path: Path) -> None:
    store = ReportStore(tmp_path, "demo")
    report_file = tmp_path / "demo" / "report" / "corrupt.json"
    report_file.write_text("{not-json", encoding="utf-8")

    loaded = store.read_report("corrupt")

    assert loaded is None
    assert report_file.read_text(encoding="utf-8") == "{not-json"


def test_non_finite_values_become_null(tmp_path: Path) -> None:
    store = ReportStore(tmp_path, "demo")

    path = store.write_report("02-verify", {"lhs": float("nan"), "rhs": np.float64(2.5), "ok": np.bool_(True)})
    data = json.loads(path.read_text(encoding="utf-8"))

    assert data == {"lhs": None, "rhs": 2.5, "ok": True}
    assert to_jsonable(np.array([1.0, np.inf])) == [1.0, None]


def test_summary_csv_uses_fixed_columns(tmp_path: Path) -> None:
    store = ReportStore(tmp_path, "demo")

    path = store.write_summary(
        [
            {"task": "02-verify-lc1", "name": "lc1", "status": "satisfied", "lhs": 6.0, "rhs": 6.0, "gap": 0.0},
            {"task": "01-capacity", "name": "capacity", "status": "ok"},
        ]
    )
    lines = path.read_text(encoding="utf-8").splitlines()

    assert lines[0] == "task,name,status,lhs,rhs,gap,tolerance,satisfied"
    assert lines[1].startswith("02-verify-lc1,lc1,satisfied,6.0,6.0,0.0,")
    assert lines[2] == "01-capacity,capacity,ok,,,,,"


def test_empty_data_rows_write_nothing(tmp_path: Path) -> None:
    store = ReportStore(tmp_path, "demo")

    assert store.write_data("01-capacity", []) is None
    assert not list((tmp_path / "demo" / "data").iterdir())


def test_identical_bundles_diff_to_zero(tmp_path: Path) -> None:
    a = _seed_bundle(tmp_path / "a", "demo", 3.0)
    b = _seed_bundle(tmp_path / "b", "demo", 3.0)

    summary = report_diff(a, b)

    assert summary["scenario_id"] == "demo"
    assert summary["compared"] == 1
    assert summary["max_relative_diff"] == 0.0


def test_diff_reports_relative_change(tmp_path: Path) -> None:
    a = _seed_bundle(tmp_path / "a", "demo", 3.0)
    b = _seed_bundle(tmp_path / "b", "demo", 3.3)

    summary = report_diff(a, b)

    assert summary["relative_diffs"]["01-capacity.result.capacity"] == pytest.approx(0.3 / 3.3)


def test_diff_rejects_mismatched_scenarios(tmp_path: Path) -> None:
    a = _seed_bundle(tmp_path / "a", "demo", 3.0)
    b = _seed_bundle(tmp_path / "b", "other", 3.0)

    with pytest.raises(BundleError, match="Scenario ids differ"):
        report_diff(a, b)


def test_diff_rejects_different_metrics(tmp_path: Path) -> None:
    a = _seed_bundle(tmp_path / "a", "demo", 3.0, fingerprint="abc")
    b = _seed_bundle(tmp_path / "b", "demo", 3.0, fingerprint="def")

    with pytest.raises(BundleError, match="different metrics"):
        report_diff(a, b)


def test_diff_needs_manifests(tmp_path: Path) -> None:
    a = _seed_bundle(tmp_path / "a", "demo", 3.0)

    with pytest.raises(BundleError, match="Missing manifest"):
        report_diff(a, tmp_path / "missing")


def test_truncated_field_file_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "broken.field"
    path.write_bytes(b"CAPLABF1")

    with pytest.raises(BundleError, match="Truncated"):
        read_field(path)
