from __future__ import annotations

from pathlib import Path

import pytest

from caplab.config import ConfigError, ConfigLoader


def _write_yaml(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def _base_config() -> str:
    return """scenario:
  id: "schwarzschild-r2"

metric:
  kind: "schwarzschild"
  m: 2.0

boundary:
  kind: "sphere"
  r0: 2.0

numerics:
  grid: [128, 64]
  closed_form_tol: 1.0e-8

tasks:
  - capacity
  - verify:lc1
  - task: glue
    m: 2.0
    m_prime: 1.0

logging:
  file_path: "logs/caplab.log"
"""


def test_loads_base_and_overlays_config_d_in_order(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    _write_yaml(tmp_path / "scenario.yml", _base_config())
    _write_yaml(
        tmp_path / "config.d" / "10-boundary.yml",
        """
boundary:
  r0: 3.0
""",
    )
    _write_yaml(
        tmp_path / "config.d" / "20-boundary.yml",
        """
boundary:
  r0: 4.0
""",
    )

    monkeypatch.setenv("CAPLAB_CONFIG_DIR", str(tmp_path))
    monkeypatch.chdir(tmp_path)
    config = ConfigLoader().load()

    assert config.boundary.r0 == 4.0
    assert config.boundary.kind == "sphere"
    assert config.logging.file_path == "logs/caplab.log"


def test_tasks_parse_strings_and_mappings(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config())

    config = ConfigLoader(config_path=path).load()

    assert [task.label for task in config.tasks] == ["capacity", "verify-lc1", "glue"]
    glue = config.tasks[2]
    assert glue.params == {"m": 2.0, "m_prime": 1.0}
    assert glue.line > 0


def test_numerics_defaults_when_missing(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    text = _base_config().replace("numerics:\n  grid: [128, 64]\n  closed_form_tol: 1.0e-8\n", "")
    _write_yaml(path, text)

    config = ConfigLoader(config_path=path).load()

    assert config.numerics.grid == (256, 128)
    assert config.numerics.truncation_factor == 10.0
    assert config.numerics.n_thresholds == 32
    assert config.numerics.robin == "conformal"


def test_tasks_default_to_capacity(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    text = _base_config().split("tasks:")[0] + "logging:\n  level: DEBUG\n"
    _write_yaml(path, text)

    config = ConfigLoader(config_path=path).load()

    assert [task.kind for task in config.tasks] == ["capacity"]
    assert config.logging.level == "DEBUG"


def test_missing_scenario_file_fails(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="Missing scenario file"):
        ConfigLoader(config_path=tmp_path / "absent.yml").load()


def test_missing_section_fails_validation(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config().replace("boundary:\n  kind: \"sphere\"\n  r0: 2.0\n", ""))

    with pytest.raises(ConfigError, match="boundary"):
        ConfigLoader(config_path=path).load()


def test_unknown_metric_kind_reports_file_and_line(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config().replace('kind: "schwarzschild"', 'kind: "kerr"'))

    with pytest.raises(ConfigError) as excinfo:
        ConfigLoader(config_path=path).load()

    # The metric mapping starts on line 5 of the file.
    assert f"{path}:5:" in str(excinfo.value)


def test_glue_with_larger_inner_mass_fails_validation(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config().replace("m_prime: 1.0", "m_prime: 3.0"))

    with pytest.raises(ConfigError, match="m > m_prime"):
        ConfigLoader(config_path=path).load()


def test_lc2_level_outside_open_interval_fails_validation(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    text = _base_config().replace("  - verify:lc1\n", "  - task: verify:lc2\n    c: 0.4\n")
    _write_yaml(path, text)

    with pytest.raises(ConfigError, match="lc2"):
        ConfigLoader(config_path=path).load()


def test_unknown_verifier_fails_validation(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config().replace("verify:lc1", "verify:lc9"))

    with pytest.raises(ConfigError, match="unknown verifier"):
        ConfigLoader(config_path=path).load()


def test_coarse_grid_fails_validation(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config().replace("grid: [128, 64]", "grid: [32, 32]"))

    with pytest.raises(ConfigError, match="64x64"):
        ConfigLoader(config_path=path).load()


def test_sweep_needs_schwarzschild_metric(tmp_path: Path) -> None:
    profile = tmp_path / "u.csv"
    profile.write_text("r,u\n1,2\n2,1.5\n3,1.3\n4,1.25\n5,1.2\n6,1.1\n", encoding="utf-8")
    path = tmp_path / "scenario.yml"
    text = (
        _base_config()
        .replace('kind: "schwarzschild"\n  m: 2.0', f'kind: "profile_csv"\n  path: "{profile}"')
        .replace("  - capacity\n", "  - task: sweep:r0\n    start: 0.5\n    stop: 4.0\n")
    )
    _write_yaml(path, text)

    with pytest.raises(ConfigError, match="Schwarzschild"):
        ConfigLoader(config_path=path).load()


def test_with_numerics_overrides_and_revalidates(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yml"
    _write_yaml(path, _base_config())
    config = ConfigLoader(config_path=path).load()

    assert config.with_numerics(grid=None, fd_tol=None) is config
    refined = config.with_numerics(grid=(512, 256), fd_tol=1e-4)
    assert refined.numerics.grid == (512, 256)
    assert refined.numerics.fd_tol == 1e-4
    assert refined.tasks == config.tasks

    with pytest.raises(ConfigError):
        config.with_numerics(grid=(16, 16))


def test_metric_fingerprint_tracks_metric_only(tmp_path: Path) -> None:
    first = tmp_path / "a.yml"
    second = tmp_path / "b.yml"
    _write_yaml(first, _base_config())
    _write_yaml(second, _base_config().replace("r0: 2.0", "r0: 5.0"))

    a = ConfigLoader(config_path=first).load()
    b = ConfigLoader(config_path=second).load()

    assert a.metric.fingerprint() == b.metric.fingerprint()
    assert a.metric.fingerprint() != a.metric.__class__(kind="schwarzschild", m=1.0).fingerprint()
