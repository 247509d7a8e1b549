from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml


class ConfigError(ValueError):
    """Raised when scenario loading or validation fails."""


METRIC_KINDS = ("schwarzschild", "power_series", "profile_csv", "warped_csv")
BOUNDARY_KINDS = ("sphere", "horizon", "meridian_csv", "spheroid", "bumped")
TASK_KINDS = ("capacity", "quasilocal", "symmetrize", "verify", "glue", "sweep")
VERIFY_NAMES = (
    "lc1",
    "lc2",
    "bray_miao",
    "mass_capacity",
    "upper_bounds",
    "corollaries",
    "hawking_bounds",
    "shi_tam",
    "szego",
    "rigidity",
    "minkowski",
)
SWEEP_PARAMETERS = ("r0",)


class _LineDict(dict):
    """Mapping that remembers where it was defined."""

    line: int = 0
    source: str = "<config>"


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_line_mapping(loader: _LineLoader, node: yaml.MappingNode) -> _LineDict:
    mapping = _LineDict(loader.construct_mapping(node, deep=True))
    mapping.line = node.start_mark.line + 1
    mapping.source = node.start_mark.name
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_line_mapping)


def _where(data: Any) -> str:
    if isinstance(data, _LineDict):
        return f"{data.source}:{data.line}: "
    return ""


@dataclass(frozen=True)
class MetricConfig:
    kind: str
    m: Optional[float] = None
    r_start: Optional[float] = None
    terms: Tuple[Tuple[float, float], ...] = ()
    path: Optional[str] = None
    tau: float = 1.0

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "kind": self.kind,
                "m": self.m,
                "r_start": self.r_start,
                "terms": [list(term) for term in self.terms],
                "path": self.path,
                "tau": self.tau,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class BoundaryConfig:
    kind: str
    r0: Optional[float] = None
    a: Optional[float] = None
    c: Optional[float] = None
    amplitude: Optional[float] = None
    degree: int = 2
    modes: int = 64
    path: Optional[str] = None


@dataclass(frozen=True)
class NumericsConfig:
    grid: Tuple[int, int] = (256, 128)
    truncation_factor: float = 10.0
    closed_form_tol: float = 1e-8
    fd_tol: float = 1e-3
    cg_rtol: float = 1e-12
    n_thresholds: int = 32
    threshold_epsilon: float = 0.02
    robin: str = "conformal"
    preconditioner: str = "lu"
    derivative_method: str = "spline"
    estimate_truncation: bool = False

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "truncation_factor": self.truncation_factor,
            "closed_form_tol": self.closed_form_tol,
            "fd_tol": self.fd_tol,
            "cg_rtol": self.cg_rtol,
            "n_thresholds": self.n_thresholds,
            "threshold_epsilon": self.threshold_epsilon,
            "robin": self.robin,
            "preconditioner": self.preconditioner,
            "derivative_method": self.derivative_method,
            "estimate_truncation": self.estimate_truncation,
        }


@dataclass(frozen=True)
class TaskConfig:
    kind: str
    name: Optional[str] = None
    params: Mapping[str, Any] = field(default_factory=dict)
    line: int = 0

    @property
    def label(self) -> str:
        return self.kind if self.name is None else f"{self.kind}-{self.name}"


@dataclass(frozen=True)
class LoggingConfig:
    file_path: Optional[str] = None
    level: str = "INFO"


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    metric: MetricConfig
    boundary: BoundaryConfig
    numerics: NumericsConfig
    tasks: Tuple[TaskConfig, ...]
    logging: LoggingConfig
    source: Optional[str] = None

    def with_numerics(self, **overrides: Any) -> "ScenarioConfig":
        values = {key: value for key, value in overrides.items() if value is not None}
        if not values:
            return self
        numerics = NumericsConfig(**{**_numerics_fields(self.numerics), **values})
        _validate_numerics(numerics, None)
        return ScenarioConfig(
            id=self.id,
            metric=self.metric,
            boundary=self.boundary,
            numerics=numerics,
            tasks=self.tasks,
            logging=self.logging,
            source=self.source,
        )


def _numerics_fields(numerics: NumericsConfig) -> Dict[str, Any]:
    return {name: getattr(numerics, name) for name in NumericsConfig.__dataclass_fields__}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = _LineDict(base)
    if isinstance(base, _LineDict):
        merged.line, merged.source = base.line, base.source
    for key, value in override.items():
        if (
            key in merged
            and isinstance(merged[key], dict)
            and isinstance(value, dict)
        ):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _load_yaml(path: Path) -> Dict[str, Any]:
    try:
        with path.open(encoding="utf-8") as handle:
            data = yaml.load(handle, Loader=_LineLoader)
    except OSError as exc:
        raise ConfigError(f"Failed to read scenario file: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: expected a mapping at the root of the scenario file")
    return data


class ConfigLoader:
    def __init__(self, root_dir: Path | None = None, config_path: Path | None = None) -> None:
        self._root_dir = root_dir
        self._config_path = config_path

    def load(self) -> ScenarioConfig:
        root_dir = self._resolve_root_dir()
        config_path = self._resolve_config_path(root_dir)
        if not config_path.exists():
            raise ConfigError(f"Missing scenario file: {config_path}")

        merged = _load_yaml(config_path)

        config_d = root_dir / "config.d"
        if config_d.exists():
            for path in sorted(config_d.glob("*.yml")):
                merged = _deep_merge(merged, _load_yaml(path))

        config = self._build_config(merged, config_path)
        self._validate(config, merged)
        return config

    def _resolve_root_dir(self) -> Path:
        if self._root_dir is not None:
            return self._root_dir
        if self._config_path is not None:
            return self._config_path.parent
        env_dir = os.getenv("CAPLAB_CONFIG_DIR")
        if env_dir:
            return Path(env_dir)
        return Path.cwd()

    def _resolve_config_path(self, root_dir: Path) -> Path:
        if self._config_path is not None:
            return self._config_path
        return root_dir / "scenario.yml"

    def _build_config(self, data: Dict[str, Any], config_path: Path) -> ScenarioConfig:
        try:
            scenario_data = data["scenario"]
            metric_data = data["metric"]
            boundary_data = data["boundary"]
        except KeyError as exc:
            raise ConfigError(f"{_where(data)}missing scenario section: {exc.args[0]}") from exc

        try:
            scenario_id = str(scenario_data["id"])
            metric = MetricConfig(
                kind=str(metric_data["kind"]),
                m=_optional_float(metric_data.get("m")),
                r_start=_optional_float(metric_data.get("r_start")),
                terms=tuple(
                    sorted((float(p), float(c)) for p, c in (metric_data.get("terms") or {}).items())
                ),
                path=metric_data.get("path"),
                tau=float(metric_data.get("tau", 1.0)),
            )
            boundary = BoundaryConfig(
                kind=str(boundary_data["kind"]),
                r0=_optional_float(boundary_data.get("r0")),
                a=_optional_float(boundary_data.get("a")),
                c=_optional_float(boundary_data.get("c")),
                amplitude=_optional_float(boundary_data.get("amplitude")),
                degree=int(boundary_data.get("degree", 2)),
                modes=int(boundary_data.get("modes", 64)),
                path=boundary_data.get("path"),
            )
        except KeyError as exc:
            raise ConfigError(f"{_where(metric_data)}missing key: {exc.args[0]}") from exc
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"{_where(data)}invalid value: {exc}") from exc

        numerics_data = data.get("numerics") or {}
        try:
            grid = numerics_data.get("grid", (256, 128))
            numerics = NumericsConfig(
                grid=(int(grid[0]), int(grid[1])),
                truncation_factor=float(numerics_data.get("truncation_factor", 10.0)),
                closed_form_tol=float(numerics_data.get("closed_form_tol", 1e-8)),
                fd_tol=float(numerics_data.get("fd_tol", 1e-3)),
                cg_rtol=float(numerics_data.get("cg_rtol", 1e-12)),
                n_thresholds=int(numerics_data.get("n_thresholds", 32)),
                threshold_epsilon=float(numerics_data.get("threshold_epsilon", 0.02)),
                robin=str(numerics_data.get("robin", "conformal")),
                preconditioner=str(numerics_data.get("preconditioner", "lu")),
                derivative_method=str(numerics_data.get("derivative_method", "spline")),
                estimate_truncation=bool(numerics_data.get("estimate_truncation", False)),
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"{_where(numerics_data)}invalid numerics: {exc}") from exc

        tasks = tuple(_build_task(item, data) for item in data.get("tasks") or ["capacity"])
        logging_data = data.get("logging") or {}
        logging_config = LoggingConfig(
            file_path=logging_data.get("file_path"),
            level=str(logging_data.get("level", "INFO")),
        )
        return ScenarioConfig(
            id=scenario_id,
            metric=metric,
            boundary=boundary,
            numerics=numerics,
            tasks=tasks,
            logging=logging_config,
            source=str(config_path),
        )

    def _validate(self, config: ScenarioConfig, data: Dict[str, Any]) -> None:
        if not config.id or "/" in config.id:
            raise ConfigError(f"{_where(data.get('scenario'))}scenario id must be a non-empty name without '/'")
        self._validate_metric(config.metric, data.get("metric"))
        self._validate_boundary(config.boundary, config.metric, data.get("boundary"))
        _validate_numerics(config.numerics, data.get("numerics"))
        for task in config.tasks:
            self._validate_task(task, config, data)

    def _validate_metric(self, metric: MetricConfig, node: Any) -> None:
        where = _where(node)
        if metric.kind not in METRIC_KINDS:
            raise ConfigError(f"{where}metric kind must be one of: {', '.join(METRIC_KINDS)}")
        if metric.kind == "schwarzschild" and metric.m is None:
            raise ConfigError(f"{where}schwarzschild metric needs m")
        if metric.kind == "schwarzschild" and metric.m < 0 and metric.r_start is None:
            raise ConfigError(f"{where}negative mass m={metric.m} needs r_start > |m|/2")
        if metric.kind == "power_series" and not metric.terms:
            raise ConfigError(f"{where}power_series metric needs terms")
        if metric.kind in ("profile_csv", "warped_csv"):
            if not metric.path or not Path(metric.path).exists():
                raise ConfigError(f"{where}metric file does not exist: {metric.path}")
        if not 0.5 < metric.tau <= 1.0:
            raise ConfigError(f"{where}tau must lie in (1/2, 1]: {metric.tau}")

    def _validate_boundary(self, boundary: BoundaryConfig, metric: MetricConfig, node: Any) -> None:
        where = _where(node)
        if boundary.kind not in BOUNDARY_KINDS:
            raise ConfigError(f"{where}boundary kind must be one of: {', '.join(BOUNDARY_KINDS)}")
        if boundary.kind in ("sphere", "bumped") and not (boundary.r0 or 0) > 0:
            raise ConfigError(f"{where}{boundary.kind} boundary needs r0 > 0")
        if boundary.kind == "spheroid" and not ((boundary.a or 0) > 0 and (boundary.c or 0) > 0):
            raise ConfigError(f"{where}spheroid boundary needs semi-axes a > 0 and c > 0")
        if boundary.kind == "bumped" and boundary.amplitude is None:
            raise ConfigError(f"{where}bumped boundary needs amplitude")
        if boundary.kind == "meridian_csv" and (not boundary.path or not Path(boundary.path).exists()):
            raise ConfigError(f"{where}meridian file does not exist: {boundary.path}")
        if boundary.kind == "horizon" and metric.kind == "schwarzschild" and not (metric.m or 0) > 0:
            raise ConfigError(f"{where}horizon boundary needs m > 0")

    def _validate_task(self, task: TaskConfig, config: ScenarioConfig, data: Dict[str, Any]) -> None:
        where = f"{_where(data)}" if not task.line else f"{config.source}:{task.line}: "
        if task.kind not in TASK_KINDS:
            raise ConfigError(f"{where}unknown task {task.kind!r}; expected one of: {', '.join(TASK_KINDS)}")
        if task.kind == "verify" and task.name not in VERIFY_NAMES:
            raise ConfigError(f"{where}unknown verifier {task.name!r}; expected one of: {', '.join(VERIFY_NAMES)}")
        if task.kind == "verify" and task.name == "lc2":
            c = float(task.params.get("c", 0.75))
            if not 0.5 < c < 1.0:
                raise ConfigError(f"{where}lc2 needs c in (1/2, 1), got {c}")
        if task.kind == "glue":
            try:
                m = float(task.params["m"])
                m_prime = float(task.params["m_prime"])
            except KeyError as exc:
                raise ConfigError(f"{where}glue task needs {exc.args[0]}") from exc
            if not m > m_prime > 0:
                raise ConfigError(f"{where}glue task needs m > m_prime > 0, got m={m}, m_prime={m_prime}")
        if task.kind == "sweep":
            if task.name not in SWEEP_PARAMETERS:
                raise ConfigError(f"{where}sweep parameter must be one of: {', '.join(SWEEP_PARAMETERS)}")
            if config.metric.kind != "schwarzschild":
                raise ConfigError(f"{where}r0 sweeps run on Schwarzschild metrics only")
            start = float(task.params.get("start", 0.25))
            stop = float(task.params.get("stop", 8.0))
            count = int(task.params.get("count", 25))
            if not 0 < start < stop or count < 2:
                raise ConfigError(f"{where}sweep needs 0 < start < stop and count >= 2")


def _validate_numerics(numerics: NumericsConfig, node: Any) -> None:
    where = _where(node)
    n_rho, n_mu = numerics.grid
    if n_rho < 64 or n_mu < 64:
        raise ConfigError(f"{where}grid must be at least 64x64, got {n_rho}x{n_mu}")
    if numerics.truncation_factor < 10.0:
        raise ConfigError(f"{where}truncation_factor must be at least 10, got {numerics.truncation_factor}")
    for name in ("closed_form_tol", "fd_tol", "cg_rtol"):
        if not getattr(numerics, name) > 0:
            raise ConfigError(f"{where}{name} must be positive")
    if numerics.n_thresholds < 32:
        raise ConfigError(f"{where}n_thresholds must be at least 32, got {numerics.n_thresholds}")
    if not 0.0 < numerics.threshold_epsilon < 0.5:
        raise ConfigError(f"{where}threshold_epsilon must lie in (0, 1/2)")
    if numerics.robin not in ("conformal", "plain"):
        raise ConfigError(f"{where}robin must be one of: conformal, plain")
    if numerics.preconditioner not in ("lu", "jacobi"):
        raise ConfigError(f"{where}preconditioner must be one of: lu, jacobi")
    if numerics.derivative_method not in ("spline", "pchip"):
        raise ConfigError(f"{where}derivative_method must be one of: spline, pchip")


def _build_task(item: Any, data: Dict[str, Any]) -> TaskConfig:
    if isinstance(item, str):
        kind, _, name = item.partition(":")
        return TaskConfig(kind=kind.strip(), name=name.strip() or None)
    if isinstance(item, dict) and "task" in item:
        kind, _, name = str(item["task"]).partition(":")
        params = {key: value for key, value in item.items() if key != "task"}
        return TaskConfig(
            kind=kind.strip(),
            name=name.strip() or None,
            params=params,
            line=getattr(item, "line", 0),
        )
    raise ConfigError(f"{_where(data)}task entries must be 'kind[:name]' or a mapping with a 'task' key")


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)
