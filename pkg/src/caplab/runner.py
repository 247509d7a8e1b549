"""Executes the tasks of a scenario in order and writes the report bundle."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import datetime as dt
import logging
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from caplab import __version__
from caplab.capacity_solver import (
    AxisymDomainSpec,
    CapacitySolution,
    LevelSetData,
    RadialPotential,
    asymptotic_fit,
    capacity_axisym_fd,
    capacity_radial,
    chebyshev_thresholds,
    extract_level_sets,
)
from caplab.config import MetricConfig, ScenarioConfig, TaskConfig
from caplab.geometry_models import (
    CoordinateSphere,
    RadialConformalMetric,
    SchwarzschildSpec,
    WarpedProductMetric,
    load_warped_csv,
    locate_horizon,
    schwarzschild_metric,
)
from caplab.gluing_lab import corner_jump_check, glue_summary, minkowski_gap
from caplab.inequality_harness import (
    HarnessError,
    InequalityReport,
    blowdown_boundary,
    rigidity_reports,
    schwarzschild_blowdown,
    verify_bray_miao,
    verify_capacity_hawking_bounds,
    verify_capacity_upper_bounds,
    verify_lc1,
    verify_lc2,
    verify_mass_capacity_and_penrose,
    verify_schwarzschild_corollaries,
    verify_shi_tam,
)
from caplab.meridian import MeridianCurve, load_meridian_csv
from caplab.profiles import PowerSeriesProfile, load_profile_csv
from caplab.quasilocal import (
    QuasiLocalReport,
    RevolutionSurfaceMetric,
    embed_revolution,
    induced_metric,
    schwarzschild_sphere_report,
    surface_report,
)
from caplab.report_store import ReportStore
from caplab.symmetrization import IsoperimetricProfile, rearranged_energy, szego_schwarzschild_compare


class ScenarioError(ValueError):
    """Raised when a task cannot be applied to the scenario's metric or boundary."""


_logger = logging.getLogger("ScenarioRunner")

Metric = Union[RadialConformalMetric, WarpedProductMetric]


@dataclass
class TaskResult:
    task_id: str
    kind: str
    name: Optional[str]
    status: str = "ok"
    payload: Dict[str, Any] = field(default_factory=dict)
    reports: Tuple[InequalityReport, ...] = ()
    error: Optional[str] = None

    @property
    def violated(self) -> bool:
        return self.kind == "verify" and any(report.violated for report in self.reports)

    def to_dict(self) -> dict:
        payload = {
            "task": self.task_id,
            "kind": self.kind,
            "name": self.name,
            "status": self.status,
            "result": self.payload,
            "reports": [report.to_dict() for report in self.reports],
        }
        if self.error is not None:
            payload["error"] = self.error
        return payload

    def summary_rows(self) -> List[dict]:
        if self.status != "ok":
            return [{"task": self.task_id, "name": self.name or self.kind, "status": self.status}]
        if not self.reports:
            return [{"task": self.task_id, "name": self.name or self.kind, "status": "ok"}]
        return [
            {
                "task": self.task_id,
                "name": report.name,
                "status": report.status,
                "lhs": report.lhs,
                "rhs": report.rhs,
                "gap": report.gap,
                "tolerance": report.tolerance,
                "satisfied": report.satisfied,
            }
            for report in self.reports
        ]


@dataclass
class RunOutcome:
    scenario_id: str
    bundle_dir: Path
    results: Tuple[TaskResult, ...]

    @property
    def exit_status(self) -> int:
        return 1 if any(result.violated for result in self.results) else 0


def build_metric(config: MetricConfig, boundary_start: Optional[float] = None) -> Metric:
    """Metric from its scenario entry; boundary_start bounds the domain start from above."""
    if config.kind == "schwarzschild":
        m = float(config.m)
        if m < 0:
            return schwarzschild_metric(SchwarzschildSpec(m, r_min=config.r_start))
        start = config.r_start
        if start is None:
            candidates = [x for x in (0.5 * m, boundary_start) if x is not None and x > 0]
            start = min(candidates) if candidates else None
        if start is None:
            raise ScenarioError("Flat metric needs r_start or a boundary to fix the domain start")
        return schwarzschild_metric(SchwarzschildSpec(m), r_start=start)
    if config.kind == "power_series":
        start = config.r_start if config.r_start is not None else boundary_start
        if start is None:
            raise ScenarioError("Power-series metric needs r_start when the boundary is located from the metric")
        u = PowerSeriesProfile.from_mapping(dict(config.terms), r_start=0.0)
        return RadialConformalMetric(u=u, r_b=float(start), tau=config.tau)
    if config.kind == "profile_csv":
        u = load_profile_csv(config.path)
        start = config.r_start if config.r_start is not None else u.domain[0]
        return RadialConformalMetric(u=u, r_b=float(start), tau=config.tau)
    return load_warped_csv(config.path)


class ScenarioContext:
    """Lazily built metric, boundary, solution and level sets shared by the tasks of one scenario."""

    def __init__(self, config: ScenarioConfig) -> None:
        self.config = config
        self._metric: Optional[Metric] = None
        self._boundary: Optional[MeridianCurve] = None
        self._solution: Optional[CapacitySolution] = None
        self._levels: Optional[LevelSetData] = None
        self._logger = logging.getLogger(self.__class__.__name__)

    @property
    def schwarzschild_mass(self) -> Optional[float]:
        metric = self.config.metric
        if metric.kind == "schwarzschild" and metric.m >= 0:
            return float(metric.m)
        return None

    @property
    def metric(self) -> Metric:
        if self._metric is None:
            self._build_geometry()
        return self._metric

    @property
    def boundary(self) -> MeridianCurve:
        if self._boundary is None:
            self._build_geometry()
        return self._boundary

    @property
    def conformal_metric(self) -> RadialConformalMetric:
        metric = self.metric
        if not isinstance(metric, RadialConformalMetric):
            raise ScenarioError("This task needs a conformally flat metric, not a warped product file")
        return metric

    def _build_geometry(self) -> None:
        boundary = self.config.boundary
        if boundary.kind == "horizon":
            metric = build_metric(self.config.metric)
            if not isinstance(metric, RadialConformalMetric):
                raise ScenarioError("Horizon boundaries need a conformally flat metric")
            radius = locate_horizon(metric)
            if radius is None:
                raise ScenarioError("Metric has no horizon to use as the boundary")
            curve = MeridianCurve.round(radius)
        else:
            curve = _build_curve(boundary)
            metric = build_metric(self.config.metric, boundary_start=curve.extent()[0])
        self._metric, self._boundary = metric, curve
        self._logger.info("Scenario %s: boundary %s", self.config.id, curve.label)

    @property
    def solution(self) -> CapacitySolution:
        if self._solution is None:
            numerics = self.config.numerics
            curve = self.boundary
            if curve.is_round:
                self._solution = capacity_radial(self.metric, float(curve.coefficients[0]))
            else:
                _, r_max = curve.extent()
                self._solution = capacity_axisym_fd(
                    AxisymDomainSpec(
                        boundary_curve=curve,
                        metric=self.conformal_metric,
                        truncation_radius=numerics.truncation_factor * r_max,
                        grid=numerics.grid,
                        robin=numerics.robin,
                        preconditioner=numerics.preconditioner,
                        cg_rtol=numerics.cg_rtol,
                        fd_tol=numerics.fd_tol,
                        estimate_truncation=numerics.estimate_truncation,
                    )
                )
        return self._solution

    @property
    def levels(self) -> LevelSetData:
        if self._levels is None:
            numerics = self.config.numerics
            thresholds = chebyshev_thresholds(numerics.n_thresholds, numerics.threshold_epsilon)
            self._levels = extract_level_sets(self.solution, thresholds)
        return self._levels

    def surface_report(self, curve: MeridianCurve, normal: str = "infinity") -> QuasiLocalReport:
        m = self.schwarzschild_mass
        if m is not None and curve.is_round:
            return schwarzschild_sphere_report(SchwarzschildSpec(m), CoordinateSphere(float(curve.coefficients[0])), normal)
        return surface_report(self.conformal_metric, curve, normal=normal)

    def surface_metric(self, curve: MeridianCurve) -> RevolutionSurfaceMetric:
        m = self.schwarzschild_mass
        if m is not None and curve.is_round:
            report = self.surface_report(curve)
            return RevolutionSurfaceMetric.round(report.area_radius)
        return induced_metric(self.conformal_metric, curve)

    def require_mass(self, task: str) -> float:
        m = self.schwarzschild_mass
        if m is None:
            raise ScenarioError(f"{task} needs a Schwarzschild metric with m >= 0")
        return m


def _build_curve(boundary) -> MeridianCurve:
    if boundary.kind == "sphere":
        return MeridianCurve.round(boundary.r0)
    if boundary.kind == "spheroid":
        return MeridianCurve.spheroid(boundary.a, boundary.c, modes=boundary.modes)
    if boundary.kind == "bumped":
        return MeridianCurve.bumped(boundary.r0, boundary.amplitude, boundary.degree, modes=boundary.modes)
    return load_meridian_csv(boundary.path)


def _capacity_task(ctx: ScenarioContext, task: TaskConfig, store: ReportStore, task_id: str) -> TaskResult:
    sol = ctx.solution
    payload = sol.summary()
    payload["asymptotic_fit"] = asymptotic_fit(sol)
    if isinstance(sol.potential, RadialPotential):
        potential = sol.potential
        store.write_data(
            task_id,
            ({"r": float(r), "phi": float(p)} for r, p in zip(potential.radii, potential.values)),
        )
    else:
        store.write_field(task_id, sol.potential, ctx.config.metric.fingerprint())
    return TaskResult(task_id, task.kind, task.name, payload=payload)


def _quasilocal_task(ctx: ScenarioContext, task: TaskConfig, store: ReportStore, task_id: str) -> TaskResult:
    report = ctx.surface_report(ctx.boundary)
    surface = ctx.surface_metric(ctx.boundary)
    rows = surface.rows()
    if report.total_H_g0 is not None:
        rows = embed_revolution(surface).rows()
    store.write_data(task_id, rows)
    return TaskResult(task_id, task.kind, task.name, payload=report.to_dict())


def _symmetrize_task(ctx: ScenarioContext, task: TaskConfig, store: ReportStore, task_id: str) -> TaskResult:
    m = ctx.schwarzschild_mass
    if m is not None:
        profile = IsoperimetricProfile(m)
    else:
        profile = IsoperimetricProfile(
            0.0,
            metric=ctx.conformal_metric,
            assume_isoperimetric=bool(task.params.get("assume_isoperimetric", False)),
        )
    levels = ctx.levels
    result = rearranged_energy(levels, profile, method=ctx.config.numerics.derivative_method)
    store.write_data(task_id, levels.rows())
    reports = (szego_schwarzschild_compare(ctx.solution, m),) if m is not None else ()
    return TaskResult(task_id, task.kind, task.name, payload=result.to_dict(), reports=reports)


def _verify_task(ctx: ScenarioContext, task: TaskConfig, store: ReportStore, task_id: str) -> TaskResult:
    name = task.name
    params = task.params
    if name == "mass_capacity":
        boundary_radius = params.get("boundary_radius")
        reports = verify_mass_capacity_and_penrose(
            ctx.conformal_metric, None if boundary_radius is None else float(boundary_radius)
        )
    elif name == "minkowski":
        reports = (minkowski_gap(ctx.surface_metric(ctx.boundary)),)
    elif name == "rigidity":
        reports = _rigidity(ctx, params)
    else:
        sol = ctx.solution
        if name == "lc2":
            c = float(params.get("c", 0.75))
            surface_r0 = params.get("surface_r0")
            if surface_r0 is not None:
                curve = MeridianCurve.round(float(surface_r0))
            else:
                curve = extract_level_sets(sol, [2.0 - 2.0 * c]).curve(0)
            reports = (verify_lc2(sol, c, ctx.surface_report(curve, normal="compact")),)
        elif name == "corollaries":
            reports = verify_schwarzschild_corollaries(sol, ctx.require_mass(name), float(params.get("c", 0.75)))
        elif name == "szego":
            reports = (szego_schwarzschild_compare(sol, ctx.require_mass(name)),)
        else:
            report = ctx.surface_report(ctx.boundary)
            if name == "lc1":
                reports = (verify_lc1(sol, report),)
            elif name == "bray_miao":
                reports = (verify_bray_miao(sol, report),)
            elif name == "upper_bounds":
                reports = (verify_capacity_upper_bounds(sol, report),)
            elif name == "hawking_bounds":
                reports = verify_capacity_hawking_bounds(sol, report, ctx.require_mass(name))
            else:
                metric = ctx.metric if isinstance(ctx.metric, RadialConformalMetric) else None
                reports = (verify_shi_tam(report, metric),)
    reports = tuple(reports)
    for report in reports:
        _logger.info("%s %s: %s (lhs %.12g, rhs %.12g, gap %.3e)", task_id, report.name, report.status, report.lhs, report.rhs, report.gap)
    return TaskResult(task_id, task.kind, task.name, payload={"count": len(reports)}, reports=reports)


def _rigidity(ctx: ScenarioContext, params: Dict[str, Any]) -> Tuple[InequalityReport, ...]:
    c = float(params.get("c", 0.5))
    m = ctx.schwarzschild_mass
    curve = ctx.boundary
    if m is not None and m > 0 and curve.is_round:
        data = schwarzschild_blowdown(SchwarzschildSpec(m), float(curve.coefficients[0]))
    else:
        metric = ctx.conformal_metric
        if not metric.is_flat:
            raise HarnessError("Blowdown bounds need Schwarzschild coordinate spheres or a flat exterior")
        data = blowdown_boundary(ctx.solution, float(params.get("A", 1.0)))
    return rigidity_reports(data, data.A, c)


def _glue_task(ctx: ScenarioContext, task: TaskConfig, store: ReportStore, task_id: str) -> TaskResult:
    glued, corner, report = glue_summary(float(task.params["m"]), float(task.params["m_prime"]))
    mirror = corner_jump_check(glued, mirror=True)
    payload = {"manifold": glued.to_dict(), "corner": corner.to_dict(), "mirror_corner": mirror.to_dict()}
    return TaskResult(task_id, task.kind, task.name, payload=payload, reports=(report,))


def _sweep_task(ctx: ScenarioContext, task: TaskConfig, store: ReportStore, task_id: str) -> TaskResult:
    """r0 sweep of the coordinate-sphere identity 2C = Lambda + (1/8pi) int H."""
    m = ctx.require_mass("sweep")
    spec = SchwarzschildSpec(m)
    unit = 0.5 * m if m > 0 else 1.0
    radii = np.geomspace(
        float(task.params.get("start", 0.25)) * unit,
        float(task.params.get("stop", 8.0)) * unit,
        int(task.params.get("count", 25)),
    )
    tolerance = ctx.config.numerics.closed_form_tol
    rows = []
    for r0 in radii:
        start = min(0.5 * m, float(r0)) if m > 0 else float(r0)
        sol = capacity_radial(schwarzschild_metric(spec, r_start=start), float(r0))
        report = schwarzschild_sphere_report(spec, CoordinateSphere(float(r0)))
        mean = report.total_H_g / (8.0 * math.pi)
        gap = report.lambda_value + mean - 2.0 * sol.capacity
        rows.append(
            {
                "r0": float(r0),
                "capacity": sol.capacity,
                "lambda": report.lambda_value,
                "mean_curvature_integral": mean,
                "gap": gap,
                "within_tolerance": abs(gap) <= tolerance * max(1.0, sol.capacity),
            }
        )
    store.write_data(task_id, rows)
    worst = max(abs(row["gap"]) for row in rows)
    return TaskResult(task_id, task.kind, task.name, payload={"rows": len(rows), "max_abs_gap": worst})


_HANDLERS: Dict[str, Callable[[ScenarioContext, TaskConfig, ReportStore, str], TaskResult]] = {
    "capacity": _capacity_task,
    "quasilocal": _quasilocal_task,
    "symmetrize": _symmetrize_task,
    "verify": _verify_task,
    "glue": _glue_task,
    "sweep": _sweep_task,
}


class ScenarioRunner:
    def __init__(self, config: ScenarioConfig, out_dir: Path, argv: Sequence[str] = ()) -> None:
        self._config = config
        self._store = ReportStore(Path(out_dir), config.id)
        self._argv = list(argv)
        self._logger = logging.getLogger(self.__class__.__name__)

    def run(self, only: Optional[str] = None) -> RunOutcome:
        ctx = ScenarioContext(self._config)
        started = dt.datetime.now(dt.timezone.utc)
        results = []
        summary_rows = []
        for index, task in enumerate(self._config.tasks):
            if only is not None and task.kind != only:
                continue
            task_id = f"{index + 1:02d}-{task.label}"
            result = self._run_task(ctx, task, task_id)
            results.append(result)
            summary_rows.extend(result.summary_rows())
            payload = result.to_dict()
            payload["numerics"] = self._config.numerics.to_dict()
            self._store.write_report(task_id, payload)
        self._store.write_summary(summary_rows)
        self._store.write_manifest(
            {
                "scenario_id": self._config.id,
                "metric_fingerprint": self._config.metric.fingerprint(),
                "source": self._config.source,
                "argv": self._argv,
                "version": __version__,
                "started": started.isoformat(),
                "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
                "tasks": [result.task_id for result in results],
            }
        )
        outcome = RunOutcome(self._config.id, self._store.bundle_dir, tuple(results))
        self._logger.info(
            "Scenario %s finished: %d tasks, exit status %d", self._config.id, len(results), outcome.exit_status
        )
        return outcome

    def _run_task(self, ctx: ScenarioContext, task: TaskConfig, task_id: str) -> TaskResult:
        self._logger.info("Running %s", task_id)
        try:
            return _HANDLERS[task.kind](ctx, task, self._store, task_id)
        except Exception as exc:  # recorded per task; the bundle is still written
            self._logger.error("Task %s failed: %s: %s", task_id, type(exc).__name__, exc)
            return TaskResult(task_id, task.kind, task.name, status="error", error=f"{type(exc).__name__}: {exc}")


def run_batch(
    configs: Sequence[ScenarioConfig],
    out_dir: Path,
    workers: int = 1,
    only: Optional[str] = None,
    argv: Sequence[str] = (),
) -> List[RunOutcome]:
    """Run scenarios concurrently; tasks inside one scenario stay sequential."""

    def run_one(config: ScenarioConfig) -> RunOutcome:
        return ScenarioRunner(config, out_dir, argv).run(only=only)

    if workers <= 1 or len(configs) <= 1:
        return [run_one(config) for config in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, configs))
