"""Load sweeps over the comparison schemes, power accounting and DES validation."""

from __future__ import annotations

import csv
import io
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

import fogscale
from fogscale.analytics import InstabilityError, QueueParameters, full_report
from fogscale.controller import ScalingDecision, ScalingState, controller_step
from fogscale.des import SimConfig, run_simulation
from fogscale.scenario import Scenario, ValidationPoint

MANIFEST_VERSION = 1
UNIT_POWER = 1.0


class ComparisonError(ValueError):
    pass


class NotApplicableError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeSpec:
    name: str
    priority_enabled: bool
    scaling_enabled: bool


PROPOSED = SchemeSpec("proposed", True, True)
PRIORITY_ONLY = SchemeSpec("priority-only", True, False)
SCALING_ONLY = SchemeSpec("scaling-only", False, True)
BASELINE = SchemeSpec("baseline", False, False)
SCHEMES = {s.name: s for s in (PROPOSED, PRIORITY_ONLY, SCALING_ONLY, BASELINE)}


@dataclass
class SweepResult:
    scheme: SchemeSpec
    decisions: list[ScalingDecision]

    @property
    def lambdas(self) -> list[float]:
        return [d.arrival_rate for d in self.decisions]

    @property
    def node_counts(self) -> list[int]:
        return [d.chosen_m for d in self.decisions]


@dataclass
class PowerReport:
    total_power: float
    per_point_power: list[float]
    comparison_baseline_power: float | None = None
    reduction_percent: float | None = None

    @property
    def baseline_excess_percent(self) -> float | None:
        """How much more the baseline draws, relative to this scheme's total."""
        if self.comparison_baseline_power is None or self.total_power == 0:
            return None
        return 100.0 * (self.comparison_baseline_power - self.total_power) / self.total_power


def run_sweep(scheme: SchemeSpec, scenario: Scenario, grid: Sequence[float] | None = None,
              carry_state: bool | None = None) -> SweepResult:
    """Step the scheme through increasing load.

    Scaling schemes carry controller state from one point to the next unless
    ``carry_state`` is false, in which case every point starts from ``m_init``.
    Non-scaling schemes stay at ``m_init`` throughout.
    """
    grid = list(scenario.lambda_grid if grid is None else grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    carry = scenario.carry_state if carry_state is None else carry_state
    policy, mix = scenario.policy, scenario.mix

    def fresh() -> ScalingState:
        if scheme.scaling_enabled:
            return ScalingState.initial(policy, scenario.m_init)
        return ScalingState(current_m=scenario.m_init, effective_m_max=scenario.m_init)

    state = fresh()
    decisions = []
    for lam in grid:
        if not carry:
            state = fresh()
        state, decision = controller_step(
            state, lam, scenario.mu, mix, policy,
            scaling=scheme.scaling_enabled, priority=scheme.priority_enabled,
        )
        decisions.append(decision)
    return SweepResult(scheme, decisions)


def power_consumption(result: SweepResult, baseline: SweepResult | None = None) -> PowerReport:
    per_point = [m * UNIT_POWER for m in result.node_counts]
    total = float(sum(per_point))
    if baseline is None:
        return PowerReport(total, per_point)
    if baseline.lambdas != result.lambdas:
        raise ComparisonError("sweeps were run on different load grids")
    base_total = float(sum(m * UNIT_POWER for m in baseline.node_counts))
    reduction = 100.0 * (base_total - total) / base_total if base_total else 0.0
    return PowerReport(total, per_point, base_total, reduction)


def find_sct_switch(result: SweepResult) -> float | None:
    """Smallest load at which system-critical tasks sit in class 1."""
    if not result.scheme.priority_enabled:
        raise NotApplicableError(f"scheme {result.scheme.name!r} has no priority classes")
    for d in result.decisions:
        if d.sct_in_class1:
            return d.arrival_rate
    return None


@dataclass
class ValidationRow:
    arrival_rate: float
    service_rate: float
    servers: int
    metric: str
    analytic: float
    simulated: float
    stderr: float
    passed: bool


@dataclass
class ValidationReport:
    rows: list[ValidationRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list[ValidationRow]:
        return [r for r in self.rows if not r.passed]


def within(analytic: float, simulated: float, stderr: float, rel: float, n_se: float) -> bool:
    allowed = max(rel * abs(analytic), n_se * stderr if math.isfinite(stderr) else 0.0)
    return abs(simulated - analytic) <= allowed


def validate_against_des(points: Iterable[ValidationPoint], *, seed: int = 42, replications: int = 20,
                         horizon: int = 55_556, warmup_fraction: float = 0.1,
                         rel_tolerance: float = 0.05, se_tolerance: float = 3.0) -> ValidationReport:
    """Simulate each grid point and compare with the closed forms.

    Point ``i`` uses seeds ``seed + i*replications`` onward. Besides the two
    class delays and the mean population, each point gets a ``littles_law``
    row: the mean per-run gap between measured population and
    ``lambda * sojourn``, which must be zero within ``se_tolerance`` SEs.
    """
    points = list(points)
    for p in points:
        params = QueueParameters(p.arrival_rate, p.service_rate, p.servers)
        if not params.is_stable:
            raise InstabilityError(
                f"validation point lambda={p.arrival_rate}, m={p.servers} is unstable", params.utilization
            )
    report = ValidationReport()
    for i, p in enumerate(points):
        params = QueueParameters(p.arrival_rate, p.service_rate, p.servers)
        analytic = full_report(params, p.mix)
        config = SimConfig(params, p.mix, horizon=horizon, warmup_fraction=warmup_fraction,
                           seed=(seed + i * replications) % 2**64, replications=replications)
        stats = run_simulation(config)
        checks = [("w1", analytic.w1, stats.mean_w1, stats.se_w1)]
        if p.mix.class1_share < 1.0:
            checks.append(("w2", analytic.w2, stats.mean_w2, stats.se_w2))
        checks.append(("mean_tasks", analytic.mean_tasks, stats.mean_tasks_in_system, stats.se_tasks_in_system))

        def row(metric, a, s, se, ok):
            return ValidationRow(p.arrival_rate, p.service_rate, p.servers, metric, a, s, se, ok)

        for metric, a, s, se in checks:
            report.rows.append(row(metric, a, s, se, within(a, s, se, rel_tolerance, se_tolerance)))
        gaps = np.array([r.mean_tasks_in_system - p.arrival_rate * r.mean_sojourn for r in stats.runs])
        gap_se = float(gaps.std(ddof=1) / math.sqrt(gaps.size))
        gap = float(gaps.mean())
        report.rows.append(row("littles_law", 0.0, gap, gap_se, abs(gap) <= se_tolerance * gap_se))
    return report


def validate_scenario(scenario: Scenario) -> ValidationReport:
    return validate_against_des(
        scenario.validation_grid, seed=scenario.seed, replications=scenario.replications,
        horizon=scenario.horizon, warmup_fraction=scenario.warmup_fraction,
        rel_tolerance=scenario.rel_tolerance, se_tolerance=scenario.se_tolerance,
    )


# ---------------------------------------------------------------------------
# file output

def _num(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def _lam(x: float) -> str:
    return f"{x:g}"


def _write_csv(path: Path, header: list[str], rows: Iterable[Sequence[object]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_bytes(buf.getvalue().encode("utf-8"))


def delay_rows(sweeps: Sequence[SweepResult]) -> list[tuple]:
    rows = []
    for sweep in sweeps:
        for d in sweep.decisions:
            rows.append((_lam(d.arrival_rate), sweep.scheme.name, "1", _num(d.w1)))
            rows.append((_lam(d.arrival_rate), sweep.scheme.name, "2", _num(d.w2)))
            if sweep.scheme.priority_enabled:
                rows.append((_lam(d.arrival_rate), sweep.scheme.name, "sct", _num(d.w_sct)))
    return rows


def emit_results(destination: str | Path, *, scenario: Scenario, sweeps: Sequence[SweepResult] = (),
                 validation: ValidationReport | None = None, run_info: dict | None = None) -> list[Path]:
    """Write CSV datasets plus ``manifest.yaml`` into ``destination``.

    Sweeps produce delays.csv, nodes_power.csv, sct.csv (first priority
    scheme) and power_summary.csv; a validation report produces
    validation.csv. Output is byte-for-byte deterministic.
    """
    out = Path(destination)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if sweeps:
        path = out / "delays.csv"
        _write_csv(path, ["lambda", "scheme", "class", "delay_seconds"], delay_rows(sweeps))
        written.append(path)

        path = out / "nodes_power.csv"
        _write_csv(path, ["lambda", "scheme", "nodes", "power_units"], [
            (_lam(d.arrival_rate), s.scheme.name, d.chosen_m, _num(d.chosen_m * UNIT_POWER))
            for s in sweeps for d in s.decisions
        ])
        written.append(path)

        priority = [s for s in sweeps if s.scheme.priority_enabled]
        if priority:
            path = out / "sct.csv"
            _write_csv(path, ["lambda", "sct_class", "w2_seconds", "threshold_seconds"], [
                (_lam(d.arrival_rate), 1 if d.sct_in_class1 else 2, _num(d.w2_at_scaling),
                 _num(scenario.w_sct_threshold))
                for d in priority[0].decisions
            ])
            written.append(path)

        baseline = next((s for s in sweeps if s.scheme == BASELINE), None)
        summary = []
        for s in sweeps:
            rep = power_consumption(s, baseline)
            summary.append((s.scheme.name, _num(rep.total_power), _num(rep.comparison_baseline_power),
                            _num(rep.reduction_percent), _num(rep.baseline_excess_percent),
                            sum(not d.feasible for d in s.decisions)))
        path = out / "power_summary.csv"
        _write_csv(path, ["scheme", "total_power", "baseline_power", "reduction_percent",
                          "baseline_excess_percent", "infeasible_points"], summary)
        written.append(path)

    if validation is not None:
        path = out / "validation.csv"
        _write_csv(path, ["lambda", "mu", "m", "metric", "analytic", "simulated", "stderr", "pass"], [
            (_lam(r.arrival_rate), _lam(r.service_rate), r.servers, r.metric, _num(r.analytic),
             _num(r.simulated), _num(r.stderr), "true" if r.passed else "false")
            for r in validation.rows
        ])
        written.append(path)

    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "run": dict(run_info or {}),
        "tool_versions": {
            "fogscale": fogscale.__version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pyyaml": yaml.__version__,
        },
        "outputs": [p.name for p in written],
        "scenario": scenario.to_dict(),
    }
    path = out / "manifest.yaml"
    path.write_bytes(yaml.safe_dump(manifest, sort_keys=False).encode("utf-8"))
    written.append(path)
    return written
