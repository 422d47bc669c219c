"""
场景编排: 场景加载、探测执行、聚合统计与报告持久化
"""

from .scenario import DomainCategory, Scenario, bundled_scenarios, load_scenario, scenario_from_dict
from .executor import ExecutionResult, ProbeExecutor, ProbeTask
from .stats import Stats, aggregate
from .report import (
    MatrixRow,
    Report,
    VerdictRow,
    load_report,
    parse_report,
    render_summary,
    serialize_report,
    write_captures,
    write_report,
)
from .runner import ScenarioRunner, run_scenario

__all__ = [
    "DomainCategory", "Scenario", "bundled_scenarios", "load_scenario", "scenario_from_dict",
    "ExecutionResult", "ProbeExecutor", "ProbeTask",
    "Stats", "aggregate",
    "MatrixRow", "Report", "VerdictRow", "load_report", "parse_report", "render_summary",
    "serialize_report", "write_captures", "write_report",
    "ScenarioRunner", "run_scenario",
]
