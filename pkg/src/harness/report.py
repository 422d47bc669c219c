#!/usr/bin/env python3
"""
Report - 场景运行结果的持久化

报告只包含确定性内容（没有时间戳），同一场景 + 种子两次运行字节一致。
证据在报告中只存 sha256 摘要；完整抓包可另行写入旁路目录，文件名即摘要。
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from src import __version__
from src.probe.trace import Consensus, TraceResult
from src.probe.verdict import Evidence
from src.utils.errors import ReportConsistencyError

from .stats import Stats, aggregate

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class VerdictRow:
    """一条 (层, 域名, 观测点, 变形) 结论"""
    layer: str
    domain: str
    vantage: str
    mutation: Optional[str]
    verdict: str
    predicted: str
    evidence_digest: str
    metadata: Dict = field(default_factory=dict)
    inbound_packets: int = 0
    evidence: Optional[Evidence] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> Dict:
        return {
            "layer": self.layer,
            "domain": self.domain,
            "vantage": self.vantage,
            "mutation": self.mutation,
            "verdict": self.verdict,
            "predicted": self.predicted,
            "evidence_digest": self.evidence_digest,
            "metadata": self.metadata,
            "inbound_packets": self.inbound_packets,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "VerdictRow":
        return cls(**data)


@dataclass(frozen=True)
class MatrixRow:
    """协议矩阵中一个 (观测点, 目标) 的结果"""
    vantage: str
    label: str
    proto: str
    port: int
    template: str
    host: str
    verdict: str
    evidence_digest: str
    inbound_packets: int = 0
    evidence: Optional[Evidence] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> Dict:
        return {
            "vantage": self.vantage,
            "label": self.label,
            "proto": self.proto,
            "port": self.port,
            "template": self.template,
            "host": self.host,
            "verdict": self.verdict,
            "evidence_digest": self.evidence_digest,
            "inbound_packets": self.inbound_packets,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "MatrixRow":
        return cls(**data)


@dataclass
class Report:
    scenario: Dict
    seed: int
    domains: List[Dict]
    verdicts: List[VerdictRow]
    matrix: List[MatrixRow] = field(default_factory=list)
    domestic_matrix: List[MatrixRow] = field(default_factory=list)
    traces: List[TraceResult] = field(default_factory=list)
    consensus: Optional[Consensus] = None
    stats: Optional[Stats] = None
    tool_version: str = __version__

    def to_dict(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "scenario": self.scenario,
            "seed": self.seed,
            "domains": self.domains,
            "verdicts": [r.to_dict() for r in self.verdicts],
            "matrix": [r.to_dict() for r in self.matrix],
            "domestic_matrix": [r.to_dict() for r in self.domestic_matrix],
            "traces": [t.to_dict() for t in self.traces],
            "consensus": None if self.consensus is None else self.consensus.to_dict(),
            "stats": None if self.stats is None else self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Report":
        return cls(
            scenario=data["scenario"],
            seed=data["seed"],
            domains=data["domains"],
            verdicts=[VerdictRow.from_dict(r) for r in data["verdicts"]],
            matrix=[MatrixRow.from_dict(r) for r in data.get("matrix", [])],
            domestic_matrix=[MatrixRow.from_dict(r) for r in data.get("domestic_matrix", [])],
            traces=[TraceResult.from_dict(t) for t in data.get("traces", [])],
            consensus=Consensus.from_dict(data["consensus"]) if data.get("consensus") else None,
            stats=Stats.from_dict(data["stats"]) if data.get("stats") else None,
            tool_version=data.get("tool_version", __version__),
        )

    def verdict_counts(self) -> Dict[str, Dict[str, int]]:
        """层 -> 结论 -> 行数"""
        counts: Dict[str, Counter] = {}
        for row in self.verdicts:
            counts.setdefault(row.layer, Counter())[row.verdict] += 1
        return {layer: dict(sorted(c.items())) for layer, c in counts.items()}


def serialize_report(report: Report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def parse_report(text: str) -> Report:
    """
    解析报告并做自洽检查

    Raises:
        ReportConsistencyError: 结构损坏，或聚合值无法由原始行重算
    """
    try:
        report = Report.from_dict(json.loads(text))
    except (ValueError, KeyError, TypeError) as e:
        raise ReportConsistencyError(f"报告格式错误: {e}") from e

    recomputed = aggregate(report)
    if report.stats != recomputed:
        raise ReportConsistencyError("报告中的聚合值与原始结论行不一致")
    return report


def write_report(report: Report, path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_report(report))
    logger.info(f"报告已写入: {path}")
    return path


def load_report(path: str) -> Report:
    with open(path, "r", encoding="utf-8") as f:
        return parse_report(f.read())


def write_captures(report: Report, directory: str) -> int:
    """把完整抓包写入旁路目录（<摘要>.json），返回写入的文件数"""
    os.makedirs(directory, exist_ok=True)
    written = 0
    for row in list(report.verdicts) + list(report.matrix) + list(report.domestic_matrix):
        if row.evidence is None:
            continue
        target = os.path.join(directory, f"{row.evidence_digest}.json")
        if os.path.exists(target):
            continue
        with open(target, "w", encoding="utf-8") as f:
            json.dump(row.evidence.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        written += 1
    logger.info(f"抓包已写入 {directory}: {written} 个文件")
    return written


# ==================== 人类可读摘要 ====================

def render_summary(report: Report) -> str:
    stats = report.stats or aggregate(report)
    lines = [
        f"📋 场景: {report.scenario.get('name')}  种子: {report.seed}  版本: {report.tool_version}",
        "=" * 60,
        f"DNS 投毒比例:        {stats.poisoned_fraction:.4f}",
        f"  (仅 DNS 黑名单):   {stats.poisoned_fraction_of_blacklisted:.4f}",
        f"拦截页:              {stats.blockpage_count}",
        f"TCP RST:             {stats.rst_count}",
        f"SNI 重置:            {stats.sni_reset_count}",
        f"静默丢弃:            {stats.silent_drop_count}",
        f"HTTP 差异:           {stats.http_diff_count}",
        f"超时:                {stats.timeout_count}",
        f"放行协议:            {', '.join(stats.allowed_protocol_set) or '-'}",
        f"瓶颈共识:            {stats.chokepoint_consensus or '-'}",
        f"预测不一致:          {stats.oracle_disagreements}",
        "",
        "🔍 各层结论",
        "-" * 60,
    ]
    for layer, counts in report.verdict_counts().items():
        detail = "  ".join(f"{k}={v}" for k, v in counts.items())
        lines.append(f"  {layer:<5} {detail}")

    if report.matrix:
        lines += ["", "🌐 协议矩阵", "-" * 60]
        for row in report.matrix:
            lines.append(f"  {row.vantage:<14} {row.label:<14} {row.proto}/{row.port:<6} {row.verdict}")

    if report.domestic_matrix:
        lines += ["", "🏠 国内矩阵", "-" * 60]
        for row in report.domestic_matrix:
            lines.append(f"  {row.vantage:<14} {row.label:<14} {row.proto}/{row.port:<6} {row.verdict}")

    if report.traces:
        lines += ["", "📍 TTL 追踪", "-" * 60]
        for trace in report.traces:
            lines.append(
                f"  {trace.vantage:<14} {trace.layer.value:<5} {trace.target:<24} "
                f"ttl={trace.first_interfering_ttl or '-'} router={trace.chokepoint_router or '-'}"
            )
    return "\n".join(lines)
