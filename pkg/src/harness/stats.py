#!/usr/bin/env python3
"""
Stats - 由原始结论行重算的聚合统计
"""

from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional

from src.probe.trace import consensus_chokepoint
from src.probe.verdict import Layer, VerdictKind
from src.utils.errors import EmptyInputError, EmptyReportError

if TYPE_CHECKING:
    from .report import Report


@dataclass(frozen=True)
class Stats:
    """
    poisoned_fraction: DNS_POISONED 行 / 全部 DNS 结论行
    poisoned_fraction_of_blacklisted: 同上，但只统计 DNS 黑名单域名
    allowed_protocol_set: 在所有观测点上都 OK 的矩阵目标
    silent_drop_count: 结论行与境外矩阵中的 SILENT_DROP 总数
    """
    poisoned_fraction: float
    poisoned_fraction_of_blacklisted: float
    blockpage_count: int
    rst_count: int
    sni_reset_count: int
    silent_drop_count: int
    http_diff_count: int
    timeout_count: int
    allowed_protocol_set: List[str] = field(default_factory=list)
    chokepoint_consensus: Optional[str] = None
    chokepoint_hops: Dict[str, int] = field(default_factory=dict)
    oracle_disagreements: int = 0

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "Stats":
        return cls(**data)


def _fraction(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def aggregate(report: "Report") -> Stats:
    """
    从报告的原始行计算聚合值

    Raises:
        EmptyReportError: 报告中没有任何 DNS 结论
    """
    dns_rows = [r for r in report.verdicts if r.layer == Layer.DNS.value]
    if not dns_rows:
        raise EmptyReportError("报告中没有 DNS 结论，无法聚合")

    poisoned = VerdictKind.DNS_POISONED.value
    dns_blacklisted = {d["name"] for d in report.domains if "dns" in d["layers"]}
    blacklisted_rows = [r for r in dns_rows if r.domain in dns_blacklisted]

    def count(kind: VerdictKind, rows=None) -> int:
        return sum(1 for r in (report.verdicts if rows is None else rows) if r.verdict == kind.value)

    matrix_drops = sum(1 for r in report.matrix if r.verdict == VerdictKind.SILENT_DROP.value)

    labels = list(dict.fromkeys(r.label for r in report.matrix))
    allowed = [
        label for label in labels
        if all(r.verdict == VerdictKind.OK.value for r in report.matrix if r.label == label)
    ]

    try:
        consensus = str(consensus_chokepoint(report.traces))
    except EmptyInputError:
        consensus = None

    hops: Dict[str, int] = {}
    for trace in report.traces:
        if trace.first_interfering_ttl is not None:
            hops.setdefault(trace.vantage, trace.first_interfering_ttl)

    return Stats(
        poisoned_fraction=_fraction(count(VerdictKind.DNS_POISONED, dns_rows), len(dns_rows)),
        poisoned_fraction_of_blacklisted=_fraction(
            sum(1 for r in blacklisted_rows if r.verdict == poisoned), len(blacklisted_rows)),
        blockpage_count=count(VerdictKind.HTTP_BLOCKPAGE),
        rst_count=count(VerdictKind.TCP_RST),
        sni_reset_count=count(VerdictKind.TLS_RST_AFTER_CLIENTHELLO),
        silent_drop_count=count(VerdictKind.SILENT_DROP) + matrix_drops,
        http_diff_count=count(VerdictKind.HTTP_DIFF),
        timeout_count=count(VerdictKind.TIMEOUT),
        allowed_protocol_set=sorted(allowed),
        chokepoint_consensus=consensus,
        chokepoint_hops=dict(sorted(hops.items())),
        oracle_disagreements=sum(1 for r in report.verdicts if r.verdict != r.predicted),
    )
