#!/usr/bin/env python3
"""
TTL Trace - 干扰点定位

从 ttl=1 开始逐跳递增发送触发报文，第一个产生干扰（注入响应或静默丢弃）
的 ttl 就是瓶颈所在跳；各观测点的定位结果再汇总成共识。
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from src.netsim.network import DeliveryKind, DeliveryOutcome
from src.netsim.world import World
from src.utils.errors import EmptyInputError

from .probes import ProbeFactory
from .verdict import Layer, Mutation

logger = logging.getLogger(__name__)

DEFAULT_MAX_TTL = 16


class TraceOutcome(Enum):
    TIME_EXCEEDED = "TIME_EXCEEDED"
    INTERFERENCE = "INTERFERENCE"
    DELIVERED = "DELIVERED"


def trace_outcome(outcome: DeliveryOutcome) -> TraceOutcome:
    if outcome.kind is DeliveryKind.TIME_EXCEEDED:
        return TraceOutcome.TIME_EXCEEDED
    if outcome.interfered:
        return TraceOutcome.INTERFERENCE
    return TraceOutcome.DELIVERED


@dataclass(frozen=True)
class TraceResult:
    """
    一次 TTL 追踪

    per_ttl_outcomes 按 ttl 升序；遇到干扰或送达即停止。
    """
    layer: Layer
    target: str
    vantage: str
    per_ttl_outcomes: Tuple[Tuple[int, TraceOutcome], ...] = ()
    first_interfering_ttl: Optional[int] = None
    chokepoint_router: Optional[str] = None

    def __post_init__(self):
        if self.first_interfering_ttl is not None:
            for ttl, outcome in self.per_ttl_outcomes:
                if ttl < self.first_interfering_ttl and outcome is not TraceOutcome.TIME_EXCEEDED:
                    raise ValueError(f"ttl={ttl} 早于首个干扰跳却不是 TIME_EXCEEDED")

    def to_dict(self) -> Dict:
        return {
            "layer": self.layer.value,
            "target": self.target,
            "vantage": self.vantage,
            "per_ttl_outcomes": [[ttl, outcome.value] for ttl, outcome in self.per_ttl_outcomes],
            "first_interfering_ttl": self.first_interfering_ttl,
            "chokepoint_router": self.chokepoint_router,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TraceResult":
        return cls(
            layer=Layer(data["layer"]),
            target=data["target"],
            vantage=data["vantage"],
            per_ttl_outcomes=tuple((int(t), TraceOutcome(o)) for t, o in data["per_ttl_outcomes"]),
            first_interfering_ttl=data.get("first_interfering_ttl"),
            chokepoint_router=data.get("chokepoint_router"),
        )


def ttl_trace(probe_kind, target: str, vantage: str, world: World,
              max_ttl: int = DEFAULT_MAX_TTL, mutation: Optional[Mutation] = None) -> TraceResult:
    """
    对 target 做 TTL 追踪

    Args:
        probe_kind: 探测层 (dns/http/tls)
        target: 域名
        vantage: 观测点
        world: 模拟世界
        max_ttl: 最大 ttl
        mutation: HTTP 请求变形

    Returns:
        TraceResult；没有干扰时 first_interfering_ttl 为 None
    """
    if max_ttl < 1:
        raise ValueError(f"max_ttl 必须 >= 1: {max_ttl}")

    probe = ProbeFactory.create(probe_kind, world, vantage)
    outcomes: List[Tuple[int, TraceOutcome]] = []
    first = None

    for ttl in range(1, max_ttl + 1):
        kind = trace_outcome(probe.send_limited(target, ttl, mutation))
        outcomes.append((ttl, kind))
        if kind is TraceOutcome.INTERFERENCE:
            first = ttl
            break
        if kind is TraceOutcome.DELIVERED:
            break

    router = world.topology.hop_router(vantage, first) if first is not None else None
    logger.debug(f"[{vantage}] {probe.layer.value} 追踪 {target}: 首个干扰 ttl={first} 路由器={router}")
    return TraceResult(
        layer=probe.layer,
        target=target,
        vantage=vantage,
        per_ttl_outcomes=tuple(outcomes),
        first_interfering_ttl=first,
        chokepoint_router=router,
    )


class ConsensusKind(Enum):
    UNANIMOUS = "UNANIMOUS"
    DIVERGENT = "DIVERGENT"


@dataclass(frozen=True)
class Consensus:
    """
    跨观测点共识

    unlocalized: 追踪到最后也没有定位出路由器的观测点；非空时一定是 DIVERGENT
    """
    kind: ConsensusKind
    routers: Tuple[str, ...] = field(default_factory=tuple)
    unlocalized: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def router(self) -> Optional[str]:
        return self.routers[0] if self.kind is ConsensusKind.UNANIMOUS else None

    def to_dict(self) -> Dict:
        return {"kind": self.kind.value, "routers": list(self.routers), "unlocalized": list(self.unlocalized)}

    @classmethod
    def from_dict(cls, data: Dict) -> "Consensus":
        return cls(ConsensusKind(data["kind"]), tuple(data["routers"]), tuple(data.get("unlocalized", ())))

    def __str__(self) -> str:
        if self.kind is ConsensusKind.UNANIMOUS:
            return f"UNANIMOUS({self.routers[0]})"
        text = ", ".join(self.routers)
        if self.unlocalized:
            text += f"; unlocalized: {', '.join(self.unlocalized)}"
        return f"DIVERGENT({text})"


def consensus_chokepoint(traces: List[TraceResult]) -> Consensus:
    """
    汇总各观测点定位到的路由器（按身份比较，跳数可以不同）

    只有每条追踪都定位到同一个路由器时才是 UNANIMOUS；
    部分追踪没有定位结果时记为 DIVERGENT，并列出这些观测点。

    Raises:
        EmptyInputError: 没有追踪，或所有追踪都没有定位结果
    """
    routers = [t.chokepoint_router for t in traces if t.chokepoint_router is not None]
    if not routers:
        raise EmptyInputError("没有可用于共识的追踪结果")

    distinct = tuple(sorted(set(routers)))
    unlocalized = tuple(sorted({t.vantage for t in traces if t.chokepoint_router is None}))
    if len(distinct) == 1 and not unlocalized:
        return Consensus(ConsensusKind.UNANIMOUS, distinct)
    return Consensus(ConsensusKind.DIVERGENT, distinct, unlocalized)
