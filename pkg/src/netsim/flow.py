#!/usr/bin/env python3
"""
Flow - 单条流的发送端

每条在途流独占自己的可变状态:
- 中间盒流状态（首个数据单元的分类、是否已被丢弃）
- 抓包记录（按时间顺序的出 / 入报文）
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional

from src.censor.engine import FlowState
from src.censor.policy import CensorPolicy
from src.wire.classifier import TcpFlag, Transport

from .network import DeliveryKind, DeliveryOutcome, forward
from .packet import DEFAULT_TTL, Packet
from .topology import Topology

logger = logging.getLogger(__name__)

EPHEMERAL_PORT = 49152


class ConnectionResult(Enum):
    ESTABLISHED = "ESTABLISHED"
    RESET_AT_SYN = "RESET_AT_SYN"
    SILENT_TIMEOUT = "SILENT_TIMEOUT"


class Direction(Enum):
    OUT = "out"
    IN = "in"


@dataclass(frozen=True)
class CapturedPacket:
    """抓包记录中的一条"""
    direction: Direction
    packet: Packet

    def to_dict(self) -> Dict:
        record = {"direction": self.direction.value}
        record.update(self.packet.to_dict())
        return record


class Flow:
    """
    一条 TCP-lite / UDP-lite 流

    Args:
        topo: 拓扑
        policy: 审查策略（None 表示不经过中间盒）
        src / dst: 源 / 目的主机
        proto: 传输层
        dst_port: 目的端口
        src_port: 源端口
        ttl: 默认初始 ttl
    """

    def __init__(self, topo: Topology, policy: Optional[CensorPolicy], src: str, dst: str,
                 proto: Transport, dst_port: int, src_port: int = EPHEMERAL_PORT,
                 ttl: int = DEFAULT_TTL):
        self.topo = topo
        self.policy = policy
        self.src = src
        self.dst = dst
        self.proto = proto
        self.src_port = src_port
        self.dst_port = dst_port
        self.ttl = ttl
        self.state = FlowState()
        self.capture: List[CapturedPacket] = []
        self.outcomes: List[DeliveryOutcome] = []

    def packet(self, payload: bytes = b"", tcp_flags: Optional[Iterable[TcpFlag]] = None,
               ttl: Optional[int] = None) -> Packet:
        if self.proto is Transport.TCP:
            flags = frozenset(tcp_flags if tcp_flags is not None else ({TcpFlag.PSH, TcpFlag.ACK} if payload else {TcpFlag.ACK}))
        else:
            flags = None
        return Packet(
            src=self.src,
            dst=self.dst,
            proto=self.proto,
            src_port=self.src_port,
            dst_port=self.dst_port,
            ttl=self.ttl if ttl is None else ttl,
            tcp_flags=flags,
            payload=payload,
        )

    def send(self, payload: bytes = b"", tcp_flags: Optional[Iterable[TcpFlag]] = None,
             ttl: Optional[int] = None) -> DeliveryOutcome:
        """发送一个报文并记录出 / 入方向的抓包"""
        pkt = self.packet(payload, tcp_flags, ttl)
        self.capture.append(CapturedPacket(Direction.OUT, pkt))
        outcome = forward(pkt, self.topo, self.policy, flow_state=self.state)
        self.outcomes.append(outcome)
        for response in outcome.response_packets:
            self.capture.append(CapturedPacket(Direction.IN, response))
        return outcome

    def connect(self) -> ConnectionResult:
        """三次握手: SYN -> SYN/ACK -> ACK"""
        if self.proto is not Transport.TCP:
            raise ValueError("只有 TCP 流需要握手")

        outcome = self.send(tcp_flags={TcpFlag.SYN})
        if any(p.has_flag(TcpFlag.RST) for p in outcome.response_packets):
            return ConnectionResult.RESET_AT_SYN

        if not any(p.has_flag(TcpFlag.SYN) and p.has_flag(TcpFlag.ACK) for p in outcome.response_packets):
            logger.debug(f"{self.src}->{self.dst}:{self.dst_port} SYN 无响应 ({outcome.kind.value})")
            return ConnectionResult.SILENT_TIMEOUT

        self.send(tcp_flags={TcpFlag.ACK})
        return ConnectionResult.ESTABLISHED

    @property
    def first_packet_dropped(self) -> bool:
        return bool(self.outcomes) and self.outcomes[0].kind is DeliveryKind.SILENTLY_DROPPED

    @property
    def inbound(self) -> List[Packet]:
        return [c.packet for c in self.capture if c.direction is Direction.IN]


def tcp_handshake(client: str, server: str, dst_port: int, topo: Topology,
                  policy: Optional[CensorPolicy]) -> ConnectionResult:
    """
    对 server:dst_port 做一次 TCP 握手

    Raises:
        UnknownHostError: client / server 不在拓扑中
    """
    return Flow(topo, policy, client, server, Transport.TCP, dst_port).connect()
