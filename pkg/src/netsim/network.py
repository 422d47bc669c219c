#!/usr/bin/env python3
"""
Network - 逐跳转发

forward() 沿发送方的路径逐跳前进:
1. 到达瓶颈路由器时交给审查中间盒检查（中间盒在 ttl 递减前看到报文）
2. 每跳 ttl 减 1，减到 0 即返回 TIME_EXCEEDED
3. 走完全程则送达目的主机，由主机服务生成响应

初始 ttl 为 t 的报文到达第 i 跳当且仅当 t >= i。
回程报文不再经过审查。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from src.censor.blockpage import render_blockpage
from src.censor.engine import CensorAction, CensorActionKind, FlowState, apply_policy
from src.censor.policy import CensorPolicy
from src.wire.classifier import TcpFlag
from src.wire.dns_codec import DnsMessage, decode_dns, encode_dns
from src.wire.http_codec import render_http_response

from . import services
from .packet import Packet
from .topology import Topology

logger = logging.getLogger(__name__)


class DeliveryKind(Enum):
    DELIVERED = "DELIVERED"
    TIME_EXCEEDED = "TIME_EXCEEDED"
    INJECTED_RESPONSE = "INJECTED_RESPONSE"
    SILENTLY_DROPPED = "SILENTLY_DROPPED"


@dataclass(frozen=True)
class DeliveryOutcome:
    """
    转发结果

    router / hop_index: TIME_EXCEEDED 时为 ttl 耗尽的跳；审查动作时为瓶颈所在跳。
    injected: INJECTED_RESPONSE 时为第一个注入报文。
    """
    kind: DeliveryKind
    response_packets: Tuple[Packet, ...] = ()
    router: Optional[str] = None
    hop_index: Optional[int] = None
    injected: Optional[Packet] = None
    action: Optional[CensorAction] = None

    def __post_init__(self):
        object.__setattr__(self, "response_packets", tuple(self.response_packets))
        if self.kind is DeliveryKind.SILENTLY_DROPPED and self.response_packets:
            raise ValueError("静默丢弃不能产生响应报文")
        if self.kind is DeliveryKind.TIME_EXCEEDED and (self.router is None or self.hop_index is None):
            raise ValueError("TIME_EXCEEDED 必须指明跳")

    @property
    def interfered(self) -> bool:
        return self.kind in (DeliveryKind.INJECTED_RESPONSE, DeliveryKind.SILENTLY_DROPPED)


def materialize(action: CensorAction, pkt: Packet) -> Tuple[Packet, ...]:
    """把审查动作落实为发回客户端的报文（伪造服务端身份）"""
    if action.kind is CensorActionKind.INJECT_DNS:
        query = decode_dns(pkt.payload)
        forged = DnsMessage(
            id=query.id,
            is_response=True,
            qname=query.qname,
            answers=((query.qname, action.address, action.ttl_seconds),),
        )
        return (pkt.reply(payload=encode_dns(forged)),)

    if action.kind is CensorActionKind.INJECT_BLOCKPAGE:
        page = render_http_response(render_blockpage())
        return (
            pkt.reply(payload=page, tcp_flags={TcpFlag.PSH, TcpFlag.ACK}),
            pkt.reply(tcp_flags={TcpFlag.FIN, TcpFlag.ACK}),
        )

    if action.kind is CensorActionKind.INJECT_RST:
        return (pkt.reply(tcp_flags={TcpFlag.RST, TcpFlag.ACK}),)

    return ()


def forward(pkt: Packet, topo: Topology, policy: Optional[CensorPolicy],
            flow_state: Optional[FlowState] = None) -> DeliveryOutcome:
    """
    转发一个报文

    Args:
        pkt: 待发送报文（ttl >= 1）
        topo: 拓扑
        policy: 审查策略；None 表示瓶颈上没有挂中间盒
        flow_state: 报文所属流的中间盒状态（None 视为新流的首个报文）

    Raises:
        UnknownHostError: src / dst 不在拓扑中
    """
    if pkt.ttl < 1:
        raise ValueError(f"发送时 ttl 必须 >= 1: {pkt.ttl}")

    path = topo.path_to(pkt.src, pkt.dst)
    state = flow_state if flow_state is not None else FlowState()
    ttl = pkt.ttl

    for hop_index, router in enumerate(path, start=1):
        if router == topo.chokepoint and policy is not None:
            action = apply_policy(pkt.with_ttl(ttl), state, policy)
            state.record(pkt, action)

            if action.kind is CensorActionKind.DROP:
                logger.debug(f"{router}(#{hop_index}) 静默丢弃 {pkt.src}->{pkt.dst}:{pkt.dst_port}")
                return DeliveryOutcome(DeliveryKind.SILENTLY_DROPPED, router=router,
                                       hop_index=hop_index, action=action)

            if not action.is_pass:
                injected = materialize(action, pkt)
                logger.debug(f"{router}(#{hop_index}) 注入 {action.kind.value} -> {pkt.src}")
                return DeliveryOutcome(DeliveryKind.INJECTED_RESPONSE, response_packets=injected,
                                       router=router, hop_index=hop_index,
                                       injected=injected[0], action=action)

        ttl -= 1
        if ttl == 0:
            return DeliveryOutcome(DeliveryKind.TIME_EXCEEDED, router=router, hop_index=hop_index)

    responses = services.respond(pkt.with_ttl(ttl), topo.host(pkt.dst))
    return DeliveryOutcome(DeliveryKind.DELIVERED, response_packets=responses)
