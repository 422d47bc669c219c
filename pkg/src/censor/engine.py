#!/usr/bin/env python3
"""
Censor Engine - DPI 中间盒决策引擎

对每个经过瓶颈的报文给出唯一的审查动作。层序固定:
  (0) 豁免域名直接放行
  (1) 协议白名单
  (2) DNS 投毒
  (3) HTTP 过滤
  (4) SNI 过滤
首个命中的层决定动作。只检查流的首个数据单元；被丢弃的流后续报文一律丢弃。

所有判定函数都是纯函数，流状态由调用方在拿到动作后更新。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

from src.utils.errors import MalformedDnsError, MalformedHttpError, MalformedTlsError, NotClientHelloError
from src.wire.classifier import ProtocolClass, Transport, classify_protocol, port_class
from src.wire.dns_codec import decode_dns
from src.wire.http_codec import CANONICAL_METHODS, HttpRequest, parse_http_request
from src.wire.tls_codec import ClientHello, parse_client_hello

from .policy import BlockAction, CensorPolicy

if TYPE_CHECKING:
    from src.netsim.packet import Packet

logger = logging.getLogger(__name__)


class CensorActionKind(Enum):
    PASS = "PASS"
    INJECT_DNS = "INJECT_DNS"
    INJECT_BLOCKPAGE = "INJECT_BLOCKPAGE"
    INJECT_RST = "INJECT_RST"
    DROP = "DROP"


class CensorLayer(Enum):
    """做出决定的过滤层"""
    WHITELIST = "whitelist"
    DNS = "dns"
    HTTP = "http"
    SNI = "sni"


class WhitelistDecision(Enum):
    ALLOW = "ALLOW"
    DROP = "DROP"


@dataclass(frozen=True)
class CensorAction:
    """审查动作；address / ttl_seconds 仅 INJECT_DNS 使用"""
    kind: CensorActionKind
    address: Optional[str] = None
    ttl_seconds: Optional[int] = None
    layer: Optional[CensorLayer] = None
    protocol_class: Optional[ProtocolClass] = None

    @property
    def is_pass(self) -> bool:
        return self.kind is CensorActionKind.PASS


@dataclass(frozen=True)
class PoisonDecision:
    address: str
    ttl_seconds: int


@dataclass
class FlowState:
    """中间盒为单条流保存的状态"""
    classified: bool = False
    protocol_class: Optional[ProtocolClass] = None
    dropped: bool = False

    def record(self, pkt: "Packet", action: CensorAction) -> None:
        """根据本次动作更新流状态"""
        if action.kind is CensorActionKind.DROP:
            self.dropped = True
        if pkt.payload and not self.classified:
            self.classified = True
            self.protocol_class = action.protocol_class


# ==================== 单层匹配 ====================

def match_dns(qname: str, policy: CensorPolicy) -> Optional[PoisonDecision]:
    """DNS 黑名单匹配；白名单优先"""
    if policy.is_exempt(qname):
        return None
    for pattern in policy.dns_blacklist:
        if pattern.matches(qname):
            return PoisonDecision(
                address=pattern.poison_address or policy.poison_address,
                ttl_seconds=policy.poison_ttl_seconds,
            )
    return None


def match_http(req: HttpRequest, policy: CensorPolicy) -> Optional[BlockAction]:
    """
    HTTP 规则匹配

    方法名必须与规范方法逐字节相等，规则引擎才会介入（"gET" 之类的变体不会被检查）。
    """
    if req.method not in CANONICAL_METHODS:
        return None
    host = req.host or ""
    if policy.is_exempt(host):
        return None
    for rule in policy.http_rules:
        if rule.matches(host, req.path):
            return rule.action
    return None


def match_sni(hello: ClientHello, policy: CensorPolicy) -> Optional[BlockAction]:
    """SNI 黑名单匹配；无 SNI 时不命中"""
    if hello.sni is None or policy.is_exempt(hello.sni):
        return None
    for pattern in policy.sni_blacklist:
        if pattern.matches(hello.sni):
            return BlockAction.RST
    return None


def whitelist_check(cls: ProtocolClass, policy: CensorPolicy) -> WhitelistDecision:
    if not policy.whitelist_mode or cls in policy.allowed_classes:
        return WhitelistDecision.ALLOW
    return WhitelistDecision.DROP


# ==================== 组合决策 ====================

def payload_domain(payload: bytes) -> Optional[str]:
    """尽力从负载中取出域名（DNS qname / HTTP Host / TLS SNI），与端口无关"""
    try:
        message = decode_dns(payload)
        if not message.is_response:
            return message.qname
    except MalformedDnsError:
        pass
    try:
        return parse_http_request(payload).host
    except MalformedHttpError:
        pass
    try:
        return parse_client_hello(payload).sni
    except (NotClientHelloError, MalformedTlsError):
        pass
    return None


def _pass(cls: Optional[ProtocolClass] = None) -> CensorAction:
    return CensorAction(CensorActionKind.PASS, protocol_class=cls)


def _drop(cls: Optional[ProtocolClass] = None) -> CensorAction:
    return CensorAction(CensorActionKind.DROP, layer=CensorLayer.WHITELIST, protocol_class=cls)


def apply_policy(pkt: "Packet", flow_state: Optional[FlowState], policy: CensorPolicy) -> CensorAction:
    """
    对经过瓶颈的报文做出审查决定

    Args:
        pkt: 报文
        flow_state: 该五元组的流状态（None 视为新流）
        policy: 审查策略

    Returns:
        CensorAction（恰好一种动作）
    """
    state = flow_state or FlowState()

    if pkt.payload and policy.is_exempt(payload_domain(pkt.payload)):
        return _pass(state.protocol_class)

    if state.dropped:
        return _drop(state.protocol_class)

    # TCP 控制报文: 仅按端口对 SYN 做临时放行判定，首个数据段到达时再复核
    if pkt.proto is Transport.TCP and not pkt.payload:
        if pkt.is_syn:
            cls = port_class(pkt.proto, pkt.dst_port)
            if whitelist_check(cls, policy) is WhitelistDecision.DROP:
                return _drop(cls)
        return _pass(state.protocol_class)

    if state.classified:
        return _pass(state.protocol_class)

    cls = classify_protocol(pkt.proto, pkt.dst_port, pkt.payload)

    if whitelist_check(cls, policy) is WhitelistDecision.DROP:
        return _drop(cls)

    if cls is ProtocolClass.DNS_UDP:
        decision = match_dns(decode_dns(pkt.payload).qname, policy)
        if decision is not None:
            return CensorAction(
                CensorActionKind.INJECT_DNS,
                address=decision.address,
                ttl_seconds=decision.ttl_seconds,
                layer=CensorLayer.DNS,
                protocol_class=cls,
            )

    elif cls is ProtocolClass.HTTP:
        try:
            request = parse_http_request(pkt.payload)
        except MalformedHttpError:
            # 请求头不完整（跨段），不做匹配
            return _pass(cls)
        action = match_http(request, policy)
        if action is BlockAction.BLOCKPAGE:
            return CensorAction(CensorActionKind.INJECT_BLOCKPAGE, layer=CensorLayer.HTTP, protocol_class=cls)
        if action is BlockAction.RST:
            return CensorAction(CensorActionKind.INJECT_RST, layer=CensorLayer.HTTP, protocol_class=cls)

    elif cls is ProtocolClass.TLS:
        if match_sni(parse_client_hello(pkt.payload), policy) is not None:
            return CensorAction(CensorActionKind.INJECT_RST, layer=CensorLayer.SNI, protocol_class=cls)

    return _pass(cls)
