#!/usr/bin/env python3
"""
Verdict - 探测结论与分类

classify() 只看抓包记录本身（报文顺序、负载），与基线比对后给出结论:
- DNS: 应答地址落在投毒地址池 -> DNS_POISONED；与基线不一致 -> DNS_POISONED；一致 -> OK
- HTTP: 403 且正文含拦截页标记 -> HTTP_BLOCKPAGE；请求后收到 RST -> TCP_RST；
        指纹与基线一致 -> OK；其它响应 -> HTTP_DIFF
- TLS: ClientHello 之后、任何服务端握手字节之前收到 RST -> TLS_RST_AFTER_CLIENTHELLO；
       收到服务端握手 -> OK
没有任何响应时，首个报文被静默丢弃记为 SILENT_DROP，否则记为 TIMEOUT。
"""

import hashlib
import ipaddress
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from src.netsim.flow import CapturedPacket, ConnectionResult, Direction
from src.utils.errors import MalformedDnsError, MalformedHttpError, MissingBaselineError
from src.wire.classifier import TcpFlag
from src.wire.dns_codec import decode_dns
from src.wire.http_codec import HttpResponse, parse_http_response
from src.wire.tls_codec import is_server_hello

if TYPE_CHECKING:
    from .baseline import BaselineEntry


class VerdictKind(Enum):
    OK = "OK"
    DNS_POISONED = "DNS_POISONED"
    HTTP_BLOCKPAGE = "HTTP_BLOCKPAGE"
    HTTP_DIFF = "HTTP_DIFF"
    TCP_RST = "TCP_RST"
    TLS_RST_AFTER_CLIENTHELLO = "TLS_RST_AFTER_CLIENTHELLO"
    SILENT_DROP = "SILENT_DROP"
    TIMEOUT = "TIMEOUT"


class Layer(Enum):
    DNS = "dns"
    HTTP = "http"
    TLS = "tls"

    @classmethod
    def parse(cls, value) -> "Layer":
        return value if isinstance(value, cls) else cls(str(value).lower())


class Mutation(Enum):
    """HTTP 请求变形（用于检验大小写敏感的过滤规则）"""
    METHOD_CASE = "method_case"
    HEADER_CASE = "header_case"


@dataclass(frozen=True)
class ProbeSettings:
    """探测端配置: 已知的投毒 / 保留地址段与拦截页标记"""
    poison_networks: Tuple[str, ...] = ("10.10.34.0/24",)
    blockpage_marker: str = "10.10.34.34"

    def is_poison(self, address: str) -> bool:
        try:
            ip = ipaddress.IPv4Address(address)
        except ValueError:
            return False
        return any(ip in ipaddress.IPv4Network(net) for net in self.poison_networks)


DEFAULT_SETTINGS = ProbeSettings()


@dataclass(frozen=True)
class Evidence:
    """结论依据: 有序抓包 + 元数据（DNS 应答 TTL、HTTP 状态码、SNI）"""
    packets: Tuple[CapturedPacket, ...] = ()
    dns_answers: Tuple[Tuple[str, str, int], ...] = ()
    http_status: Optional[int] = None
    sni: Optional[str] = None

    @property
    def inbound_count(self) -> int:
        return sum(1 for p in self.packets if p.direction is Direction.IN)

    @property
    def inbound_bytes(self) -> int:
        return sum(len(p.packet.payload) for p in self.packets if p.direction is Direction.IN)

    def metadata(self) -> Dict:
        return {
            "dns_answers": [list(a) for a in self.dns_answers],
            "http_status": self.http_status,
            "sni": self.sni,
        }

    def to_dict(self) -> Dict:
        return {
            "packets": [p.to_dict() for p in self.packets],
            "metadata": self.metadata(),
        }

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class Verdict:
    value: VerdictKind
    evidence: Evidence = field(default_factory=Evidence)


@dataclass(frozen=True)
class Observation:
    """一次探测交换的原始观测"""
    layer: Layer
    packets: Tuple[CapturedPacket, ...]
    dropped: bool = False
    connection: Optional[ConnectionResult] = None
    sni: Optional[str] = None


def body_digest(body: bytes) -> str:
    return hashlib.sha256(body).hexdigest()


def _inbound_after(packets: Tuple[CapturedPacket, ...], index: int) -> List:
    return [c.packet for c in packets[index + 1:] if c.direction is Direction.IN]


def _last_data_out(packets: Tuple[CapturedPacket, ...]) -> Optional[int]:
    """最后一个带负载的出方向报文（即触发报文）的位置"""
    for i in range(len(packets) - 1, -1, -1):
        if packets[i].direction is Direction.OUT and packets[i].packet.payload:
            return i
    return None


def _silence(observed: Observation) -> VerdictKind:
    return VerdictKind.SILENT_DROP if observed.dropped else VerdictKind.TIMEOUT


def _dns_answers(observed: Observation) -> Optional[Tuple[Tuple[str, str, int], ...]]:
    for capture in observed.packets:
        if capture.direction is not Direction.IN:
            continue
        try:
            message = decode_dns(capture.packet.payload)
        except MalformedDnsError:
            continue
        if message.is_response:
            return message.answers
    return None


def _http_response(inbound) -> Optional[HttpResponse]:
    for pkt in inbound:
        if not pkt.payload:
            continue
        try:
            return parse_http_response(pkt.payload)
        except MalformedHttpError:
            continue
    return None


def _classify_dns(observed: Observation, entry: "BaselineEntry", settings: ProbeSettings):
    answers = _dns_answers(observed)
    if answers is None:
        return _silence(observed), ()
    addresses = [address for _, address, _ in answers]
    if any(settings.is_poison(a) for a in addresses):
        return VerdictKind.DNS_POISONED, answers
    if set(addresses) != set(entry.addresses):
        return VerdictKind.DNS_POISONED, answers
    return VerdictKind.OK, answers


def _classify_tcp_setup(observed: Observation) -> Optional[VerdictKind]:
    if observed.connection is ConnectionResult.RESET_AT_SYN:
        return VerdictKind.TCP_RST
    if observed.connection is ConnectionResult.SILENT_TIMEOUT:
        return _silence(observed)
    return None


def _classify_http(observed: Observation, entry: "BaselineEntry", settings: ProbeSettings):
    setup = _classify_tcp_setup(observed)
    if setup is not None:
        return setup, None

    request_index = _last_data_out(observed.packets)
    if request_index is None:
        return _silence(observed), None

    inbound = _inbound_after(observed.packets, request_index)
    response = _http_response(inbound)
    if response is not None:
        if response.status_code == 403 and settings.blockpage_marker.encode() in response.body:
            return VerdictKind.HTTP_BLOCKPAGE, response.status_code
        fingerprint = (response.status_code, body_digest(response.body))
        if entry.http is not None and fingerprint == entry.http.as_tuple():
            return VerdictKind.OK, response.status_code
        return VerdictKind.HTTP_DIFF, response.status_code

    if any(p.has_flag(TcpFlag.RST) for p in inbound):
        return VerdictKind.TCP_RST, None
    return _silence(observed), None


def _classify_tls(observed: Observation):
    setup = _classify_tcp_setup(observed)
    if setup is not None:
        return setup

    hello_index = _last_data_out(observed.packets)
    if hello_index is None:
        return _silence(observed)

    for pkt in _inbound_after(observed.packets, hello_index):
        if pkt.payload and is_server_hello(pkt.payload):
            return VerdictKind.OK
        if pkt.has_flag(TcpFlag.RST):
            return VerdictKind.TLS_RST_AFTER_CLIENTHELLO
    return _silence(observed)


def classify(observed: Observation, baseline_entry: Optional["BaselineEntry"],
             settings: ProbeSettings = DEFAULT_SETTINGS) -> Verdict:
    """
    按层对观测分类（纯函数）

    Raises:
        MissingBaselineError: 没有该域名的基线
    """
    if baseline_entry is None:
        raise MissingBaselineError(f"缺少基线，无法对 {observed.layer.value} 观测分类")

    answers: Tuple = ()
    status = None
    if observed.layer is Layer.DNS:
        value, answers = _classify_dns(observed, baseline_entry, settings)
    elif observed.layer is Layer.HTTP:
        value, status = _classify_http(observed, baseline_entry, settings)
    else:
        value = _classify_tls(observed)

    evidence = Evidence(
        packets=observed.packets,
        dns_answers=tuple(answers),
        http_status=status,
        sni=observed.sni,
    )
    return Verdict(value=value, evidence=evidence)
