#!/usr/bin/env python3
"""
Layer Probes - 分层主动探测

每一层一个探测器，统一接口:
- trigger_payload(): 探测的触发数据单元（DNS 查询 / HTTP 请求 / ClientHello）
- observe(): 在模拟网络中完成一次交换，返回原始观测
- run(): 观测 + 与基线比对分类
- send_limited(): 用指定 ttl 发送触发报文（供 TTL 追踪使用）

工作流程:
1. ProbeFactory 按层创建探测器
2. TCP 层先握手，握手失败本身就是测量结果
3. 发送触发报文，抓包交给 classify() 分类
"""

import logging
import random
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from src.netsim.flow import ConnectionResult, Direction, Flow
from src.netsim.network import DeliveryKind, DeliveryOutcome
from src.netsim.world import World
from src.utils.errors import MalformedDnsError
from src.wire.classifier import TcpFlag, Transport
from src.wire.dns_codec import DnsMessage, decode_dns, encode_dns_query
from src.wire.http_codec import HttpRequest, serialize_http_request
from src.wire.tls_codec import build_client_hello

from .baseline import Baseline, BaselineEntry, measure_entry
from .verdict import (
    DEFAULT_SETTINGS, Evidence, Layer, Mutation, Observation, ProbeSettings, Verdict,
    VerdictKind, classify,
)

logger = logging.getLogger(__name__)

USER_AGENT = "chokepoint-probe/1.0"
MATRIX_DOMAIN = "example.org"


def query_id_for(domain: str) -> int:
    """按域名派生的固定 DNS 事务 ID"""
    return zlib.crc32(domain.lower().encode("ascii", "replace")) & 0xFFFF


def mixed_case(text: str, upper_first: bool = True) -> str:
    """交替大小写: mixed_case("instagram.com") -> "InStAgRaM.CoM" """
    first, second = (str.upper, str.lower) if upper_first else (str.lower, str.upper)
    return "".join(first(c) if i % 2 == 0 else second(c) for i, c in enumerate(text))


def build_http_request(domain: str, path: str = "/", mutation: Optional[Mutation] = None) -> bytes:
    """构造探测用 GET 请求，可选大小写变形"""
    method = "GET"
    host_header = ("Host", domain)
    if mutation is Mutation.METHOD_CASE:
        method = "gET"
    elif mutation is Mutation.HEADER_CASE:
        host_header = (mixed_case("host", upper_first=False), mixed_case(domain))

    request = HttpRequest(
        method=method,
        path=path,
        version="HTTP/1.1",
        headers=(host_header, ("User-Agent", USER_AGENT), ("Accept", "*/*")),
    )
    return serialize_http_request(request)


# ==================== 分层探测器 ====================

class LayerProbe(ABC):
    """探测器基类"""

    layer: Layer
    proto: Transport
    port: int

    def __init__(self, world: World, vantage: str, settings: ProbeSettings = DEFAULT_SETTINGS):
        self.world = world
        self.vantage = vantage
        self.settings = settings

    @abstractmethod
    def destination(self, domain: str) -> str:
        """探测的目的主机"""
        pass

    @abstractmethod
    def trigger_payload(self, domain: str, mutation: Optional[Mutation] = None, path: str = "/") -> bytes:
        pass

    def sni(self, domain: str) -> Optional[str]:
        return None

    def open_flow(self, domain: str) -> Flow:
        return self.world.flow(self.vantage, self.destination(domain), self.proto, self.port)

    def observe(self, domain: str, mutation: Optional[Mutation] = None, path: str = "/") -> Observation:
        flow = self.open_flow(domain)
        connection = None
        if self.proto is Transport.TCP:
            connection = flow.connect()
        if connection in (None, ConnectionResult.ESTABLISHED):
            flow.send(self.trigger_payload(domain, mutation, path))

        return Observation(
            layer=self.layer,
            packets=tuple(flow.capture),
            dropped=any(o.kind is DeliveryKind.SILENTLY_DROPPED for o in flow.outcomes),
            connection=connection,
            sni=self.sni(domain),
        )

    def run(self, domain: str, baseline_entry: Optional[BaselineEntry],
            mutation: Optional[Mutation] = None, path: str = "/") -> Verdict:
        verdict = classify(self.observe(domain, mutation, path), baseline_entry, self.settings)
        logger.debug(f"[{self.vantage}] {self.layer.value} {domain} -> {verdict.value.value}")
        return verdict

    def send_limited(self, domain: str, ttl: int, mutation: Optional[Mutation] = None) -> DeliveryOutcome:
        """
        以 ttl 发送触发报文

        TCP 层先用完整 ttl 握手；握手本身被拦截时改为对 SYN 限跳，
        这样白名单丢弃也能定位。
        """
        flow = self.open_flow(domain)
        if self.proto is Transport.TCP and flow.connect() is not ConnectionResult.ESTABLISHED:
            return self.open_flow(domain).send(tcp_flags={TcpFlag.SYN}, ttl=ttl)
        return flow.send(self.trigger_payload(domain, mutation), ttl=ttl)


class DnsProbe(LayerProbe):
    """UDP/53 A 查询"""

    layer = Layer.DNS
    proto = Transport.UDP
    port = 53

    def destination(self, domain: str) -> str:
        return self.world.resolver

    def trigger_payload(self, domain: str, mutation: Optional[Mutation] = None, path: str = "/") -> bytes:
        return encode_dns_query(query_id_for(domain), domain)


class HttpProbe(LayerProbe):
    """TCP/80 明文 GET"""

    layer = Layer.HTTP
    proto = Transport.TCP
    port = 80

    def destination(self, domain: str) -> str:
        return self.world.origin_for(domain)

    def trigger_payload(self, domain: str, mutation: Optional[Mutation] = None, path: str = "/") -> bytes:
        return build_http_request(domain, path, mutation)


class TlsProbe(LayerProbe):
    """TCP/443 ClientHello，send_sni=False 时不带 SNI 扩展"""

    layer = Layer.TLS
    proto = Transport.TCP
    port = 443

    def __init__(self, world: World, vantage: str, settings: ProbeSettings = DEFAULT_SETTINGS,
                 send_sni: bool = True):
        super().__init__(world, vantage, settings)
        self.send_sni = send_sni

    def destination(self, domain: str) -> str:
        return self.world.origin_for(domain)

    def sni(self, domain: str) -> Optional[str]:
        return domain if self.send_sni else None

    def trigger_payload(self, domain: str, mutation: Optional[Mutation] = None, path: str = "/") -> bytes:
        return build_client_hello(self.sni(domain))


class ProbeFactory:
    """探测器工厂"""

    _probes = {
        Layer.DNS: DnsProbe,
        Layer.HTTP: HttpProbe,
        Layer.TLS: TlsProbe,
    }

    @classmethod
    def create(cls, layer, world: World, vantage: str, **kwargs) -> LayerProbe:
        """
        创建探测器

        Args:
            layer: Layer 或其字符串值 (dns/http/tls)
            world: 模拟世界
            vantage: 观测点
            **kwargs: 其他参数（如 settings、send_sni）
        """
        layer = Layer.parse(layer)
        probe_class = cls._probes.get(layer)
        if probe_class is None:
            raise ValueError(f"未知探测层 '{layer}'，可用: {[l.value for l in cls._probes]}")
        return probe_class(world, vantage, **kwargs)

    @classmethod
    def list_layers(cls) -> List[str]:
        return [layer.value for layer in cls._probes]

    @classmethod
    def register_probe(cls, layer: Layer, probe_class: type):
        """注册自定义探测器"""
        cls._probes[layer] = probe_class


# ==================== 单域名探测 ====================

def _baseline_entry(domain: str, world: World, baseline: Optional[Baseline],
                    settings: ProbeSettings) -> Optional[BaselineEntry]:
    if baseline is not None:
        return baseline.get(domain)
    return measure_entry(domain, world, settings)


def dns_probe(domain: str, vantage: str, world: World, baseline: Optional[Baseline] = None,
              settings: ProbeSettings = DEFAULT_SETTINGS) -> Tuple[Verdict, Optional[DnsMessage]]:
    """
    DNS 探测

    Returns:
        (结论, 收到的第一条 DNS 应答；没有应答时为 None)

    Raises:
        UnknownHostError: 观测点或解析器不存在
        MissingBaselineError: 给定的基线里没有该域名
    """
    entry = _baseline_entry(domain, world, baseline, settings)
    verdict = ProbeFactory.create(Layer.DNS, world, vantage, settings=settings).run(domain, entry)

    answer = None
    for capture in verdict.evidence.packets:
        if capture.direction is Direction.IN:
            try:
                answer = decode_dns(capture.packet.payload)
                break
            except MalformedDnsError:
                continue
    return verdict, answer


def http_probe(domain: str, path: str, vantage: str, world: World,
               mutation: Optional[Mutation] = None, baseline: Optional[Baseline] = None,
               settings: ProbeSettings = DEFAULT_SETTINGS) -> Verdict:
    entry = _baseline_entry(domain, world, baseline, settings)
    return ProbeFactory.create(Layer.HTTP, world, vantage, settings=settings).run(domain, entry, mutation, path)


def tls_probe(domain: str, vantage: str, world: World, baseline: Optional[Baseline] = None,
              send_sni: bool = True, settings: ProbeSettings = DEFAULT_SETTINGS) -> Verdict:
    entry = _baseline_entry(domain, world, baseline, settings)
    probe = ProbeFactory.create(Layer.TLS, world, vantage, settings=settings, send_sni=send_sni)
    return probe.run(domain, entry)


# ==================== 协议矩阵 ====================

def _openvpn_payload(rng: random.Random, domain: str) -> bytes:
    # P_CONTROL_HARD_RESET_CLIENT_V2, key id 0, 8 字节会话 ID，无 ACK，packet id 0
    session = bytes(rng.getrandbits(8) for _ in range(8))
    return b"\x38" + session + b"\x00" + b"\x00\x00\x00\x00"


def _ssh_payload(rng: random.Random, domain: str) -> bytes:
    return b"SSH-2.0-OpenSSH_9.6\r\n"


def _mqtt_payload(rng: random.Random, domain: str) -> bytes:
    # CONNECT, MQTT 3.1.1, clean session, keepalive 60, client id "probe"
    return b"\x10\x11\x00\x04MQTT\x04\x02\x00\x3c\x00\x05probe"


def _random_payload(rng: random.Random, domain: str) -> bytes:
    return bytes(rng.getrandbits(8) for _ in range(32))


PAYLOAD_TEMPLATES: Dict[str, Callable[[random.Random, str], bytes]] = {
    "dns": lambda rng, domain: encode_dns_query(rng.getrandbits(16), domain),
    "http": lambda rng, domain: build_http_request(domain),
    "tls": lambda rng, domain: build_client_hello(domain),
    "openvpn": _openvpn_payload,
    "ssh": _ssh_payload,
    "mqtt": _mqtt_payload,
    "random": _random_payload,
}


@dataclass(frozen=True)
class MatrixTarget:
    """协议矩阵中的一个目标；host 为空时使用世界里的默认境外服务器"""
    proto: Transport
    port: int
    template: str
    host: Optional[str] = None
    domain: str = MATRIX_DOMAIN

    def __post_init__(self):
        if self.template not in PAYLOAD_TEMPLATES:
            raise ValueError(f"未知负载模板: {self.template}")
        if not 0 <= self.port <= 0xFFFF:
            raise ValueError(f"端口超出范围: {self.port}")

    @property
    def label(self) -> str:
        return f"{self.template.upper()}/{self.port}"

    def to_dict(self) -> Dict:
        return {
            "proto": self.proto.value,
            "port": self.port,
            "template": self.template,
            "host": self.host,
            "label": self.label,
        }


def _matrix_verdict(flow: Flow, connection: Optional[ConnectionResult]) -> VerdictKind:
    if any(o.kind is DeliveryKind.SILENTLY_DROPPED for o in flow.outcomes):
        return VerdictKind.SILENT_DROP
    if connection is ConnectionResult.RESET_AT_SYN or any(p.has_flag(TcpFlag.RST) for p in flow.inbound):
        return VerdictKind.TCP_RST
    if flow.inbound and (connection is None or len(flow.inbound) > 1):
        return VerdictKind.OK
    return VerdictKind.TIMEOUT


def probe_target(target: MatrixTarget, vantage: str, world: World, rng: random.Random) -> Verdict:
    """对一个矩阵目标建立流并发送模板负载"""
    dst = target.host or world.external_server
    flow = world.flow(vantage, dst, target.proto, target.port)
    connection = None
    if target.proto is Transport.TCP:
        connection = flow.connect()
    if connection in (None, ConnectionResult.ESTABLISHED):
        flow.send(PAYLOAD_TEMPLATES[target.template](rng, target.domain))

    value = _matrix_verdict(flow, connection)
    logger.debug(f"[{vantage}] 矩阵 {target.label} -> {dst}: {value.value}")
    return Verdict(value=value, evidence=Evidence(packets=tuple(flow.capture)))


def protocol_matrix(vantage: str, world: World, targets: List[MatrixTarget],
                    rng: Optional[random.Random] = None) -> List[Tuple[MatrixTarget, Verdict]]:
    """
    协议矩阵: 逐个目标尝试建流

    Raises:
        ValueError: 目标列表为空
    """
    if not targets:
        raise ValueError("协议矩阵目标列表为空")
    rng = rng or random.Random(0)
    return [(target, probe_target(target, vantage, world, rng)) for target in targets]
