#!/usr/bin/env python3
"""
Protocol Classifier - 传输负载协议分类

分类是 (传输层, 目的端口, 首个数据单元) 的纯函数:
端口与负载语法必须同时匹配，才会归入 DNS_UDP / HTTP / TLS。
"""

from enum import Enum

from .dns_codec import is_dns_query
from .http_codec import looks_like_http_request
from .tls_codec import is_client_hello


class Transport(Enum):
    """传输层类型（TCP-lite / UDP-lite）"""
    TCP = "tcp"
    UDP = "udp"


class TcpFlag(Enum):
    """TCP 标志位（TCP-lite 只关心标志语义，不做序号运算）"""
    SYN = "S"
    ACK = "A"
    RST = "R"
    FIN = "F"
    PSH = "P"


class ProtocolClass(Enum):
    """协议类别"""
    DNS_UDP = "DNS_UDP"
    HTTP = "HTTP"
    TLS = "TLS"
    OTHER = "OTHER"


# 白名单协议对应的 (传输层, 端口)
WELL_KNOWN_PORTS = {
    ProtocolClass.DNS_UDP: (Transport.UDP, 53),
    ProtocolClass.HTTP: (Transport.TCP, 80),
    ProtocolClass.TLS: (Transport.TCP, 443),
}


def classify_protocol(proto: Transport, dst_port: int, payload: bytes) -> ProtocolClass:
    """
    对流的首个数据单元分类

    Args:
        proto: 传输层
        dst_port: 目的端口
        payload: 首个数据单元（TCP 握手阶段可为空）

    Returns:
        ProtocolClass，无法识别时为 OTHER
    """
    if not payload:
        return ProtocolClass.OTHER

    if proto is Transport.UDP and dst_port == 53 and is_dns_query(payload):
        return ProtocolClass.DNS_UDP
    if proto is Transport.TCP and dst_port == 80 and looks_like_http_request(payload):
        return ProtocolClass.HTTP
    if proto is Transport.TCP and dst_port == 443 and is_client_hello(payload):
        return ProtocolClass.TLS
    return ProtocolClass.OTHER


def port_class(proto: Transport, dst_port: int) -> ProtocolClass:
    """仅按端口推断的类别（用于尚无负载的 TCP 握手阶段）"""
    for cls, (transport, port) in WELL_KNOWN_PORTS.items():
        if proto is transport and dst_port == port:
            return cls
    return ProtocolClass.OTHER
