#!/usr/bin/env python3
"""
Host Services - 模拟主机的应用层行为

所有响应都是确定性的:
- 解析器: 按 zone 应答 A 查询
- 其他服务端主机: 任意端口接受 TCP 连接；HTTP 请求返回 200 页面，
  ClientHello 返回 ServerHello，其余负载原样回显
"""

import logging
from typing import Tuple

from src.utils.errors import MalformedDnsError, MalformedHttpError, MalformedTlsError, NotClientHelloError
from src.wire.classifier import TcpFlag, Transport
from src.wire.dns_codec import DnsMessage, decode_dns, encode_dns
from src.wire.http_codec import HttpResponse, parse_http_request, render_http_response
from src.wire.tls_codec import build_server_hello, parse_client_hello

from .packet import Packet
from .topology import HostRole, HostSpec

logger = logging.getLogger(__name__)

SYN_ACK = frozenset({TcpFlag.SYN, TcpFlag.ACK})
PSH_ACK = frozenset({TcpFlag.PSH, TcpFlag.ACK})
FIN_ACK = frozenset({TcpFlag.FIN, TcpFlag.ACK})


def origin_page(host: str, path: str) -> HttpResponse:
    """源站页面；主机名按小写处理，与请求中的大小写无关"""
    host = host.lower()
    body = f"<html><head><title>{host}</title></head><body>{host}{path}</body></html>".encode("latin-1")
    return HttpResponse(
        status_code=200,
        reason="OK",
        headers=(("Server", "origin"), ("Content-Type", "text/html")),
        body=body,
    )


def _resolve(pkt: Packet, host: HostSpec) -> Tuple[Packet, ...]:
    try:
        query = decode_dns(pkt.payload)
    except MalformedDnsError:
        logger.debug(f"{host.id} 收到无法解析的 DNS 报文，忽略")
        return ()
    if query.is_response:
        return ()

    address = host.records.get(query.qname.lower().rstrip("."))
    answers = ((query.qname, address, host.answer_ttl),) if address else ()
    response = DnsMessage(id=query.id, is_response=True, qname=query.qname, answers=answers)
    return (pkt.reply(payload=encode_dns(response)),)


def _serve_tcp_data(pkt: Packet) -> bytes:
    try:
        request = parse_http_request(pkt.payload)
        return render_http_response(origin_page(request.host or "", request.path))
    except MalformedHttpError:
        pass
    try:
        hello = parse_client_hello(pkt.payload)
        return build_server_hello((hello.sni or "").encode("ascii"))
    except (NotClientHelloError, MalformedTlsError):
        pass
    return pkt.payload


def respond(pkt: Packet, host: HostSpec) -> Tuple[Packet, ...]:
    """
    主机对一个已送达报文的响应

    Returns:
        发回发送方的报文序列（可能为空）
    """
    if pkt.proto is Transport.UDP:
        if host.role is HostRole.RESOLVER and pkt.dst_port == 53:
            return _resolve(pkt, host)
        return (pkt.reply(payload=pkt.payload),) if pkt.payload else ()

    if pkt.has_flag(TcpFlag.RST):
        return ()
    if pkt.is_syn:
        return (pkt.reply(tcp_flags=SYN_ACK),)
    if pkt.has_flag(TcpFlag.FIN):
        return (pkt.reply(tcp_flags=FIN_ACK),)
    if pkt.payload:
        return (pkt.reply(payload=_serve_tcp_data(pkt), tcp_flags=PSH_ACK),)
    return ()
