"""
线格式编解码: DNS / HTTP/1.1 / TLS ClientHello，以及传输负载协议分类
"""

from .classifier import ProtocolClass, TcpFlag, Transport, classify_protocol, port_class
from .dns_codec import DnsMessage, decode_dns, encode_dns, encode_dns_query, is_dns_query, validate_name
from .http_codec import (
    CANONICAL_METHODS,
    HttpRequest,
    HttpResponse,
    parse_http_request,
    parse_http_response,
    render_http_response,
    serialize_http_request,
)
from .tls_codec import (
    ClientHello,
    build_client_hello,
    build_server_hello,
    is_server_hello,
    parse_client_hello,
    serialize_client_hello,
)

__all__ = [
    "ProtocolClass", "TcpFlag", "Transport", "classify_protocol", "port_class",
    "DnsMessage", "decode_dns", "encode_dns", "encode_dns_query", "is_dns_query", "validate_name",
    "CANONICAL_METHODS", "HttpRequest", "HttpResponse", "parse_http_request",
    "parse_http_response", "render_http_response", "serialize_http_request",
    "ClientHello", "build_client_hello", "build_server_hello", "is_server_hello",
    "parse_client_hello", "serialize_client_hello",
]
