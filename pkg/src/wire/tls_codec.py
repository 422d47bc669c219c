#!/usr/bin/env python3
"""
TLS Codec - ClientHello 解析与合成

只处理 TLS 记录层中的握手消息:
- 解析 ClientHello，提取 server_name 扩展中的 host_name
- 合成带 / 不带 SNI 的 ClientHello（探测使用）
- 合成最小 ServerHello（模拟源站使用）

分段发送的 ClientHello 不做重组，长度不一致即视为 MALFORMED_TLS。
"""

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Optional

from src.utils.errors import MalformedTlsError, NotClientHelloError

CONTENT_TYPE_HANDSHAKE = 0x16
CONTENT_TYPE_APPLICATION_DATA = 0x17
HANDSHAKE_CLIENT_HELLO = 0x01
HANDSHAKE_SERVER_HELLO = 0x02
EXTENSION_SERVER_NAME = 0x0000
EXTENSION_SUPPORTED_VERSIONS = 0x002B
SNI_HOST_NAME = 0x00

TLS_1_0 = 0x0301
TLS_1_2 = 0x0303

DEFAULT_CIPHER_SUITES = (0x1301, 0x1302, 0x1303, 0xC02B, 0xC02F)


@dataclass(frozen=True)
class ClientHello:
    """ClientHello（建模字段: 记录层版本与 SNI）"""
    record_version: int = TLS_1_0
    sni: Optional[str] = None
    raw: bytes = field(default=b"", compare=False, repr=False)


class _Reader:
    """带边界检查的顺序读取器"""

    def __init__(self, data: bytes, offset: int = 0, end: Optional[int] = None):
        self.data = data
        self.offset = offset
        self.end = len(data) if end is None else end

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > self.end:
            raise MalformedTlsError(f"{what} 越界 (offset={self.offset}, size={size}, end={self.end})")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack("!H", self.take(2, what))[0]

    def u24(self, what: str) -> int:
        high, low = struct.unpack("!BH", self.take(3, what))
        return (high << 16) | low

    def remaining(self) -> int:
        return self.end - self.offset


def _parse_server_name(body: bytes) -> Optional[str]:
    reader = _Reader(body)
    list_length = reader.u16("server_name_list 长度")
    if list_length != reader.remaining():
        raise MalformedTlsError("server_name_list 长度不一致")
    while reader.remaining():
        name_type = reader.u8("name_type")
        name = reader.take(reader.u16("host_name 长度"), "host_name")
        if name_type == SNI_HOST_NAME:
            try:
                return name.decode("ascii")
            except UnicodeDecodeError:
                raise MalformedTlsError("host_name 不是 ASCII")
    return None


def parse_client_hello(data: bytes) -> ClientHello:
    """
    解析 ClientHello

    Raises:
        NotClientHelloError: 记录类型不是握手，或握手类型不是 ClientHello
        MalformedTlsError: 长度字段前后不一致
    """
    if len(data) < 1:
        raise MalformedTlsError("数据为空")
    if data[0] != CONTENT_TYPE_HANDSHAKE:
        raise NotClientHelloError(f"记录类型 0x{data[0]:02x} 不是握手记录")

    record = _Reader(data)
    record.u8("content_type")
    record_version = record.u16("record_version")
    record_length = record.u16("record 长度")
    if record_length > record.remaining():
        raise MalformedTlsError(f"记录长度 {record_length} 超过可用字节 {record.remaining()}")

    hs = _Reader(data, record.offset, record.offset + record_length)
    handshake_type = hs.u8("handshake_type")
    if handshake_type != HANDSHAKE_CLIENT_HELLO:
        raise NotClientHelloError(f"握手类型 {handshake_type} 不是 ClientHello")
    handshake_length = hs.u24("handshake 长度")
    if handshake_length != hs.remaining():
        raise MalformedTlsError(f"握手长度 {handshake_length} 与记录剩余 {hs.remaining()} 不一致")

    hs.take(2, "client_version")
    hs.take(32, "random")
    hs.take(hs.u8("session_id 长度"), "session_id")
    suites_length = hs.u16("cipher_suites 长度")
    if suites_length % 2:
        raise MalformedTlsError("cipher_suites 长度必须为偶数")
    hs.take(suites_length, "cipher_suites")
    hs.take(hs.u8("compression 长度"), "compression_methods")

    sni = None
    if hs.remaining():
        extensions_length = hs.u16("extensions 长度")
        if extensions_length != hs.remaining():
            raise MalformedTlsError("extensions 长度不一致")
        while hs.remaining():
            ext_type = hs.u16("extension_type")
            ext_body = hs.take(hs.u16("extension 长度"), "extension_data")
            if ext_type == EXTENSION_SERVER_NAME and sni is None:
                sni = _parse_server_name(ext_body)

    return ClientHello(record_version=record_version, sni=sni, raw=bytes(data))


def _extension(ext_type: int, body: bytes) -> bytes:
    return struct.pack("!HH", ext_type, len(body)) + body


def build_client_hello(sni: Optional[str], record_version: int = TLS_1_0,
                       random_bytes: Optional[bytes] = None) -> bytes:
    """
    合成 ClientHello

    Args:
        sni: 写入 server_name 扩展的域名，None 表示不带 SNI
        record_version: 记录层版本
        random_bytes: 32 字节随机数；缺省时由 SNI 派生，保证可复现
    """
    if random_bytes is None:
        random_bytes = hashlib.sha256(f"client-random:{sni}".encode()).digest()
    if len(random_bytes) != 32:
        raise MalformedTlsError("random 必须是 32 字节")

    extensions = b""
    if sni is not None:
        name = sni.encode("ascii")
        entry = struct.pack("!BH", SNI_HOST_NAME, len(name)) + name
        extensions += _extension(EXTENSION_SERVER_NAME, struct.pack("!H", len(entry)) + entry)
    extensions += _extension(EXTENSION_SUPPORTED_VERSIONS, bytes([4]) + struct.pack("!HH", 0x0304, TLS_1_2))

    suites = b"".join(struct.pack("!H", s) for s in DEFAULT_CIPHER_SUITES)
    body = (
        struct.pack("!H", TLS_1_2)
        + random_bytes
        + b"\x00"
        + struct.pack("!H", len(suites)) + suites
        + b"\x01\x00"
        + struct.pack("!H", len(extensions)) + extensions
    )
    handshake = struct.pack("!B", HANDSHAKE_CLIENT_HELLO) + struct.pack("!I", len(body))[1:] + body
    return struct.pack("!BHH", CONTENT_TYPE_HANDSHAKE, record_version, len(handshake)) + handshake


def serialize_client_hello(hello: ClientHello) -> bytes:
    """按建模字段重新合成 ClientHello"""
    return build_client_hello(hello.sni, record_version=hello.record_version)


def build_server_hello(seed: bytes = b"") -> bytes:
    """合成最小 ServerHello 记录（不含证书，仅用于表明服务端握手字节已到达）"""
    random_bytes = hashlib.sha256(b"server-random:" + seed).digest()
    body = struct.pack("!H", TLS_1_2) + random_bytes + b"\x00" + struct.pack("!H", 0x1301) + b"\x00"
    handshake = struct.pack("!B", HANDSHAKE_SERVER_HELLO) + struct.pack("!I", len(body))[1:] + body
    return struct.pack("!BHH", CONTENT_TYPE_HANDSHAKE, TLS_1_2, len(handshake)) + handshake


def is_server_hello(payload: bytes) -> bool:
    """负载是否为服务端握手记录"""
    return (
        len(payload) >= 6
        and payload[0] == CONTENT_TYPE_HANDSHAKE
        and payload[5] == HANDSHAKE_SERVER_HELLO
    )


def is_client_hello(payload: bytes) -> bool:
    try:
        parse_client_hello(payload)
    except (NotClientHelloError, MalformedTlsError):
        return False
    return True
