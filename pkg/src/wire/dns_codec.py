#!/usr/bin/env python3
"""
DNS Codec - DNS 报文编解码

只支持 QTYPE A / CLASS IN:
- 编码: 手工按标准线格式打包（header + question + A 记录），不使用名称压缩指针
- 解码: 交给 dnspython，可容忍压缩指针
"""

import ipaddress
import struct
from dataclasses import dataclass, field
from typing import List, Tuple

import dns.exception
import dns.flags
import dns.message
import dns.rdataclass
import dns.rdatatype

from src.utils.errors import MalformedDnsError

QTYPE_A = 1
QCLASS_IN = 1
FLAG_QR = 0x8000
FLAG_RD = 0x0100
FLAG_RA = 0x0080

MAX_LABEL_LENGTH = 63
MAX_NAME_LENGTH = 253

# (name, ipv4 地址, ttl 秒)
DnsAnswer = Tuple[str, str, int]


@dataclass(frozen=True)
class DnsMessage:
    """DNS 报文（建模字段）"""
    id: int
    is_response: bool
    qname: str
    qtype: str = "A"
    answers: Tuple[DnsAnswer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0 <= self.id <= 0xFFFF:
            raise MalformedDnsError(f"id 超出 16 位范围: {self.id}")
        if not self.is_response and self.answers:
            raise MalformedDnsError("查询报文不能携带应答记录")
        object.__setattr__(self, "answers", tuple(self.answers))

    @property
    def addresses(self) -> List[str]:
        return [address for _, address, _ in self.answers]


def _encode_name(name: str) -> bytes:
    """按标签编码域名，校验标签 / 总长度"""
    name = name.rstrip(".")
    if not name:
        raise MalformedDnsError("域名为空")
    if len(name) > MAX_NAME_LENGTH:
        raise MalformedDnsError(f"域名超过 {MAX_NAME_LENGTH} 字节: {name[:40]}...")

    encoded = b""
    for label in name.split("."):
        try:
            raw = label.encode("ascii")
        except UnicodeEncodeError:
            raise MalformedDnsError(f"域名包含非 ASCII 字符: {name}")
        if not raw:
            raise MalformedDnsError(f"域名包含空标签: {name}")
        if len(raw) > MAX_LABEL_LENGTH:
            raise MalformedDnsError(f"标签超过 {MAX_LABEL_LENGTH} 字节: {label[:20]}...")
        encoded += bytes([len(raw)]) + raw
    return encoded + b"\x00"


def validate_name(name: str) -> None:
    """域名不能编码进 DNS 报文时抛 MalformedDnsError"""
    _encode_name(name)


def encode_dns(message: DnsMessage) -> bytes:
    """编码查询或应答报文"""
    flags = FLAG_RD
    if message.is_response:
        flags |= FLAG_QR | FLAG_RA

    header = struct.pack("!HHHHHH", message.id, flags, 1, len(message.answers), 0, 0)
    question = _encode_name(message.qname) + struct.pack("!HH", QTYPE_A, QCLASS_IN)

    records = b""
    for name, address, ttl in message.answers:
        if not 0 <= ttl <= 0xFFFFFFFF:
            raise MalformedDnsError(f"ttl 超出 32 位范围: {ttl}")
        try:
            rdata = ipaddress.IPv4Address(address).packed
        except ValueError:
            raise MalformedDnsError(f"非法 IPv4 地址: {address}")
        records += _encode_name(name)
        records += struct.pack("!HHIH", QTYPE_A, QCLASS_IN, ttl, len(rdata)) + rdata

    return header + question + records


def encode_dns_query(id: int, qname: str) -> bytes:
    """编码 A 记录查询"""
    return encode_dns(DnsMessage(id=id, is_response=False, qname=qname))


def decode_dns(data: bytes) -> DnsMessage:
    """
    解码 DNS 报文

    Raises:
        MalformedDnsError: 截断、标签溢出、问题段缺失或非 A 查询
    """
    try:
        message = dns.message.from_wire(data)
    except (dns.exception.DNSException, ValueError, UnicodeError, struct.error) as e:
        raise MalformedDnsError(f"DNS 报文解析失败: {type(e).__name__}: {e}")

    if len(message.question) != 1:
        raise MalformedDnsError(f"问题段数量应为 1，实际 {len(message.question)}")

    question = message.question[0]
    if question.rdtype != dns.rdatatype.A or question.rdclass != dns.rdataclass.IN:
        raise MalformedDnsError(f"仅支持 IN/A 查询: {dns.rdatatype.to_text(question.rdtype)}")

    qname = question.name.to_text(omit_final_dot=True)
    is_response = bool(message.flags & dns.flags.QR)

    answers = []
    for rrset in message.answer:
        if rrset.rdtype != dns.rdatatype.A:
            continue
        name = rrset.name.to_text(omit_final_dot=True)
        for rdata in rrset:
            answers.append((name, rdata.address, rrset.ttl))

    if answers and not is_response:
        raise MalformedDnsError("查询报文携带了应答记录")

    return DnsMessage(
        id=message.id,
        is_response=is_response,
        qname=qname,
        answers=tuple(answers),
    )


def is_dns_query(data: bytes) -> bool:
    """负载能否解码为 DNS 查询"""
    try:
        return not decode_dns(data).is_response
    except MalformedDnsError:
        return False
