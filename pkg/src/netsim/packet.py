#!/usr/bin/env python3
"""
Packet - 模拟数据报 / 报文段
"""

import dataclasses
import hashlib
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional

from src.wire.classifier import TcpFlag, Transport

DEFAULT_TTL = 64
MAX_TTL = 255

# 标志位的固定输出顺序
FLAG_ORDER = (TcpFlag.SYN, TcpFlag.FIN, TcpFlag.RST, TcpFlag.PSH, TcpFlag.ACK)


@dataclass(frozen=True)
class Packet:
    """
    模拟数据报

    tcp_flags 当且仅当 proto 为 TCP 时存在（TCP 缺省为空集合）。
    ttl 允许为 0 仅用于转发过程中的中间状态，发送时必须 >= 1。
    """
    src: str
    dst: str
    proto: Transport
    src_port: int
    dst_port: int
    ttl: int = DEFAULT_TTL
    tcp_flags: Optional[FrozenSet[TcpFlag]] = None
    payload: bytes = b""

    def __post_init__(self):
        if not 0 <= self.ttl <= MAX_TTL:
            raise ValueError(f"ttl 超出范围: {self.ttl}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 0xFFFF:
                raise ValueError(f"端口超出范围: {port}")
        if self.proto is Transport.TCP:
            object.__setattr__(self, "tcp_flags", frozenset(self.tcp_flags or ()))
        elif self.tcp_flags is not None:
            raise ValueError("UDP 报文不能携带 TCP 标志位")
        object.__setattr__(self, "payload", bytes(self.payload))

    def has_flag(self, flag: TcpFlag) -> bool:
        return bool(self.tcp_flags) and flag in self.tcp_flags

    @property
    def is_syn(self) -> bool:
        return self.has_flag(TcpFlag.SYN) and not self.has_flag(TcpFlag.ACK)

    @property
    def flag_text(self) -> str:
        if self.tcp_flags is None:
            return ""
        return "".join(flag.value for flag in FLAG_ORDER if flag in self.tcp_flags)

    def with_ttl(self, ttl: int) -> "Packet":
        return dataclasses.replace(self, ttl=ttl)

    def reply(self, payload: bytes = b"", tcp_flags: Optional[Iterable[TcpFlag]] = None,
              ttl: int = DEFAULT_TTL) -> "Packet":
        """构造反方向的报文（源 / 目的及端口互换）"""
        return Packet(
            src=self.dst,
            dst=self.src,
            proto=self.proto,
            src_port=self.dst_port,
            dst_port=self.src_port,
            ttl=ttl,
            tcp_flags=frozenset(tcp_flags) if self.proto is Transport.TCP else None,
            payload=payload,
        )

    def to_dict(self) -> Dict:
        return {
            "src": self.src,
            "dst": self.dst,
            "proto": self.proto.value,
            "src_port": self.src_port,
            "dst_port": self.dst_port,
            "ttl": self.ttl,
            "flags": self.flag_text,
            "payload": self.payload.hex(),
        }

    def digest(self) -> str:
        """报文内容摘要"""
        text = "|".join(str(v) for v in self.to_dict().values())
        return hashlib.sha256(text.encode()).hexdigest()
