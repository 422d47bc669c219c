#!/usr/bin/env python3
"""
Censor Policy - 审查网关规则集

四层规则:
1. 协议白名单（whitelist_mode + allowed_classes）
2. DNS 黑名单（投毒到 poison_pool 内的地址）
3. HTTP 规则（Host / 路径关键字，命中后注入拦截页或 RST）
4. SNI 黑名单（命中后在 ClientHello 之后注入 RST）

dns_whitelist 中的域名在所有层豁免。
"""

import ipaddress
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Tuple

from src.utils.errors import PolicyError
from src.wire.classifier import ProtocolClass

PRIMARY_POISON_ADDRESS = "10.10.34.34"
DEFAULT_POISON_POOL = "10.10.34.0/24"
DEFAULT_POISON_TTL = 10
DEFAULT_ALLOWED_CLASSES = frozenset({ProtocolClass.DNS_UDP, ProtocolClass.HTTP, ProtocolClass.TLS})


def normalize_domain(name: str) -> str:
    return name.strip().rstrip(".").lower()


class BlockAction(Enum):
    """HTTP / SNI 层的拦截动作"""
    BLOCKPAGE = "BLOCKPAGE"
    RST = "RST"


class MatchOn(Enum):
    HOST = "host"
    PATH = "path"
    BOTH = "both"


@dataclass(frozen=True)
class DomainPattern:
    """
    域名匹配模式

    默认按后缀匹配（"telegram.org" 命中 "web.telegram.org"），exact=True 时只做全等匹配。
    比较不区分大小写。poison_address 可覆盖默认投毒地址（必须位于投毒地址池内）。
    """
    pattern: str
    exact: bool = False
    poison_address: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "pattern", normalize_domain(self.pattern))
        if not self.pattern:
            raise PolicyError("域名模式不能为空", invariant="pattern-nonempty")

    def matches(self, domain: str) -> bool:
        domain = normalize_domain(domain)
        if domain == self.pattern:
            return True
        return not self.exact and domain.endswith("." + self.pattern)


@dataclass(frozen=True)
class HttpRule:
    """HTTP 过滤规则: 对 Host 和 / 或路径做子串匹配"""
    pattern: str
    match_on: MatchOn = MatchOn.HOST
    case_sensitive: bool = True
    action: BlockAction = BlockAction.BLOCKPAGE

    def matches(self, host: str, path: str) -> bool:
        if self.match_on is MatchOn.HOST:
            targets = (host,)
        elif self.match_on is MatchOn.PATH:
            targets = (path,)
        else:
            targets = (host, path)

        if self.case_sensitive:
            return any(self.pattern in target for target in targets)
        pattern = self.pattern.lower()
        return any(pattern in target.lower() for target in targets)


def _patterns(items: Iterable) -> Tuple[DomainPattern, ...]:
    result = []
    seen = set()
    for item in items:
        pattern = item if isinstance(item, DomainPattern) else DomainPattern(item)
        if pattern.pattern not in seen:
            seen.add(pattern.pattern)
            result.append(pattern)
    return tuple(result)


@dataclass(frozen=True)
class CensorPolicy:
    """
    审查策略（加载后不可变）

    黑名单使用有序元组，保证多条模式同时命中时结果确定。
    """
    dns_blacklist: Tuple[DomainPattern, ...] = ()
    dns_whitelist: Tuple[str, ...] = ()
    poison_pool: str = DEFAULT_POISON_POOL
    poison_address: str = PRIMARY_POISON_ADDRESS
    poison_ttl_seconds: int = DEFAULT_POISON_TTL
    http_rules: Tuple[HttpRule, ...] = ()
    sni_blacklist: Tuple[DomainPattern, ...] = ()
    whitelist_mode: bool = True
    allowed_classes: frozenset = field(default_factory=lambda: DEFAULT_ALLOWED_CLASSES)

    def __post_init__(self):
        object.__setattr__(self, "dns_blacklist", _patterns(self.dns_blacklist))
        object.__setattr__(self, "sni_blacklist", _patterns(self.sni_blacklist))
        object.__setattr__(self, "dns_whitelist", tuple(dict.fromkeys(normalize_domain(d) for d in self.dns_whitelist)))
        object.__setattr__(self, "http_rules", tuple(self.http_rules))
        object.__setattr__(self, "allowed_classes", frozenset(self.allowed_classes))
        self._validate()

    def _validate(self) -> None:
        try:
            pool = ipaddress.IPv4Network(self.poison_pool)
            primary = ipaddress.IPv4Address(self.poison_address)
        except ValueError as e:
            raise PolicyError(str(e), invariant="poison-pool-format")

        if primary not in pool:
            raise PolicyError(f"主投毒地址 {primary} 不在地址池 {pool} 内", invariant="poison-pool-contains-primary")

        for pattern in self.dns_blacklist:
            if pattern.poison_address is None:
                continue
            try:
                override = ipaddress.IPv4Address(pattern.poison_address)
            except ValueError as e:
                raise PolicyError(str(e), invariant="poison-pool-format")
            if override not in pool:
                raise PolicyError(f"{pattern.pattern} 的投毒地址 {override} 不在地址池内",
                                  invariant="poison-pool-contains-override")

        overlap = set(self.dns_whitelist) & {p.pattern for p in self.dns_blacklist}
        if overlap:
            raise PolicyError(f"域名同时出现在黑白名单: {sorted(overlap)}",
                              invariant="dns-whitelist-blacklist-disjoint")

        if not 0 <= self.poison_ttl_seconds <= 0xFFFFFFFF:
            raise PolicyError(f"poison_ttl_seconds 超出范围: {self.poison_ttl_seconds}",
                              invariant="poison-ttl-range")

        for cls in self.allowed_classes:
            if not isinstance(cls, ProtocolClass):
                raise PolicyError(f"未知协议类别: {cls}", invariant="allowed-classes")

    def is_exempt(self, domain: Optional[str]) -> bool:
        """域名是否在豁免名单中（全等匹配）"""
        return bool(domain) and normalize_domain(domain) in self.dns_whitelist

    def in_poison_pool(self, address: str) -> bool:
        try:
            return ipaddress.IPv4Address(address) in ipaddress.IPv4Network(self.poison_pool)
        except ValueError:
            return False

    @classmethod
    def pass_all(cls) -> "CensorPolicy":
        """不做任何审查的策略"""
        return cls(whitelist_mode=False)
