#!/usr/bin/env python3
"""
Baseline - 未审查路径上的参照结果

基线从基线主机出发（其路径不经过瓶颈）；拓扑中没有基线主机时，
改用同一拓扑上的无审查世界测量。
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

from src.netsim.flow import Direction
from src.netsim.world import World
from src.utils.errors import MalformedDnsError, MalformedHttpError, ScenarioValidationError
from src.wire.dns_codec import decode_dns
from src.wire.http_codec import parse_http_response
from src.wire.tls_codec import is_server_hello

from .verdict import DEFAULT_SETTINGS, Layer, ProbeSettings, body_digest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HttpFingerprint:
    """HTTP 指纹: (状态码, 正文 sha256)"""
    status_code: int
    body_sha256: str

    def as_tuple(self) -> Tuple[int, str]:
        return (self.status_code, self.body_sha256)


@dataclass(frozen=True)
class BaselineEntry:
    domain: str
    addresses: Tuple[str, ...] = ()
    http: Optional[HttpFingerprint] = None
    tls_ok: bool = False

    def to_dict(self) -> Dict:
        return {
            "domain": self.domain,
            "addresses": list(self.addresses),
            "http": None if self.http is None else {
                "status_code": self.http.status_code,
                "body_sha256": self.http.body_sha256,
            },
            "tls_ok": self.tls_ok,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "BaselineEntry":
        http = data.get("http")
        return cls(
            domain=data["domain"],
            addresses=tuple(data.get("addresses", ())),
            http=HttpFingerprint(http["status_code"], http["body_sha256"]) if http else None,
            tls_ok=bool(data.get("tls_ok", False)),
        )


class Baseline:
    """域名 -> 基线条目；条目中不允许出现投毒地址"""

    def __init__(self, settings: ProbeSettings = DEFAULT_SETTINGS):
        self.settings = settings
        self.entries: Dict[str, BaselineEntry] = {}

    def add(self, entry: BaselineEntry) -> None:
        poisoned = [a for a in entry.addresses if self.settings.is_poison(a)]
        if poisoned:
            raise ScenarioValidationError(
                f"{entry.domain} 的基线含投毒地址 {poisoned}，基线路径可能经过了审查",
                invariant="baseline-no-poison-address",
            )
        self.entries[entry.domain.lower()] = entry

    def get(self, domain: str) -> Optional[BaselineEntry]:
        return self.entries.get(domain.lower())

    def __contains__(self, domain: str) -> bool:
        return domain.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> Dict:
        return {d: self.entries[d].to_dict() for d in sorted(self.entries)}


def _baseline_source(world: World) -> Tuple[World, str]:
    if world.baseline_host is not None:
        return world, world.baseline_host
    vantages = world.topology.vantages
    return world.without_censor(), vantages[0]


def measure_entry(domain: str, world: World, settings: ProbeSettings = DEFAULT_SETTINGS,
                  http_path: str = "/") -> BaselineEntry:
    """在未审查路径上测量单个域名的 DNS / HTTP / TLS 参照"""
    from .probes import ProbeFactory

    source_world, source = _baseline_source(world)

    dns = ProbeFactory.create(Layer.DNS, source_world, source, settings=settings).observe(domain)
    addresses: Tuple[str, ...] = ()
    for capture in dns.packets:
        if capture.direction is not Direction.IN:
            continue
        try:
            addresses = tuple(decode_dns(capture.packet.payload).addresses)
        except MalformedDnsError:
            continue
        break

    http = None
    tls_ok = False
    if world.true_address(domain) is not None:
        probe = ProbeFactory.create(Layer.HTTP, source_world, source, settings=settings)
        observed = probe.observe(domain, path=http_path)
        for capture in observed.packets:
            if capture.direction is Direction.IN and capture.packet.payload:
                try:
                    response = parse_http_response(capture.packet.payload)
                except MalformedHttpError:
                    continue
                http = HttpFingerprint(response.status_code, body_digest(response.body))
                break

        observed = ProbeFactory.create(Layer.TLS, source_world, source, settings=settings).observe(domain)
        tls_ok = any(
            c.direction is Direction.IN and is_server_hello(c.packet.payload)
            for c in observed.packets
        )

    return BaselineEntry(domain=domain.lower(), addresses=addresses, http=http, tls_ok=tls_ok)


def measure_baseline(domains: Iterable[str], world: World,
                     settings: ProbeSettings = DEFAULT_SETTINGS, http_path: str = "/") -> Baseline:
    """
    测量一组域名的基线

    Raises:
        ScenarioValidationError: 基线结果含投毒地址
    """
    baseline = Baseline(settings)
    for domain in domains:
        baseline.add(measure_entry(domain, world, settings, http_path))
    logger.debug(f"基线测量完成: {len(baseline)} 个域名")
    return baseline
