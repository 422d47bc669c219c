#!/usr/bin/env python3
"""
World - 拓扑 + 审查策略的不可变组合

构造后只读，可在并发探测之间共享；每条流的可变状态由 Flow 自己持有。
"""

from dataclasses import dataclass, replace
from typing import Optional

from src.censor.policy import CensorPolicy
from src.utils.errors import UnknownHostError
from src.wire.classifier import Transport

from .flow import EPHEMERAL_PORT, Flow
from .packet import DEFAULT_TTL
from .topology import HostRole, Topology


@dataclass(frozen=True)
class World:
    topology: Topology
    policy: Optional[CensorPolicy]
    default_ttl: int = DEFAULT_TTL

    def flow(self, src: str, dst: str, proto: Transport, dst_port: int,
             src_port: int = EPHEMERAL_PORT) -> Flow:
        return Flow(self.topology, self.policy, src, dst, proto, dst_port,
                    src_port=src_port, ttl=self.default_ttl)

    @property
    def resolver(self) -> str:
        resolver = self.topology.resolver
        if resolver is None:
            raise UnknownHostError("拓扑中没有解析器")
        return resolver

    @property
    def baseline_host(self) -> Optional[str]:
        return self.topology.baseline_host

    @property
    def external_server(self) -> str:
        """协议矩阵的默认对端: 第一个境外服务器，没有时退回第一个源站"""
        for role in (HostRole.EXTERNAL, HostRole.ORIGIN):
            hosts = self.topology.hosts_with_role(role)
            if hosts:
                return hosts[0]
        raise UnknownHostError("拓扑中没有境外服务器或源站")

    def true_address(self, domain: str) -> Optional[str]:
        """解析器 zone 中记录的真实地址"""
        records = self.topology.host(self.resolver).records
        return records.get(domain.lower().rstrip("."))

    def origin_for(self, domain: str) -> str:
        """承载该域名的源站主机"""
        address = self.true_address(domain)
        host = self.topology.host_by_address(address) if address else None
        if host is None:
            raise UnknownHostError(f"域名 {domain} 没有对应的源站")
        return host

    def without_censor(self) -> "World":
        """同一拓扑上的无审查世界"""
        return replace(self, policy=CensorPolicy.pass_all())
