#!/usr/bin/env python3
"""
Topology - 多 ISP 路径拓扑

每个观测点（vantage）有一条有序的路由器列表，所有路径都汇聚到同一个
瓶颈路由器（chokepoint），审查中间盒挂接在该路由器上。

主机角色:
- VANTAGE   观测点（国内 ISP 接入的测量客户端）
- RESOLVER  递归解析器（位于瓶颈之外）
- ORIGIN    源站
- EXTERNAL  境外对照服务器
- BASELINE  基线观测点（走不经过瓶颈的独立路径）
- DOMESTIC  国内主机（位于瓶颈之前，流量不经过审查）
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from src.utils.errors import MalformedSpecError, UnknownHostError

logger = logging.getLogger(__name__)

DEFAULT_ANSWER_TTL = 300


class HostRole(Enum):
    VANTAGE = "vantage"
    RESOLVER = "resolver"
    ORIGIN = "origin"
    EXTERNAL = "external"
    BASELINE = "baseline"
    DOMESTIC = "domestic"


@dataclass(frozen=True)
class HostSpec:
    """主机描述；records 仅对解析器有意义（域名 -> IPv4）"""
    id: str
    role: HostRole
    address: str = ""
    records: Mapping[str, str] = field(default_factory=dict)
    answer_ttl: int = DEFAULT_ANSWER_TTL


@dataclass(frozen=True)
class TopologySpec:
    """拓扑描述（未校验）"""
    paths: Mapping[str, Sequence[str]]
    chokepoint: str
    hosts: Sequence[HostSpec] = field(default_factory=tuple)
    baseline_path: Optional[Sequence[str]] = None


@dataclass(frozen=True)
class Topology:
    """已校验的拓扑，构造后不可变"""
    hosts: Mapping[str, HostSpec]
    paths: Mapping[str, Tuple[str, ...]]
    chokepoint: str
    chokepoint_index: Mapping[str, int]
    baseline_host: Optional[str] = None
    baseline_path: Tuple[str, ...] = ()

    @property
    def vantages(self) -> List[str]:
        return list(self.paths)

    @property
    def resolver(self) -> Optional[str]:
        for host in self.hosts.values():
            if host.role is HostRole.RESOLVER:
                return host.id
        return None

    def host(self, host_id: str) -> HostSpec:
        if host_id not in self.hosts:
            raise UnknownHostError(f"未知主机: {host_id}")
        return self.hosts[host_id]

    def hosts_with_role(self, role: HostRole) -> List[str]:
        return [h.id for h in self.hosts.values() if h.role is role]

    def host_by_address(self, address: str) -> Optional[str]:
        for host in self.hosts.values():
            if host.address == address and host.role is not HostRole.VANTAGE:
                return host.id
        return None

    def hop_router(self, vantage: str, hop_index: int) -> Optional[str]:
        """观测点路径上第 hop_index 跳（1 起始）的路由器"""
        path = self.paths.get(vantage)
        if path is None:
            raise UnknownHostError(f"未知观测点: {vantage}")
        if 1 <= hop_index <= len(path):
            return path[hop_index - 1]
        return None

    def path_to(self, src: str, dst: str) -> Tuple[str, ...]:
        """
        计算 src -> dst 经过的路由器序列

        Raises:
            UnknownHostError: src 不是观测点 / 基线主机，或 dst 不是可达主机
        """
        if dst not in self.hosts:
            raise UnknownHostError(f"未知目的主机: {dst}")
        target = self.hosts[dst]
        if target.role in (HostRole.VANTAGE, HostRole.BASELINE):
            raise UnknownHostError(f"目的主机 {dst} 不接受入站流量")

        if src == self.baseline_host and src is not None:
            if target.role is HostRole.DOMESTIC:
                raise UnknownHostError(f"基线主机无法到达国内主机 {dst}")
            return self.baseline_path

        if src not in self.paths:
            raise UnknownHostError(f"未知源主机: {src}")

        path = self.paths[src]
        if target.role is HostRole.DOMESTIC:
            # 国内主机位于瓶颈之前
            return path[:self.chokepoint_index[src] - 1]
        return path


def _check_path(name: str, path: Sequence[str]) -> Tuple[str, ...]:
    path = tuple(path)
    if not path:
        raise MalformedSpecError(f"路径 {name} 为空")
    if len(set(path)) != len(path):
        duplicates = sorted({r for r in path if path.count(r) > 1})
        raise MalformedSpecError(f"路径 {name} 重复经过路由器: {duplicates}")
    return path


def build_topology(spec: TopologySpec) -> Topology:
    """
    校验拓扑描述并构造 Topology

    Raises:
        MalformedSpecError: 路径缺少瓶颈路由器、路由器重复、主机定义冲突等
    """
    if not spec.paths:
        raise MalformedSpecError("至少需要一条观测点路径")
    if not spec.chokepoint:
        raise MalformedSpecError("未指定瓶颈路由器")

    paths: Dict[str, Tuple[str, ...]] = {}
    indices: Dict[str, int] = {}
    routers = set()
    for vantage, raw_path in spec.paths.items():
        path = _check_path(vantage, raw_path)
        if spec.chokepoint not in path:
            raise MalformedSpecError(f"路径 {vantage} 未经过瓶颈路由器 {spec.chokepoint}")
        paths[vantage] = path
        indices[vantage] = path.index(spec.chokepoint) + 1
        routers.update(path)

    hosts: Dict[str, HostSpec] = {}
    for host in spec.hosts:
        if host.id in hosts:
            raise MalformedSpecError(f"主机重复定义: {host.id}")
        if host.id in routers:
            raise MalformedSpecError(f"主机与路由器同名: {host.id}")
        if host.role is HostRole.VANTAGE and host.id not in paths:
            raise MalformedSpecError(f"观测点 {host.id} 没有路径")
        if host.id in paths and host.role is not HostRole.VANTAGE:
            raise MalformedSpecError(f"{host.id} 有观测路径但角色为 {host.role.value}")
        hosts[host.id] = HostSpec(
            id=host.id,
            role=host.role,
            address=host.address,
            records={name.lower().rstrip("."): addr for name, addr in host.records.items()},
            answer_ttl=host.answer_ttl,
        )

    for vantage in paths:
        if vantage in routers:
            raise MalformedSpecError(f"观测点与路由器同名: {vantage}")
        hosts.setdefault(vantage, HostSpec(id=vantage, role=HostRole.VANTAGE))

    if len([h for h in hosts.values() if h.role is HostRole.RESOLVER]) > 1:
        raise MalformedSpecError("最多只能有一个解析器")

    baseline_hosts = [h.id for h in hosts.values() if h.role is HostRole.BASELINE]
    if len(baseline_hosts) > 1:
        raise MalformedSpecError("最多只能有一个基线主机")

    baseline_path: Tuple[str, ...] = ()
    baseline_host = baseline_hosts[0] if baseline_hosts else None
    if spec.baseline_path is not None:
        if baseline_host is None:
            raise MalformedSpecError("给出了基线路径但没有基线主机")
        baseline_path = _check_path("baseline", spec.baseline_path)
        if spec.chokepoint in baseline_path:
            raise MalformedSpecError("基线路径不能经过瓶颈路由器")
    elif baseline_host is not None:
        raise MalformedSpecError(f"基线主机 {baseline_host} 缺少基线路径")

    topology = Topology(
        hosts=hosts,
        paths=paths,
        chokepoint=spec.chokepoint,
        chokepoint_index=indices,
        baseline_host=baseline_host,
        baseline_path=baseline_path,
    )
    logger.debug(f"拓扑构建完成: {len(paths)} 条路径，瓶颈 {spec.chokepoint}，跳数 {indices}")
    return topology
