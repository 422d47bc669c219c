#!/usr/bin/env python3
"""
Scenario - 场景文件加载与校验

工作流程:
1. 读取 JSON（找不到文件时按名字查找随包附带的场景）
2. pydantic 校验结构，类型 / 字段错误 -> ScenarioParseError（带字段路径）
3. 构造拓扑与审查策略，再检查场景级不变量 -> ScenarioValidationError（带不变量名）
"""

import hashlib
import json
import logging
import os
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.censor.policy import (
    DEFAULT_POISON_POOL, DEFAULT_POISON_TTL, PRIMARY_POISON_ADDRESS, BlockAction, CensorPolicy,
    DomainPattern, HttpRule, MatchOn,
)
from src.netsim.packet import DEFAULT_TTL
from src.netsim.topology import DEFAULT_ANSWER_TTL, HostRole, HostSpec, Topology, TopologySpec, build_topology
from src.netsim.world import World
from src.probe.probes import PAYLOAD_TEMPLATES, MatrixTarget
from src.probe.verdict import Layer, Mutation
from src.utils.errors import MalformedDnsError, MalformedSpecError, ScenarioParseError, ScenarioValidationError
from src.wire.classifier import ProtocolClass, Transport
from src.wire.dns_codec import validate_name

logger = logging.getLogger(__name__)

BUNDLED_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios")
RANDOM_PORT_RANGE = (20000, 60999)


class DomainCategory(Enum):
    BLACKLISTED = "blacklisted"
    WHITELISTED = "whitelisted"
    NEUTRAL = "neutral"


# ==================== 文件结构 (pydantic) ====================

class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HostModel(_Model):
    id: str = Field(min_length=1)
    role: Literal["resolver", "origin", "external", "baseline", "domestic", "vantage"]
    address: str = ""
    records: Dict[str, str] = Field(default_factory=dict)
    answer_ttl: Optional[int] = Field(default=None, ge=0)


class BaselineModel(_Model):
    host: str
    path: List[str]


class TopologyModel(_Model):
    chokepoint: str = Field(min_length=1)
    paths: Dict[str, List[str]]
    hosts: List[HostModel] = Field(default_factory=list)
    baseline: Optional[BaselineModel] = None


class DnsPatternModel(_Model):
    pattern: str
    exact: bool = False
    poison_address: Optional[str] = None


class HttpRuleModel(_Model):
    pattern: str = Field(min_length=1)
    match_on: Literal["host", "path", "both"] = "host"
    case_sensitive: bool = True
    action: Literal["blockpage", "rst"] = "blockpage"


class PolicyModel(_Model):
    whitelist_mode: bool = True
    allowed_classes: List[Literal["dns_udp", "http", "tls"]] = Field(
        default_factory=lambda: ["dns_udp", "http", "tls"])
    poison_pool: str = DEFAULT_POISON_POOL
    poison_address: str = PRIMARY_POISON_ADDRESS
    poison_ttl_seconds: int = DEFAULT_POISON_TTL
    dns_blacklist: List[Union[str, DnsPatternModel]] = Field(default_factory=list)
    dns_whitelist: List[str] = Field(default_factory=list)
    http_rules: List[HttpRuleModel] = Field(default_factory=list)
    sni_blacklist: List[str] = Field(default_factory=list)


def _dns_name(value: str) -> str:
    try:
        validate_name(value)
    except MalformedDnsError as e:
        raise ValueError(e.message) from e
    return value


class DomainModel(_Model):
    name: str = Field(min_length=1)
    category: Literal["blacklisted", "whitelisted", "neutral"]

    valid_name = field_validator("name")(_dns_name)


class TargetModel(_Model):
    proto: Literal["tcp", "udp"]
    port: Union[int, Literal["random"]]
    template: str
    host: Optional[str] = None

    @field_validator("template")
    @classmethod
    def _known_template(cls, value: str) -> str:
        if value not in PAYLOAD_TEMPLATES:
            raise ValueError(f"未知负载模板 {value}，可用: {sorted(PAYLOAD_TEMPLATES)}")
        return value

    @field_validator("port")
    @classmethod
    def _port_range(cls, value):
        if isinstance(value, int) and not 0 <= value <= 0xFFFF:
            raise ValueError(f"端口超出范围: {value}")
        return value


class TraceModel(_Model):
    layer: Literal["dns", "http", "tls"]
    domain: str

    valid_domain = field_validator("domain")(_dns_name)


class PlanModel(_Model):
    layers: List[Literal["dns", "http", "tls"]] = Field(default_factory=lambda: ["dns", "http", "tls"])
    vantages: Optional[List[str]] = None
    mutations: List[Literal["method_case", "header_case"]] = Field(default_factory=list)
    http_path: str = "/"
    traces: Optional[List[TraceModel]] = None
    max_ttl: Optional[int] = Field(default=None, ge=1, le=255)


class ScenarioModel(_Model):
    name: str = Field(min_length=1)
    seed: int = 0
    topology: TopologyModel
    policy: PolicyModel
    domains: List[DomainModel] = Field(min_length=1)
    matrix: List[TargetModel] = Field(default_factory=list)
    domestic_targets: List[TargetModel] = Field(default_factory=list)
    plan: PlanModel = Field(default_factory=PlanModel)


# ==================== 领域对象 ====================

@dataclass(frozen=True)
class DomainCase:
    name: str
    category: DomainCategory


@dataclass(frozen=True)
class TargetSpec:
    """矩阵目标；port 可以是 "random"，运行时由种子决定"""
    proto: Transport
    port: Union[int, str]
    template: str
    host: Optional[str] = None

    def resolve(self, seed: int, index: int) -> MatrixTarget:
        port = self.port
        if port == "random":
            port = random.Random(f"{seed}:port:{index}").randint(*RANDOM_PORT_RANGE)
        return MatrixTarget(proto=self.proto, port=int(port), template=self.template, host=self.host)


@dataclass(frozen=True)
class TraceSpec:
    layer: Layer
    domain: str


@dataclass(frozen=True)
class ProbePlan:
    layers: Tuple[Layer, ...]
    vantages: Tuple[str, ...]
    mutations: Tuple[Mutation, ...] = ()
    http_path: str = "/"
    traces: Optional[Tuple[TraceSpec, ...]] = None
    max_ttl: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    """已校验的场景"""
    name: str
    seed: int
    topology: Topology
    policy: CensorPolicy
    domains: Tuple[DomainCase, ...]
    matrix: Tuple[TargetSpec, ...]
    domestic_targets: Tuple[TargetSpec, ...]
    plan: ProbePlan
    digest: str = ""
    source: Optional[str] = field(default=None, compare=False)

    def world(self, default_ttl: int = DEFAULT_TTL) -> World:
        return World(self.topology, self.policy, default_ttl=default_ttl)

    def domain_names(self) -> List[str]:
        return sorted(d.name for d in self.domains)

    def category(self, domain: str) -> Optional[DomainCategory]:
        for case in self.domains:
            if case.name == domain:
                return case.category
        return None

    def matched_layers(self, domain: str) -> List[str]:
        return policy_layers(self.policy, domain, self.plan.http_path)

    def matrix_targets(self, seed: Optional[int] = None) -> List[MatrixTarget]:
        seed = self.seed if seed is None else seed
        return [t.resolve(seed, i) for i, t in enumerate(self.matrix)]

    def domestic_matrix_targets(self, seed: Optional[int] = None) -> List[MatrixTarget]:
        seed = self.seed if seed is None else seed
        offset = len(self.matrix)
        return [t.resolve(seed, offset + i) for i, t in enumerate(self.domestic_targets)]


def policy_layers(policy: CensorPolicy, domain: str, http_path: str = "/") -> List[str]:
    """命中该域名的审查层 (dns / http / sni)；HTTP 规则按探测计划的请求路径匹配"""
    layers = []
    if any(p.matches(domain) for p in policy.dns_blacklist):
        layers.append("dns")
    if any(rule.matches(domain, http_path) for rule in policy.http_rules):
        layers.append("http")
    if any(p.matches(domain) for p in policy.sni_blacklist):
        layers.append("sni")
    return layers


# ==================== 构造 ====================

_CLASSES = {"dns_udp": ProtocolClass.DNS_UDP, "http": ProtocolClass.HTTP, "tls": ProtocolClass.TLS}


def _build_policy(model: PolicyModel) -> CensorPolicy:
    blacklist = [
        DomainPattern(item) if isinstance(item, str)
        else DomainPattern(item.pattern, exact=item.exact, poison_address=item.poison_address)
        for item in model.dns_blacklist
    ]
    rules = [
        HttpRule(
            pattern=rule.pattern,
            match_on=MatchOn(rule.match_on),
            case_sensitive=rule.case_sensitive,
            action=BlockAction(rule.action.upper()),
        )
        for rule in model.http_rules
    ]
    return CensorPolicy(
        dns_blacklist=tuple(blacklist),
        dns_whitelist=tuple(model.dns_whitelist),
        poison_pool=model.poison_pool,
        poison_address=model.poison_address,
        poison_ttl_seconds=model.poison_ttl_seconds,
        http_rules=tuple(rules),
        sni_blacklist=tuple(model.sni_blacklist),
        whitelist_mode=model.whitelist_mode,
        allowed_classes=frozenset(_CLASSES[c] for c in model.allowed_classes),
    )


def _build_topology(model: TopologyModel, answer_ttl: int) -> Topology:
    hosts = [
        HostSpec(
            id=h.id,
            role=HostRole(h.role),
            address=h.address,
            records=h.records,
            answer_ttl=answer_ttl if h.answer_ttl is None else h.answer_ttl,
        )
        for h in model.hosts
    ]
    spec = TopologySpec(
        paths=model.paths,
        chokepoint=model.chokepoint,
        hosts=hosts,
        baseline_path=model.baseline.path if model.baseline else None,
    )
    try:
        topology = build_topology(spec)
    except MalformedSpecError as e:
        raise ScenarioValidationError(e.message, invariant="topology-valid") from e

    if model.baseline and topology.baseline_host != model.baseline.host:
        raise ScenarioValidationError(
            f"baseline.host={model.baseline.host} 不是拓扑中的基线主机",
            invariant="topology-valid",
        )
    return topology


def _target(model: TargetModel) -> TargetSpec:
    return TargetSpec(proto=Transport(model.proto), port=model.port, template=model.template, host=model.host)


def _validate(scenario: Scenario) -> None:
    """场景级不变量"""
    topo = scenario.topology
    policy = scenario.policy

    names = [d.name for d in scenario.domains]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ScenarioValidationError(f"域名重复: {duplicates}", invariant="domains-unique")

    for case in scenario.domains:
        layers = policy_layers(policy, case.name, scenario.plan.http_path)
        if case.category is DomainCategory.BLACKLISTED and len(layers) != 1:
            raise ScenarioValidationError(
                f"{case.name} 命中 {len(layers)} 个审查层 {layers}，应恰好一个",
                invariant="blacklisted-exactly-one-layer",
            )
        if case.category is DomainCategory.WHITELISTED and not policy.is_exempt(case.name):
            raise ScenarioValidationError(f"{case.name} 不在 dns_whitelist 中",
                                          invariant="whitelisted-domain-exempt")
        if case.category is DomainCategory.NEUTRAL and layers:
            raise ScenarioValidationError(f"{case.name} 被 {layers} 命中却标为 neutral",
                                          invariant="neutral-domain-unmatched")

    if Layer.DNS not in scenario.plan.layers or not scenario.plan.vantages:
        raise ScenarioValidationError("探测计划必须在至少一个观测点上包含 dns 层", invariant="plan-has-dns")

    if topo.resolver is None:
        raise ScenarioValidationError("拓扑中没有解析器", invariant="resolver-present")

    records = topo.host(topo.resolver).records
    for case in scenario.domains:
        address = records.get(case.name)
        if address is None or topo.host_by_address(address) is None:
            raise ScenarioValidationError(f"{case.name} 没有解析记录或对应的源站", invariant="domain-has-origin")

    unknown = [v for v in scenario.plan.vantages if v not in topo.paths]
    if unknown:
        raise ScenarioValidationError(f"探测计划中的观测点不存在: {unknown}", invariant="plan-vantages-known")

    for target in scenario.matrix:
        if target.host is not None and target.host not in topo.hosts:
            raise ScenarioValidationError(f"矩阵目标主机不存在: {target.host}", invariant="matrix-hosts-known")
    for target in scenario.domestic_targets:
        if target.host is None or target.host not in topo.hosts \
                or topo.hosts[target.host].role is not HostRole.DOMESTIC:
            raise ScenarioValidationError(f"国内目标必须指向 domestic 主机: {target.host}",
                                          invariant="domestic-targets-domestic")

    for trace in scenario.plan.traces or ():
        if trace.domain not in names:
            raise ScenarioValidationError(f"追踪目标不在域名列表中: {trace.domain}",
                                          invariant="trace-domains-listed")


def scenario_from_dict(data: Dict, answer_ttl: int = DEFAULT_ANSWER_TTL, source: Optional[str] = None) -> Scenario:
    """
    从已解析的 JSON 构造场景

    Raises:
        ScenarioParseError: 结构 / 类型错误
        ScenarioValidationError: 不变量被破坏
    """
    try:
        model = ScenarioModel.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        raise ScenarioParseError(first["msg"], field=path) from e

    topology = _build_topology(model.topology, answer_ttl)
    policy = _build_policy(model.policy)

    plan_model = model.plan
    plan = ProbePlan(
        layers=tuple(Layer(l) for l in dict.fromkeys(plan_model.layers)),
        vantages=tuple(plan_model.vantages if plan_model.vantages is not None else topology.vantages),
        mutations=tuple(Mutation(m) for m in dict.fromkeys(plan_model.mutations)),
        http_path=plan_model.http_path,
        traces=None if plan_model.traces is None else tuple(
            TraceSpec(Layer(t.layer), t.domain.lower()) for t in plan_model.traces),
        max_ttl=plan_model.max_ttl,
    )

    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    scenario = Scenario(
        name=model.name,
        seed=model.seed,
        topology=topology,
        policy=policy,
        domains=tuple(DomainCase(d.name.lower().rstrip("."), DomainCategory(d.category)) for d in model.domains),
        matrix=tuple(_target(t) for t in model.matrix),
        domestic_targets=tuple(_target(t) for t in model.domestic_targets),
        plan=plan,
        digest=hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        source=source,
    )
    _validate(scenario)
    return scenario


def resolve_scenario_path(path: str) -> str:
    """磁盘上不存在时，按名字查找随包附带的场景（可省略 .json）"""
    if os.path.isfile(path):
        return path
    name = os.path.basename(path)
    for candidate in (name, f"{name}.json"):
        bundled = os.path.join(BUNDLED_DIR, candidate)
        if os.path.isfile(bundled):
            return bundled
    raise ScenarioParseError(f"场景文件不存在: {path}")


def bundled_scenarios() -> List[str]:
    if not os.path.isdir(BUNDLED_DIR):
        return []
    return sorted(f for f in os.listdir(BUNDLED_DIR) if f.endswith(".json"))


def load_scenario(path: str, answer_ttl: int = DEFAULT_ANSWER_TTL) -> Scenario:
    """
    加载并校验场景文件

    Raises:
        ScenarioParseError: 文件不存在、JSON 语法错误（带行号）或结构错误（带字段路径）
        ScenarioValidationError: 场景不变量被破坏（带不变量名）
    """
    resolved = resolve_scenario_path(path)
    try:
        with open(resolved, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(e.msg, line=e.lineno) from e
    except OSError as e:
        raise ScenarioParseError(f"无法读取场景文件 {resolved}: {e}") from e

    if not isinstance(data, dict):
        raise ScenarioParseError("场景文件顶层必须是对象", line=1)

    scenario = scenario_from_dict(data, answer_ttl=answer_ttl, source=resolved)
    logger.info(f"场景已加载: {scenario.name} ({len(scenario.domains)} 个域名, 种子 {scenario.seed})")
    return scenario
