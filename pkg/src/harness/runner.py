#!/usr/bin/env python3
"""
Runner - 按探测计划执行一个场景

工作流程（顺序固定，写入报告的顺序与并发完成顺序无关）:
1. 在未审查路径上测量全部域名的基线
2. 结论行: DNS -> HTTP（含请求变形）-> TLS；每层内按域名排序，再按观测点
3. 协议矩阵（境外目标），然后是国内矩阵
4. TTL 追踪与跨观测点共识
5. 与策略预测比对，计算聚合值
"""

import logging
import random
from typing import List, Optional

from src.netsim.packet import DEFAULT_TTL
from src.netsim.world import World
from src.probe.baseline import Baseline, measure_baseline
from src.probe.oracle import predict_verdict
from src.probe.probes import MatrixTarget, ProbeFactory, protocol_matrix
from src.probe.trace import DEFAULT_MAX_TTL, TraceResult, consensus_chokepoint, ttl_trace
from src.probe.verdict import Layer, Mutation, VerdictKind
from src.utils.errors import ChokepointError, EmptyInputError, ProbeRuntimeError

from .executor import ProbeExecutor, ProbeTask
from .report import MatrixRow, Report, VerdictRow
from .scenario import DomainCategory, Scenario, TraceSpec
from .stats import aggregate

logger = logging.getLogger(__name__)

LAYER_ORDER = (Layer.DNS, Layer.HTTP, Layer.TLS)


class ScenarioRunner:
    """
    场景执行器

    Args:
        scenario: 已校验的场景
        seed: 覆盖场景中的种子
        workers: 探测并发度
        max_ttl: 场景未指定时 TTL 追踪的上限
        default_ttl: 应用流量的初始 ttl
    """

    def __init__(self, scenario: Scenario, seed: Optional[int] = None, workers: int = 1,
                 max_ttl: int = DEFAULT_MAX_TTL, default_ttl: int = DEFAULT_TTL):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.max_ttl = scenario.plan.max_ttl or max_ttl
        self.world: World = scenario.world(default_ttl=default_ttl)
        self.executor = ProbeExecutor(workers)
        self.domains = scenario.domain_names()
        self.baseline: Optional[Baseline] = None

    # ==================== 结论行 ====================

    def _verdict_row(self, layer: Layer, domain: str, vantage: str,
                     mutation: Optional[Mutation]) -> VerdictRow:
        path = self.scenario.plan.http_path
        probe = ProbeFactory.create(layer, self.world, vantage)
        verdict = probe.run(domain, self.baseline.get(domain), mutation, path)
        predicted = predict_verdict(layer, domain, vantage, self.world, mutation, path=path)
        if verdict.value is not predicted:
            logger.warning(f"[{vantage}] {layer.value} {domain} 结论 {verdict.value.value} "
                           f"与策略预测 {predicted.value} 不一致")
        return VerdictRow(
            layer=layer.value,
            domain=domain,
            vantage=vantage,
            mutation=mutation.value if mutation else None,
            verdict=verdict.value.value,
            predicted=predicted.value,
            evidence_digest=verdict.evidence.digest(),
            metadata=verdict.evidence.metadata(),
            inbound_packets=verdict.evidence.inbound_count,
            evidence=verdict.evidence,
        )

    def verdict_tasks(self) -> List[ProbeTask]:
        plan = self.scenario.plan
        tasks = []
        for layer in LAYER_ORDER:
            if layer not in plan.layers:
                continue
            mutations: List[Optional[Mutation]] = [None]
            if layer is Layer.HTTP:
                mutations += list(plan.mutations)
            for domain in self.domains:
                for vantage in plan.vantages:
                    for mutation in mutations:
                        key = f"{layer.value} {domain} @ {vantage}" + (f" [{mutation.value}]" if mutation else "")
                        tasks.append(ProbeTask(
                            key=key,
                            run=lambda l=layer, d=domain, v=vantage, m=mutation: self._verdict_row(l, d, v, m),
                        ))
        return tasks

    # ==================== 协议矩阵 ====================

    def _matrix_rows(self, vantage: str, targets: List[MatrixTarget], stream: str) -> List[MatrixRow]:
        rng = random.Random(f"{self.seed}:{stream}:{vantage}")
        rows = []
        for target, verdict in protocol_matrix(vantage, self.world, targets, rng=rng):
            rows.append(MatrixRow(
                vantage=vantage,
                label=target.label,
                proto=target.proto.value,
                port=target.port,
                template=target.template,
                host=target.host or self.world.external_server,
                verdict=verdict.value.value,
                evidence_digest=verdict.evidence.digest(),
                inbound_packets=verdict.evidence.inbound_count,
                evidence=verdict.evidence,
            ))
        return rows

    def matrix_tasks(self, targets: List[MatrixTarget], stream: str) -> List[ProbeTask]:
        if not targets:
            return []
        return [
            ProbeTask(key=f"{stream} @ {vantage}", run=lambda v=vantage: self._matrix_rows(v, targets, stream))
            for vantage in self.scenario.plan.vantages
        ]

    # ==================== TTL 追踪 ====================

    def trace_specs(self) -> List[TraceSpec]:
        """场景未列出追踪目标时，每层取第一个（按名字排序）会被审查的黑名单域名"""
        plan = self.scenario.plan
        if plan.traces is not None:
            return list(plan.traces)
        if not plan.vantages:
            return []

        specs = []
        first_vantage = plan.vantages[0]
        for layer in LAYER_ORDER:
            if layer not in plan.layers:
                continue
            for domain in self.domains:
                if self.scenario.category(domain) is not DomainCategory.BLACKLISTED:
                    continue
                if predict_verdict(layer, domain, first_vantage, self.world) is not VerdictKind.OK:
                    specs.append(TraceSpec(layer, domain))
                    break
        return specs

    def trace_tasks(self, specs: List[TraceSpec]) -> List[ProbeTask]:
        return [
            ProbeTask(
                key=f"trace {spec.layer.value} {spec.domain} @ {vantage}",
                run=lambda s=spec, v=vantage: ttl_trace(s.layer, s.domain, v, self.world, self.max_ttl),
            )
            for spec in specs
            for vantage in self.scenario.plan.vantages
        ]

    # ==================== 汇总 ====================

    def run(self) -> Report:
        scenario = self.scenario
        logger.info(f"开始运行场景 {scenario.name}（种子 {self.seed}，{len(self.domains)} 个域名，"
                    f"{len(scenario.plan.vantages)} 个观测点）")

        try:
            self.baseline = measure_baseline(self.domains, self.world, http_path=scenario.plan.http_path)
        except ChokepointError as e:
            raise ProbeRuntimeError(e.message, context="baseline", cause=e) from e

        verdicts = self.executor.run_all(self.verdict_tasks())
        logger.info(f"结论行完成: {len(verdicts)} 条")

        matrix = [row for rows in self.executor.run_all(
            self.matrix_tasks(scenario.matrix_targets(self.seed), "matrix")) for row in rows]
        domestic = [row for rows in self.executor.run_all(
            self.matrix_tasks(scenario.domestic_matrix_targets(self.seed), "domestic")) for row in rows]
        logger.info(f"协议矩阵完成: 境外 {len(matrix)} 条，国内 {len(domestic)} 条")

        traces: List[TraceResult] = self.executor.run_all(self.trace_tasks(self.trace_specs()))
        try:
            consensus = consensus_chokepoint(traces)
        except EmptyInputError:
            consensus = None
        logger.info(f"TTL 追踪完成: {len(traces)} 条，共识 {consensus or '-'}")

        report = Report(
            scenario={"name": scenario.name, "digest": scenario.digest},
            seed=self.seed,
            domains=[
                {"name": d, "category": scenario.category(d).value, "layers": scenario.matched_layers(d)}
                for d in self.domains
            ],
            verdicts=verdicts,
            matrix=matrix,
            domestic_matrix=domestic,
            traces=traces,
            consensus=consensus,
        )
        report.stats = aggregate(report)
        if report.stats.oracle_disagreements:
            logger.warning(f"{report.stats.oracle_disagreements} 条结论与策略预测不一致")
        return report


def run_scenario(scenario: Scenario, seed: Optional[int] = None, workers: int = 1,
                 max_ttl: int = DEFAULT_MAX_TTL, default_ttl: int = DEFAULT_TTL) -> Report:
    """
    运行场景并返回完整报告

    Raises:
        ProbeRuntimeError: 任一探测失败（附带探测计划上下文）
        EmptyReportError: 计划中没有 DNS 探测
    """
    return ScenarioRunner(scenario, seed=seed, workers=workers, max_ttl=max_ttl, default_ttl=default_ttl).run()
