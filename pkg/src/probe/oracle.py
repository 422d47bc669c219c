#!/usr/bin/env python3
"""
Oracle - 直接由审查策略推出的预期结论

不经过网络，只把探测器会发出的报文依次交给 apply_policy()，
再把审查动作映射为结论。用来核对探测结果: 探测器不会“发现”审查器没做过的事。
"""

from typing import Optional

from src.censor.engine import CensorActionKind, FlowState, apply_policy
from src.netsim.world import World
from src.wire.classifier import TcpFlag

from .probes import ProbeFactory
from .verdict import Layer, Mutation, VerdictKind

_ACTION_VERDICTS = {
    CensorActionKind.PASS: VerdictKind.OK,
    CensorActionKind.INJECT_DNS: VerdictKind.DNS_POISONED,
    CensorActionKind.INJECT_BLOCKPAGE: VerdictKind.HTTP_BLOCKPAGE,
    CensorActionKind.DROP: VerdictKind.SILENT_DROP,
}


def predict_verdict(layer, domain: str, vantage: str, world: World,
                    mutation: Optional[Mutation] = None, send_sni: bool = True,
                    path: str = "/") -> VerdictKind:
    """
    预测 (层, 域名) 的探测结论

    Args:
        layer: 探测层
        domain: 域名
        vantage: 观测点
        world: 模拟世界
        mutation: HTTP 请求变形
        send_sni: TLS 是否携带 SNI
        path: HTTP 请求路径
    """
    layer = Layer.parse(layer)
    kwargs = {"send_sni": send_sni} if layer is Layer.TLS else {}
    probe = ProbeFactory.create(layer, world, vantage, **kwargs)
    if world.policy is None:
        return VerdictKind.OK

    flow = probe.open_flow(domain)
    state = FlowState()

    if probe.layer is not Layer.DNS:
        syn = flow.packet(tcp_flags={TcpFlag.SYN})
        action = apply_policy(syn, state, world.policy)
        state.record(syn, action)
        if not action.is_pass:
            return VerdictKind.SILENT_DROP if action.kind is CensorActionKind.DROP else VerdictKind.TCP_RST

    trigger = flow.packet(probe.trigger_payload(domain, mutation, path))
    action = apply_policy(trigger, state, world.policy)
    if action.kind is CensorActionKind.INJECT_RST:
        return VerdictKind.TLS_RST_AFTER_CLIENTHELLO if probe.layer is Layer.TLS else VerdictKind.TCP_RST
    return _ACTION_VERDICTS[action.kind]
