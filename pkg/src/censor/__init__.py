"""
审查中间盒: 策略定义、逐层匹配与组合决策、拦截页
"""

from .blockpage import BLOCKPAGE_MARKER, render_blockpage
from .engine import (
    CensorAction,
    CensorActionKind,
    CensorLayer,
    FlowState,
    PoisonDecision,
    WhitelistDecision,
    apply_policy,
    match_dns,
    match_http,
    match_sni,
    whitelist_check,
)
from .policy import BlockAction, CensorPolicy, DomainPattern, HttpRule, MatchOn

__all__ = [
    "BLOCKPAGE_MARKER", "render_blockpage",
    "CensorAction", "CensorActionKind", "CensorLayer", "FlowState", "PoisonDecision",
    "WhitelistDecision", "apply_policy", "match_dns", "match_http", "match_sni", "whitelist_check",
    "BlockAction", "CensorPolicy", "DomainPattern", "HttpRule", "MatchOn",
]
