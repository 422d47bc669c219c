"""审查策略与中间盒决策"""

import pytest

from conftest import small_policy_value
from src.censor.blockpage import BLOCKPAGE_MARKER, render_blockpage
from src.censor.engine import (
    CensorActionKind, CensorLayer, FlowState, WhitelistDecision, apply_policy, match_dns,
    match_http, match_sni, payload_domain, whitelist_check,
)
from src.censor.policy import BlockAction, CensorPolicy, DomainPattern, HttpRule, MatchOn
from src.netsim.packet import Packet
from src.utils.errors import PolicyError
from src.wire.classifier import ProtocolClass, TcpFlag, Transport
from src.wire.dns_codec import encode_dns_query
from src.wire.http_codec import parse_http_request, render_http_response
from src.wire.tls_codec import build_client_hello, parse_client_hello


def udp(port, payload):
    return Packet("v1", "resolver", Transport.UDP, 49152, port, payload=payload)


def tcp(port, payload=b"", tcp_flags=(TcpFlag.PSH, TcpFlag.ACK)):
    return Packet("v1", "origin", Transport.TCP, 49152, port, tcp_flags=frozenset(tcp_flags), payload=payload)


def http_get(host, method="GET", path="/"):
    return f"{method} {path} HTTP/1.1\r\nHost: {host}\r\n\r\n".encode()


class TestPolicy:
    """策略构造时的不变量"""

    def test_defaults(self):
        policy = CensorPolicy()
        assert policy.whitelist_mode is True
        assert policy.poison_address == "10.10.34.34"
        assert policy.in_poison_pool("10.10.34.7")
        assert not policy.in_poison_pool("10.10.35.1")
        assert not policy.in_poison_pool("not-an-ip")

    def test_whitelist_blacklist_overlap(self):
        with pytest.raises(PolicyError) as excinfo:
            CensorPolicy(dns_blacklist=("google.com",), dns_whitelist=("Google.com.",))
        assert excinfo.value.invariant == "dns-whitelist-blacklist-disjoint"

    def test_primary_outside_pool(self):
        with pytest.raises(PolicyError):
            CensorPolicy(poison_address="192.0.2.1")

    def test_override_outside_pool(self):
        with pytest.raises(PolicyError):
            CensorPolicy(dns_blacklist=(DomainPattern("a.test", poison_address="192.0.2.1"),))

    def test_duplicate_patterns_collapsed(self):
        policy = CensorPolicy(dns_blacklist=("a.test", "A.test", "b.test"))
        assert [p.pattern for p in policy.dns_blacklist] == ["a.test", "b.test"]

    def test_suffix_and_exact_match(self):
        assert DomainPattern("telegram.org").matches("web.telegram.org")
        assert not DomainPattern("telegram.org").matches("nottelegram.org")
        assert not DomainPattern("telegram.org", exact=True).matches("web.telegram.org")

    def test_http_rule_targets(self):
        assert HttpRule("bbc", match_on=MatchOn.PATH).matches("x.test", "/bbc/news")
        assert not HttpRule("bbc", match_on=MatchOn.PATH).matches("bbc.com", "/")
        assert HttpRule("BBC", case_sensitive=False).matches("bbc.com", "/")
        assert not HttpRule("BBC").matches("bbc.com", "/")


class TestMatchers:
    """单层匹配"""

    def test_match_dns(self, small_policy):
        decision = match_dns("www.blocked.test", small_policy)
        assert decision.address == "10.10.34.34"
        assert decision.ttl_seconds == 10
        assert match_dns("open.test", small_policy) is None

    def test_match_dns_override_address(self):
        policy = CensorPolicy(dns_blacklist=(DomainPattern("a.test", poison_address="10.10.34.7"),))
        assert match_dns("a.test", policy).address == "10.10.34.7"

    def test_match_http_canonical_method_only(self, small_policy):
        assert match_http(parse_http_request(http_get("page.test")), small_policy) is BlockAction.BLOCKPAGE
        assert match_http(parse_http_request(http_get("reset.test")), small_policy) is BlockAction.RST
        assert match_http(parse_http_request(http_get("page.test", method="gET")), small_policy) is None

    def test_match_http_case_sensitive_host(self, small_policy):
        assert match_http(parse_http_request(http_get("PaGe.TeSt")), small_policy) is None

    def test_match_sni(self, small_policy):
        assert match_sni(parse_client_hello(build_client_hello("sni.test")), small_policy) is BlockAction.RST
        assert match_sni(parse_client_hello(build_client_hello(None)), small_policy) is None

    def test_whitelist_check(self, small_policy):
        assert whitelist_check(ProtocolClass.TLS, small_policy) is WhitelistDecision.ALLOW
        assert whitelist_check(ProtocolClass.OTHER, small_policy) is WhitelistDecision.DROP
        assert whitelist_check(ProtocolClass.OTHER, CensorPolicy.pass_all()) is WhitelistDecision.ALLOW

    def test_payload_domain(self):
        assert payload_domain(encode_dns_query(1, "a.test")) == "a.test"
        assert payload_domain(http_get("b.test")) == "b.test"
        assert payload_domain(build_client_hello("c.test")) == "c.test"
        assert payload_domain(b"\x00" * 16) is None


class TestApplyPolicy:
    """组合决策的层序"""

    def test_dns_poison(self, small_policy):
        action = apply_policy(udp(53, encode_dns_query(1, "blocked.test")), None, small_policy)
        assert action.kind is CensorActionKind.INJECT_DNS
        assert action.layer is CensorLayer.DNS
        assert action.address == "10.10.34.34"
        assert action.ttl_seconds == 10

    def test_blockpage_and_rst(self, small_policy):
        assert apply_policy(tcp(80, http_get("page.test")), None, small_policy).kind is CensorActionKind.INJECT_BLOCKPAGE
        assert apply_policy(tcp(80, http_get("reset.test")), None, small_policy).kind is CensorActionKind.INJECT_RST

    def test_sni_reset(self, small_policy):
        action = apply_policy(tcp(443, build_client_hello("sni.test")), None, small_policy)
        assert action.kind is CensorActionKind.INJECT_RST
        assert action.layer is CensorLayer.SNI

    def test_non_whitelisted_protocol_dropped(self, small_policy):
        action = apply_policy(udp(1194, b"\x38" + b"\x00" * 13), None, small_policy)
        assert action.kind is CensorActionKind.DROP
        assert action.layer is CensorLayer.WHITELIST

    def test_syn_to_unlisted_port_dropped(self, small_policy):
        assert apply_policy(tcp(22, tcp_flags={TcpFlag.SYN}), None, small_policy).kind is CensorActionKind.DROP
        assert apply_policy(tcp(443, tcp_flags={TcpFlag.SYN}), None, small_policy).is_pass

    def test_whitelist_before_dns(self, small_policy):
        """DNS 查询发往非 53 端口时由白名单层丢弃，不会被投毒"""
        action = apply_policy(udp(5353, encode_dns_query(1, "blocked.test")), None, small_policy)
        assert action.kind is CensorActionKind.DROP

    def test_exempt_domain_passes_every_layer(self):
        policy = small_policy_value(dns_whitelist=("safe.test",), sni_blacklist=("safe.test",),
                                    http_rules=(HttpRule("safe.test"),))
        assert apply_policy(udp(53, encode_dns_query(1, "safe.test")), None, policy).is_pass
        assert apply_policy(tcp(80, http_get("safe.test")), None, policy).is_pass
        assert apply_policy(tcp(443, build_client_hello("safe.test")), None, policy).is_pass

    def test_only_first_data_unit_inspected(self, small_policy):
        state = FlowState()
        first = tcp(80, http_get("open.test"))
        state.record(first, apply_policy(first, state, small_policy))
        assert state.classified and state.protocol_class is ProtocolClass.HTTP
        assert apply_policy(tcp(80, http_get("page.test")), state, small_policy).is_pass

    def test_dropped_flow_stays_dropped(self, small_policy):
        state = FlowState()
        syn = tcp(22, tcp_flags={TcpFlag.SYN})
        state.record(syn, apply_policy(syn, state, small_policy))
        assert state.dropped
        assert apply_policy(tcp(22, tcp_flags={TcpFlag.ACK}), state, small_policy).kind is CensorActionKind.DROP

    def test_pass_all_never_interferes(self):
        policy = CensorPolicy.pass_all()
        for pkt in (udp(1194, b"x"), udp(53, encode_dns_query(1, "blocked.test")),
                    tcp(80, http_get("page.test")), tcp(22, tcp_flags={TcpFlag.SYN})):
            assert apply_policy(pkt, None, policy).is_pass


class TestBlockpage:
    def test_blockpage_bytes(self):
        raw = render_http_response(render_blockpage())
        assert raw.startswith(b"HTTP/1.1 403 Forbidden\r\n")
        assert BLOCKPAGE_MARKER.encode() in raw

    def test_blockpage_is_identical_every_time(self):
        assert render_http_response(render_blockpage()) == render_http_response(render_blockpage())
