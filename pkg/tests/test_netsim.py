"""模拟网络: 拓扑、逐跳转发、主机服务与流"""

import pytest

from conftest import small_topology_spec
from src.censor.policy import CensorPolicy
from src.netsim.flow import ConnectionResult, Direction, Flow, tcp_handshake
from src.netsim.network import DeliveryKind, forward
from src.netsim.packet import Packet
from src.netsim.services import origin_page, respond
from src.netsim.topology import HostRole, HostSpec, TopologySpec, build_topology
from src.utils.errors import MalformedSpecError, UnknownHostError
from src.wire.classifier import TcpFlag, Transport
from src.wire.dns_codec import decode_dns, encode_dns_query
from src.wire.http_codec import parse_http_response

QUERY = encode_dns_query(42, "blocked.test")


def dns_packet(src="v1", qname="blocked.test", ttl=64):
    return Packet(src, "resolver", Transport.UDP, 49152, 53, ttl=ttl, payload=encode_dns_query(42, qname))


class TestPacket:
    def test_udp_cannot_carry_flags(self):
        with pytest.raises(ValueError):
            Packet("a", "b", Transport.UDP, 1, 2, tcp_flags=frozenset({TcpFlag.SYN}))

    def test_ttl_range(self):
        with pytest.raises(ValueError):
            Packet("a", "b", Transport.UDP, 1, 2, ttl=256)

    def test_reply_swaps_endpoints(self):
        pkt = Packet("a", "b", Transport.TCP, 1000, 80, tcp_flags=frozenset({TcpFlag.SYN}))
        reply = pkt.reply(tcp_flags={TcpFlag.SYN, TcpFlag.ACK})
        assert (reply.src, reply.dst, reply.src_port, reply.dst_port) == ("b", "a", 80, 1000)
        assert reply.flag_text == "SA"
        assert pkt.is_syn and not reply.is_syn


class TestTopology:
    """拓扑校验"""

    def test_chokepoint_index(self, small_topology):
        assert small_topology.chokepoint_index == {"v1": 2, "v2": 3}
        assert small_topology.hop_router("v2", 3) == "GW"
        assert small_topology.hop_router("v2", 9) is None
        assert small_topology.resolver == "resolver"

    def test_path_without_chokepoint(self):
        spec = small_topology_spec(paths={"v1": ["r1", "x1"]})
        with pytest.raises(MalformedSpecError):
            build_topology(spec)

    def test_repeated_router(self):
        spec = small_topology_spec(paths={"v1": ["r1", "GW", "r1"]})
        with pytest.raises(MalformedSpecError):
            build_topology(spec)

    def test_baseline_path_must_avoid_chokepoint(self):
        spec = small_topology_spec()
        spec = TopologySpec(paths=spec.paths, chokepoint="GW", hosts=spec.hosts, baseline_path=["GW"])
        with pytest.raises(MalformedSpecError):
            build_topology(spec)

    def test_two_resolvers_rejected(self):
        spec = small_topology_spec()
        hosts = list(spec.hosts) + [HostSpec("resolver2", HostRole.RESOLVER, "198.51.100.54")]
        with pytest.raises(MalformedSpecError):
            build_topology(TopologySpec(paths=spec.paths, chokepoint="GW", hosts=hosts, baseline_path=["b1"]))

    def test_domestic_host_before_chokepoint(self, small_topology):
        assert small_topology.path_to("v2", "home") == ("s1", "s2")
        assert small_topology.path_to("v2", "origin") == ("s1", "s2", "GW", "x1")
        assert small_topology.path_to("base", "origin") == ("b1",)

    def test_unknown_hosts(self, small_topology):
        with pytest.raises(UnknownHostError):
            small_topology.path_to("nowhere", "origin")
        with pytest.raises(UnknownHostError):
            small_topology.path_to("v1", "nowhere")
        with pytest.raises(UnknownHostError):
            small_topology.path_to("v1", "v2")


class TestForward:
    """逐跳转发"""

    def test_time_exceeded_before_chokepoint(self, small_topology, small_policy):
        outcome = forward(dns_packet("v2", ttl=2), small_topology, small_policy)
        assert outcome.kind is DeliveryKind.TIME_EXCEEDED
        assert (outcome.router, outcome.hop_index) == ("s2", 2)

    def test_injection_at_chokepoint(self, small_topology, small_policy):
        outcome = forward(dns_packet("v2", ttl=3), small_topology, small_policy)
        assert outcome.kind is DeliveryKind.INJECTED_RESPONSE
        assert (outcome.router, outcome.hop_index) == ("GW", 3)
        forged = decode_dns(outcome.injected.payload)
        assert forged.id == 42
        assert forged.answers == (("blocked.test", "10.10.34.34", 10),)
        assert outcome.injected.src == "resolver"

    def test_delivered_answer(self, small_topology, small_policy):
        outcome = forward(dns_packet(qname="open.test"), small_topology, small_policy)
        assert outcome.kind is DeliveryKind.DELIVERED
        answer = decode_dns(outcome.response_packets[0].payload)
        assert answer.answers == (("open.test", "203.0.113.10", 300),)

    def test_unknown_name_gets_empty_answer(self, small_topology, small_policy):
        outcome = forward(dns_packet(qname="nothing.test"), small_topology, small_policy)
        assert decode_dns(outcome.response_packets[0].payload).answers == ()

    def test_silent_drop_has_no_response(self, small_topology, small_policy):
        pkt = Packet("v1", "ext", Transport.UDP, 49152, 1194, payload=b"\x38" + b"\x00" * 13)
        outcome = forward(pkt, small_topology, small_policy)
        assert outcome.kind is DeliveryKind.SILENTLY_DROPPED
        assert outcome.response_packets == ()
        assert outcome.interfered

    def test_domestic_traffic_bypasses_censor(self, small_topology, small_policy):
        pkt = Packet("v1", "home", Transport.UDP, 49152, 1194, payload=b"hello")
        outcome = forward(pkt, small_topology, small_policy)
        assert outcome.kind is DeliveryKind.DELIVERED
        assert outcome.response_packets[0].payload == b"hello"

    def test_baseline_path_is_uncensored(self, small_topology, small_policy):
        pkt = Packet("base", "resolver", Transport.UDP, 49152, 53, payload=QUERY)
        outcome = forward(pkt, small_topology, small_policy)
        assert decode_dns(outcome.response_packets[0].payload).addresses == ["203.0.113.10"]

    def test_zero_ttl_rejected(self, small_topology, small_policy):
        with pytest.raises(ValueError):
            forward(dns_packet(ttl=1).with_ttl(0), small_topology, small_policy)

    def test_pass_all_matches_no_censor(self, small_topology):
        """pass-all 策略与没有中间盒时的转发结果一致"""
        for ttl in range(1, 6):
            pkt = dns_packet("v2", ttl=ttl)
            assert forward(pkt, small_topology, CensorPolicy.pass_all()) == forward(pkt, small_topology, None)

    def test_deterministic(self, small_topology, small_policy):
        assert forward(dns_packet(), small_topology, small_policy) == forward(dns_packet(), small_topology, small_policy)


class TestServices:
    def test_origin_page_ignores_host_case(self):
        assert origin_page("BbC.CoM", "/") == origin_page("bbc.com", "/")

    def test_http_request_served(self, small_topology):
        pkt = Packet("v1", "origin", Transport.TCP, 49152, 80, tcp_flags=frozenset({TcpFlag.PSH, TcpFlag.ACK}),
                     payload=b"GET /x HTTP/1.1\r\nHost: open.test\r\n\r\n")
        (reply,) = respond(pkt, small_topology.host("origin"))
        response = parse_http_response(reply.payload)
        assert response.status_code == 200
        assert b"open.test/x" in response.body

    def test_rst_is_not_answered(self, small_topology):
        pkt = Packet("v1", "origin", Transport.TCP, 49152, 80, tcp_flags=frozenset({TcpFlag.RST}))
        assert respond(pkt, small_topology.host("origin")) == ()


class TestFlow:
    def test_handshake_established(self, small_topology, small_policy):
        assert tcp_handshake("v1", "origin", 443, small_topology, small_policy) is ConnectionResult.ESTABLISHED

    def test_handshake_silently_dropped(self, small_topology, small_policy):
        flow = Flow(small_topology, small_policy, "v1", "ext", Transport.TCP, 22)
        assert flow.connect() is ConnectionResult.SILENT_TIMEOUT
        assert flow.first_packet_dropped
        assert flow.inbound == []

    def test_udp_flow_cannot_connect(self, small_topology, small_policy):
        with pytest.raises(ValueError):
            Flow(small_topology, small_policy, "v1", "resolver", Transport.UDP, 53).connect()

    def test_capture_order(self, small_topology, small_policy):
        flow = Flow(small_topology, small_policy, "v1", "resolver", Transport.UDP, 53)
        flow.send(QUERY)
        assert [c.direction for c in flow.capture] == [Direction.OUT, Direction.IN]
        assert flow.capture[0].to_dict()["direction"] == "out"
