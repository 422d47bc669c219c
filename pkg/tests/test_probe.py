"""测量客户端: 分层探测、分类、基线、TTL 追踪、共识与策略预测"""

import random

import pytest

from conftest import small_topology_spec
from src.netsim.flow import CapturedPacket, ConnectionResult, Direction
from src.netsim.packet import Packet
from src.netsim.topology import TopologySpec, build_topology
from src.netsim.world import World
from src.probe import (
    Baseline, BaselineEntry, Consensus, ConsensusKind, HttpFingerprint, Layer, MatrixTarget, Mutation,
    Observation, ProbeFactory, TraceOutcome, TraceResult, VerdictKind, classify,
    consensus_chokepoint, dns_probe, http_probe, measure_baseline, predict_verdict,
    protocol_matrix, tls_probe, ttl_trace,
)
from src.probe.probes import DnsProbe, build_http_request, mixed_case, query_id_for
from src.utils.errors import EmptyInputError, MissingBaselineError, ScenarioValidationError, UnknownHostError
from src.wire.classifier import TcpFlag, Transport
from src.wire.dns_codec import DnsMessage, encode_dns, encode_dns_query
from src.wire.http_codec import HttpResponse, parse_http_request, render_http_response

ENTRY = BaselineEntry("open.test", addresses=("203.0.113.10",),
                      http=HttpFingerprint(200, "0" * 64), tls_ok=True)


def dns_observation(addresses, ttl=300):
    query = Packet("v1", "resolver", Transport.UDP, 49152, 53, payload=encode_dns_query(1, "open.test"))
    answer = DnsMessage(id=1, is_response=True, qname="open.test",
                        answers=tuple(("open.test", a, ttl) for a in addresses))
    packets = (CapturedPacket(Direction.OUT, query), CapturedPacket(Direction.IN, query.reply(encode_dns(answer))))
    return Observation(Layer.DNS, packets)


def http_observation(response: HttpResponse):
    request = Packet("v1", "origin", Transport.TCP, 49152, 80, tcp_flags=frozenset({TcpFlag.PSH, TcpFlag.ACK}),
                     payload=build_http_request("open.test"))
    reply = request.reply(render_http_response(response), tcp_flags={TcpFlag.PSH, TcpFlag.ACK})
    packets = (CapturedPacket(Direction.OUT, request), CapturedPacket(Direction.IN, reply))
    return Observation(Layer.HTTP, packets, connection=ConnectionResult.ESTABLISHED)


class TestHelpers:
    def test_mixed_case(self):
        assert mixed_case("instagram.com") == "InStAgRaM.CoM"
        assert mixed_case("host", upper_first=False) == "hOsT"

    def test_query_id_is_stable(self):
        assert query_id_for("Twitter.com") == query_id_for("twitter.com")
        assert 0 <= query_id_for("twitter.com") <= 0xFFFF

    def test_request_mutations(self):
        assert parse_http_request(build_http_request("bbc.com")).method == "GET"
        assert parse_http_request(build_http_request("bbc.com", mutation=Mutation.METHOD_CASE)).method == "gET"
        mutated = parse_http_request(build_http_request("bbc.com", mutation=Mutation.HEADER_CASE))
        assert mutated.headers[0] == ("hOsT", "BbC.CoM")


class TestClassify:
    """classify 只依据抓包与基线"""

    def test_missing_baseline(self):
        with pytest.raises(MissingBaselineError):
            classify(dns_observation(["203.0.113.10"]), None)

    def test_dns_matches_baseline(self):
        assert classify(dns_observation(["203.0.113.10"]), ENTRY).value is VerdictKind.OK

    def test_pool_address_other_than_primary(self):
        verdict = classify(dns_observation(["10.10.34.7"], ttl=10), ENTRY)
        assert verdict.value is VerdictKind.DNS_POISONED
        assert verdict.evidence.dns_answers == (("open.test", "10.10.34.7", 10),)

    def test_baseline_mismatch(self):
        assert classify(dns_observation(["192.0.2.1"]), ENTRY).value is VerdictKind.DNS_POISONED

    def test_silence(self):
        query = Packet("v1", "resolver", Transport.UDP, 49152, 53, payload=encode_dns_query(1, "open.test"))
        packets = (CapturedPacket(Direction.OUT, query),)
        assert classify(Observation(Layer.DNS, packets, dropped=True), ENTRY).value is VerdictKind.SILENT_DROP
        assert classify(Observation(Layer.DNS, packets), ENTRY).value is VerdictKind.TIMEOUT

    def test_blockpage(self):
        page = HttpResponse(403, body=b'<iframe src="http://10.10.34.34/?type=Invalid Site">')
        verdict = classify(http_observation(page), ENTRY)
        assert verdict.value is VerdictKind.HTTP_BLOCKPAGE
        assert verdict.evidence.http_status == 403

    def test_http_diff(self):
        assert classify(http_observation(HttpResponse(200, body=b"other")), ENTRY).value is VerdictKind.HTTP_DIFF

    def test_reset_at_syn(self):
        observed = Observation(Layer.TLS, (), connection=ConnectionResult.RESET_AT_SYN)
        assert classify(observed, ENTRY).value is VerdictKind.TCP_RST

    def test_classify_is_stable(self):
        observed = dns_observation(["10.10.34.34"], ttl=10)
        first, second = classify(observed, ENTRY), classify(observed, ENTRY)
        assert first == second
        assert first.evidence.digest() == second.evidence.digest()


class TestLayerProbes:
    """在小拓扑上的分层探测"""

    def test_dns_poisoned(self, small_world):
        verdict, answer = dns_probe("blocked.test", "v1", small_world)
        assert verdict.value is VerdictKind.DNS_POISONED
        assert answer.addresses == ["10.10.34.34"]
        assert answer.id == query_id_for("blocked.test")

    def test_dns_ok_and_exempt(self, small_world):
        assert dns_probe("open.test", "v1", small_world)[0].value is VerdictKind.OK
        assert dns_probe("safe.test", "v2", small_world)[0].value is VerdictKind.OK

    def test_dns_unknown_vantage(self, small_world):
        with pytest.raises(UnknownHostError):
            dns_probe("open.test", "nowhere", small_world)

    def test_http_verdicts(self, small_world):
        assert http_probe("page.test", "/", "v1", small_world).value is VerdictKind.HTTP_BLOCKPAGE
        assert http_probe("reset.test", "/", "v1", small_world).value is VerdictKind.TCP_RST
        assert http_probe("open.test", "/", "v1", small_world).value is VerdictKind.OK

    def test_http_mutations_evade_case_sensitive_rule(self, small_world):
        for mutation in Mutation:
            assert http_probe("page.test", "/", "v2", small_world, mutation=mutation).value is VerdictKind.OK

    def test_tls_reset_and_no_sni(self, small_world):
        assert tls_probe("sni.test", "v1", small_world).value is VerdictKind.TLS_RST_AFTER_CLIENTHELLO
        assert tls_probe("sni.test", "v1", small_world, send_sni=False).value is VerdictKind.OK
        assert tls_probe("open.test", "v1", small_world).value is VerdictKind.OK

    def test_shared_baseline_used(self, small_world):
        baseline = measure_baseline(["open.test"], small_world)
        with pytest.raises(MissingBaselineError):
            http_probe("page.test", "/", "v1", small_world, baseline=baseline)

    def test_factory(self, small_world):
        assert isinstance(ProbeFactory.create("DNS", small_world, "v1"), DnsProbe)
        assert ProbeFactory.list_layers() == ["dns", "http", "tls"]
        with pytest.raises(ValueError):
            ProbeFactory.create("ftp", small_world, "v1")

    def test_register_probe(self, small_world, monkeypatch):
        class LoudDnsProbe(DnsProbe):
            pass

        monkeypatch.setitem(ProbeFactory._probes, Layer.DNS, LoudDnsProbe)
        assert isinstance(ProbeFactory.create(Layer.DNS, small_world, "v1"), LoudDnsProbe)


class TestBaseline:
    def test_measured_entry(self, small_world):
        entry = measure_baseline(["Open.test"], small_world).get("open.test")
        assert entry.addresses == ("203.0.113.10",)
        assert entry.http.status_code == 200
        assert entry.tls_ok
        assert BaselineEntry.from_dict(entry.to_dict()) == entry

    def test_blacklisted_domain_measured_uncensored(self, small_world):
        assert measure_baseline(["blocked.test"], small_world).get("blocked.test").addresses == ("203.0.113.10",)

    def test_without_baseline_host(self, small_policy):
        spec = small_topology_spec()
        hosts = [h for h in spec.hosts if h.id != "base"]
        topology = build_topology(TopologySpec(paths=spec.paths, chokepoint="GW", hosts=hosts))
        baseline = measure_baseline(["blocked.test"], World(topology, small_policy))
        assert baseline.get("blocked.test").addresses == ("203.0.113.10",)

    def test_poison_address_rejected(self):
        baseline = Baseline()
        with pytest.raises(ScenarioValidationError) as excinfo:
            baseline.add(BaselineEntry("a.test", addresses=("10.10.34.34",)))
        assert excinfo.value.invariant == "baseline-no-poison-address"
        assert "a.test" not in baseline


class TestTrace:
    """TTL 追踪与共识"""

    def test_dns_trace_steps(self, small_world):
        result = ttl_trace("dns", "blocked.test", "v2", small_world)
        assert result.per_ttl_outcomes == (
            (1, TraceOutcome.TIME_EXCEEDED),
            (2, TraceOutcome.TIME_EXCEEDED),
            (3, TraceOutcome.INTERFERENCE),
        )
        assert result.first_interfering_ttl == 3
        assert result.chokepoint_router == "GW"

    def test_tcp_layers_located(self, small_world):
        assert ttl_trace(Layer.HTTP, "page.test", "v1", small_world).first_interfering_ttl == 2
        assert ttl_trace(Layer.TLS, "sni.test", "v2", small_world).first_interfering_ttl == 3

    def test_uncensored_target(self, small_world):
        result = ttl_trace("dns", "open.test", "v1", small_world)
        assert result.first_interfering_ttl is None
        assert result.chokepoint_router is None
        assert result.per_ttl_outcomes[-1] == (4, TraceOutcome.DELIVERED)

    def test_max_ttl_too_small(self, small_world):
        result = ttl_trace("dns", "blocked.test", "v2", small_world, max_ttl=2)
        assert result.first_interfering_ttl is None
        with pytest.raises(ValueError):
            ttl_trace("dns", "blocked.test", "v2", small_world, max_ttl=0)

    def test_chokepoint_at_first_hop(self, small_policy):
        spec = small_topology_spec(paths={"v1": ["GW", "x1"]})
        world = World(build_topology(spec), small_policy)
        assert ttl_trace("dns", "blocked.test", "v1", world).first_interfering_ttl == 1

    def test_monotonicity_enforced(self):
        with pytest.raises(ValueError):
            TraceResult(Layer.DNS, "a.test", "v1",
                        per_ttl_outcomes=((1, TraceOutcome.DELIVERED), (2, TraceOutcome.INTERFERENCE)),
                        first_interfering_ttl=2)

    def test_round_trip_dict(self, small_world):
        result = ttl_trace("dns", "blocked.test", "v1", small_world)
        assert TraceResult.from_dict(result.to_dict()) == result

    def test_unanimous_across_hop_indices(self, small_world):
        traces = [ttl_trace("dns", "blocked.test", v, small_world) for v in ("v1", "v2")]
        consensus = consensus_chokepoint(traces)
        assert consensus.kind is ConsensusKind.UNANIMOUS
        assert str(consensus) == "UNANIMOUS(GW)"

    def test_divergent(self):
        traces = [
            TraceResult(Layer.DNS, "a.test", "v1", ((1, TraceOutcome.INTERFERENCE),), 1, "GW"),
            TraceResult(Layer.DNS, "a.test", "v2", ((1, TraceOutcome.INTERFERENCE),), 1, "GW2"),
        ]
        consensus = consensus_chokepoint(traces)
        assert consensus.kind is ConsensusKind.DIVERGENT
        assert consensus.routers == ("GW", "GW2")
        assert consensus.router is None

    def test_unlocalized_trace_breaks_unanimity(self):
        """没有定位结果的观测点不算作同意"""
        traces = [
            TraceResult(Layer.DNS, "a.test", "v1", ((1, TraceOutcome.INTERFERENCE),), 1, "GW"),
            TraceResult(Layer.DNS, "a.test", "v2", ((1, TraceOutcome.TIME_EXCEEDED),)),
        ]
        consensus = consensus_chokepoint(traces)
        assert consensus.kind is ConsensusKind.DIVERGENT
        assert consensus.routers == ("GW",)
        assert consensus.unlocalized == ("v2",)
        assert consensus.router is None
        assert str(consensus) == "DIVERGENT(GW; unlocalized: v2)"

    def test_short_trace_is_not_counted(self, small_world):
        """max_ttl 不足以到达 v2 的瓶颈跳时，共识不能是 UNANIMOUS"""
        traces = [ttl_trace("dns", "blocked.test", v, small_world, max_ttl=2) for v in ("v1", "v2")]
        assert traces[0].chokepoint_router == "GW"
        assert traces[1].chokepoint_router is None
        consensus = consensus_chokepoint(traces)
        assert consensus.kind is ConsensusKind.DIVERGENT
        assert consensus.unlocalized == ("v2",)

    def test_consensus_dict_round_trip(self):
        traces = [
            TraceResult(Layer.DNS, "a.test", "v1", ((1, TraceOutcome.INTERFERENCE),), 1, "GW"),
            TraceResult(Layer.DNS, "a.test", "v2", ((1, TraceOutcome.TIME_EXCEEDED),)),
        ]
        consensus = consensus_chokepoint(traces)
        assert Consensus.from_dict(consensus.to_dict()) == consensus

    def test_single_trace(self):
        trace = TraceResult(Layer.DNS, "a.test", "v1", ((1, TraceOutcome.INTERFERENCE),), 1, "GW")
        assert consensus_chokepoint([trace]).router == "GW"

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            consensus_chokepoint([])
        with pytest.raises(EmptyInputError):
            consensus_chokepoint([TraceResult(Layer.DNS, "a.test", "v1", ((1, TraceOutcome.DELIVERED),))])


class TestMatrix:
    def test_whitelisted_classes_only(self, small_world):
        targets = [
            MatrixTarget(Transport.UDP, 53, "dns"),
            MatrixTarget(Transport.TCP, 443, "tls"),
            MatrixTarget(Transport.TCP, 22, "ssh"),
            MatrixTarget(Transport.UDP, 1194, "openvpn"),
        ]
        results = protocol_matrix("v1", small_world, targets, rng=random.Random(1))
        verdicts = {target.label: verdict.value for target, verdict in results}
        assert verdicts == {
            "DNS/53": VerdictKind.OK,
            "TLS/443": VerdictKind.OK,
            "SSH/22": VerdictKind.SILENT_DROP,
            "OPENVPN/1194": VerdictKind.SILENT_DROP,
        }

    def test_domestic_host_reachable(self, small_world):
        results = protocol_matrix("v1", small_world, [MatrixTarget(Transport.TCP, 22, "ssh", host="home")])
        assert results[0][1].value is VerdictKind.OK

    def test_empty_targets(self, small_world):
        with pytest.raises(ValueError):
            protocol_matrix("v1", small_world, [])

    def test_unknown_template(self):
        with pytest.raises(ValueError):
            MatrixTarget(Transport.TCP, 80, "gopher")


class TestOracle:
    """探测结论与策略预测一致"""

    CASES = [
        (Layer.DNS, "blocked.test", None, VerdictKind.DNS_POISONED),
        (Layer.DNS, "safe.test", None, VerdictKind.OK),
        (Layer.HTTP, "page.test", None, VerdictKind.HTTP_BLOCKPAGE),
        (Layer.HTTP, "reset.test", None, VerdictKind.TCP_RST),
        (Layer.HTTP, "page.test", Mutation.HEADER_CASE, VerdictKind.OK),
        (Layer.TLS, "sni.test", None, VerdictKind.TLS_RST_AFTER_CLIENTHELLO),
        (Layer.TLS, "open.test", None, VerdictKind.OK),
    ]

    @pytest.mark.parametrize("layer,domain,mutation,expected", CASES)
    def test_prediction_matches_probe(self, small_world, layer, domain, mutation, expected):
        assert predict_verdict(layer, domain, "v1", small_world, mutation) is expected
        entry = measure_baseline([domain], small_world).get(domain)
        probe = ProbeFactory.create(layer, small_world, "v1")
        assert probe.run(domain, entry, mutation).value is expected

    def test_no_sni_prediction(self, small_world):
        assert predict_verdict("tls", "sni.test", "v1", small_world, send_sni=False) is VerdictKind.OK

    def test_no_policy(self, small_topology):
        assert predict_verdict("dns", "blocked.test", "v1", World(small_topology, None)) is VerdictKind.OK
