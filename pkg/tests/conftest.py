"""
测试公共夹具

- june2025 / june_world / june_report: 随包附带的场景（会话级，只运行一次）
- small_*: 手工构造的两观测点小拓扑，单元测试使用
"""

import os
import sys

import pytest

# 添加项目路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.censor.policy import BlockAction, CensorPolicy, DomainPattern, HttpRule  # noqa: E402
from src.harness import load_scenario, run_scenario  # noqa: E402
from src.netsim.topology import HostRole, HostSpec, TopologySpec, build_topology  # noqa: E402
from src.netsim.world import World  # noqa: E402

ORIGIN_ADDRESS = "203.0.113.10"

SMALL_RECORDS = {
    "blocked.test": ORIGIN_ADDRESS,
    "open.test": ORIGIN_ADDRESS,
    "safe.test": ORIGIN_ADDRESS,
    "page.test": ORIGIN_ADDRESS,
    "reset.test": ORIGIN_ADDRESS,
    "sni.test": ORIGIN_ADDRESS,
}


def small_topology_spec(paths=None, chokepoint="GW"):
    """v1 的瓶颈在第 2 跳，v2 在第 3 跳"""
    return TopologySpec(
        paths=paths or {"v1": ["r1", "GW", "x1"], "v2": ["s1", "s2", "GW", "x1"]},
        chokepoint=chokepoint,
        hosts=[
            HostSpec("resolver", HostRole.RESOLVER, "198.51.100.53", records=SMALL_RECORDS),
            HostSpec("origin", HostRole.ORIGIN, ORIGIN_ADDRESS),
            HostSpec("ext", HostRole.EXTERNAL, "198.51.100.80"),
            HostSpec("base", HostRole.BASELINE, "198.51.100.99"),
            HostSpec("home", HostRole.DOMESTIC, "10.20.0.10"),
        ],
        baseline_path=["b1"],
    )


def small_policy_value(**overrides):
    options = dict(
        dns_blacklist=("blocked.test",),
        dns_whitelist=("safe.test",),
        http_rules=(
            HttpRule("page.test"),
            HttpRule("reset.test", action=BlockAction.RST),
        ),
        sni_blacklist=(DomainPattern("sni.test"),),
    )
    options.update(overrides)
    return CensorPolicy(**options)


@pytest.fixture
def small_topology():
    return build_topology(small_topology_spec())


@pytest.fixture
def small_policy():
    return small_policy_value()


@pytest.fixture
def small_world(small_topology, small_policy):
    return World(small_topology, small_policy)


@pytest.fixture(scope="session")
def june2025():
    return load_scenario("june2025")


@pytest.fixture(scope="session")
def june_world(june2025):
    return june2025.world()


@pytest.fixture(scope="session")
def june_report(june2025):
    return run_scenario(june2025)
