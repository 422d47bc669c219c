"""
确定性网络模拟: 报文、多 ISP 拓扑、逐跳转发与 TTL 语义、流与握手
"""

from .packet import DEFAULT_TTL, Packet
from .topology import HostRole, HostSpec, Topology, TopologySpec, build_topology
from .network import DeliveryKind, DeliveryOutcome, forward
from .flow import CapturedPacket, ConnectionResult, Direction, Flow, tcp_handshake
from .world import World

__all__ = [
    "DEFAULT_TTL", "Packet",
    "HostRole", "HostSpec", "Topology", "TopologySpec", "build_topology",
    "DeliveryKind", "DeliveryOutcome", "forward",
    "CapturedPacket", "ConnectionResult", "Direction", "Flow", "tcp_handshake",
    "World",
]
