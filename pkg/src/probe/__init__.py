"""
测量客户端: 分层探测、基线比对、结论分类、TTL 定位与跨观测点共识
"""

from .verdict import (
    DEFAULT_SETTINGS,
    Evidence,
    Layer,
    Mutation,
    Observation,
    ProbeSettings,
    Verdict,
    VerdictKind,
    classify,
)
from .baseline import Baseline, BaselineEntry, HttpFingerprint, measure_baseline
from .probes import (
    PAYLOAD_TEMPLATES,
    LayerProbe,
    MatrixTarget,
    ProbeFactory,
    dns_probe,
    http_probe,
    protocol_matrix,
    tls_probe,
)
from .trace import Consensus, ConsensusKind, TraceOutcome, TraceResult, consensus_chokepoint, ttl_trace
from .oracle import predict_verdict

__all__ = [
    "DEFAULT_SETTINGS", "Evidence", "Layer", "Mutation", "Observation", "ProbeSettings",
    "Verdict", "VerdictKind", "classify",
    "Baseline", "BaselineEntry", "HttpFingerprint", "measure_baseline",
    "PAYLOAD_TEMPLATES", "LayerProbe", "MatrixTarget", "ProbeFactory",
    "dns_probe", "http_probe", "protocol_matrix", "tls_probe",
    "Consensus", "ConsensusKind", "TraceOutcome", "TraceResult", "consensus_chokepoint", "ttl_trace",
    "predict_verdict",
]
