"""Read-disturbance reliability simulation for STT-MRAM set-associative caches."""

__version__ = "0.1.0"

from .cache import (  # noqa: E402
    AccessCounters,
    Cache,
    CacheGeometry,
    LineState,
    ReliabilityLedger,
    Scheme,
    SchemeConfig,
    decompose_address,
)
from .disturbance import (  # noqa: E402
    BlockErrorQuery,
    DeviceParams,
    SignConvention,
    accumulated_error_probability,
    binomial_tail,
    block_error_probability,
    mttf_from_ledger,
    read_disturbance_probability,
    reap_error_probability,
)
from .estimator import ReliabilitySimulator, compare_schemes  # noqa: E402
from .trace import AccessEvent, AccessKind, SyntheticSpec, generate_synthetic, parse_trace_line, stream_trace  # noqa: E402

__all__ = [
    "AccessCounters",
    "AccessEvent",
    "AccessKind",
    "BlockErrorQuery",
    "Cache",
    "CacheGeometry",
    "DeviceParams",
    "LineState",
    "ReliabilityLedger",
    "ReliabilitySimulator",
    "Scheme",
    "SchemeConfig",
    "SignConvention",
    "SyntheticSpec",
    "accumulated_error_probability",
    "binomial_tail",
    "block_error_probability",
    "compare_schemes",
    "decompose_address",
    "generate_synthetic",
    "mttf_from_ledger",
    "parse_trace_line",
    "read_disturbance_probability",
    "reap_error_probability",
    "stream_trace",
]
