"""scikit-learn style front end for the cache reliability engine."""

import math

from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_positive
from .cache import Cache, CacheGeometry, Scheme, SchemeConfig
from .disturbance import DeviceParams, mttf_from_ledger, read_disturbance_probability
from .reporting import normalized_mttf
from .trace import AccessEvent


class ReliabilitySimulator(BaseEstimator):
    """Replay an access trace through an STT-MRAM cache and accumulate expected failures.

    Parameters
    ----------
    num_sets, ways, block_bits, ecc_t : int
        Cache geometry and ECC correction capability per block.
    scheme : {"conventional", "reap", "serial"}
        Read path.
    device : DeviceParams or None
        Cell model; ``None`` uses :class:`DeviceParams` defaults.
    writes_cause_concealed_reads, account_dirty_writeback, drain_dirty_at_end : bool
        Accounting switches, see :class:`SchemeConfig`.
    ns_per_access : float
        Simulated time charged per access, used for MTTF.
    record_log : bool
        Keep a per-access energy log on ``counters_.log``.

    Attributes
    ----------
    ledger_ : ReliabilityLedger
    counters_ : AccessCounters
    cache_ : Cache
    p_cell_ : float
    sim_time_ns_ : float
    """

    def __init__(
        self,
        num_sets=1024,
        ways=8,
        block_bits=512,
        ecc_t=1,
        scheme="conventional",
        device=None,
        writes_cause_concealed_reads=False,
        account_dirty_writeback=True,
        drain_dirty_at_end=True,
        ns_per_access=1.0,
        record_log=False,
    ):
        self.num_sets = num_sets
        self.ways = ways
        self.block_bits = block_bits
        self.ecc_t = ecc_t
        self.scheme = scheme
        self.device = device
        self.writes_cause_concealed_reads = writes_cause_concealed_reads
        self.account_dirty_writeback = account_dirty_writeback
        self.drain_dirty_at_end = drain_dirty_at_end
        self.ns_per_access = ns_per_access
        self.record_log = record_log

    def _geometry(self):
        return CacheGeometry(self.num_sets, self.ways, self.block_bits, self.ecc_t)

    def _scheme_config(self):
        check_choice(self.scheme, "scheme", {s.value for s in Scheme} | set(Scheme))
        return SchemeConfig(
            scheme=self.scheme,
            writes_cause_concealed_reads=self.writes_cause_concealed_reads,
            account_dirty_writeback=self.account_dirty_writeback,
            drain_dirty_at_end=self.drain_dirty_at_end,
        )

    def fit(self, X, y=None):
        """Run the whole trace ``X`` (an iterable of :class:`AccessEvent`), then drain."""
        geometry = self._geometry()
        check_positive(self.ns_per_access, "ns_per_access")
        device = self.device if self.device is not None else DeviceParams()
        p = read_disturbance_probability(device)
        cache = Cache(geometry, self._scheme_config(), record_log=self.record_log)
        for event in X:
            if not isinstance(event, AccessEvent):
                raise TypeError(f"expected AccessEvent, got {type(event).__name__}")
            cache.access(event, p)
        cache.drain(p)
        self.cache_ = cache
        self.ledger_ = cache.ledger
        self.counters_ = cache.counters
        self.p_cell_ = p
        self.sim_time_ns_ = cache.counters.accesses * self.ns_per_access
        return self

    @property
    def mttf_ns_(self):
        check_is_fitted(self, "ledger_")
        if self.sim_time_ns_ == 0:
            return math.inf
        return mttf_from_ledger(self.ledger_.expected_failures, self.sim_time_ns_)

    def score(self, X=None, y=None):
        """Negative expected failure count of the fitted run (higher is better)."""
        check_is_fitted(self, "ledger_")
        return -self.ledger_.expected_failures


def compare_schemes(estimator, events, baseline="conventional", candidate="reap"):
    """Fit clones of ``estimator`` under two read paths on the same trace.

    ``events`` must be re-iterable (a list, or a callable returning a fresh
    iterator). Returns ``(baseline_fit, candidate_fit, normalized_mttf)``.
    """
    fits = []
    for scheme in (baseline, candidate):
        trace = events() if callable(events) else events
        fits.append(clone(estimator).set_params(scheme=scheme).fit(trace))
    base, cand = fits
    return base, cand, normalized_mttf(base.ledger_.expected_failures, cand.ledger_.expected_failures)
