"""Read-disturbance and ECC failure probabilities for STT-MRAM cache lines.

All functions are pure. Failure probabilities are always summed directly from
the binomial tail; the probability of correct delivery is never formed and
subtracted from one, because at realistic parameters it sits within 1e-13 of 1.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

from ._validation import check_count, check_positive, check_probability

__all__ = [
    "SignConvention",
    "DeviceParams",
    "BlockErrorQuery",
    "read_disturbance_probability",
    "binomial_tail",
    "block_error_probability",
    "accumulated_error_probability",
    "reap_error_probability",
    "mttf_from_ledger",
    "DEFAULT_P_CELL",
]

DEFAULT_P_CELL = 1e-8

# Relative size of the neglected remainder when a tail sum is truncated.
_TAIL_EPS = 1e-17
_SMALL_K_EXACT = 64


class SignConvention(str, enum.Enum):
    """Sign of the current-dependent exponent in the switching model.

    ``STANDARD`` uses ``-delta * (1 - i_read / i_c0)`` so disturbance grows with
    read current. ``AS_PRINTED`` uses ``-delta * (i_read - i_c0) / i_c0``.
    """

    STANDARD = "standard"
    AS_PRINTED = "as_printed"


@dataclass(frozen=True)
class DeviceParams:
    """Physical cell parameters. Times in ns, currents in uA.

    When ``p_override`` is set it is returned verbatim as the per-cell,
    per-read flip probability and the physical parameters are ignored.
    """

    tau: float = 1.0
    delta: float = 60.0
    i_read: float = 50.0
    i_c0: float = 100.0
    t_read: float = 1.0
    sign_convention: SignConvention = SignConvention.STANDARD
    p_override: Optional[float] = DEFAULT_P_CELL

    def __post_init__(self):
        check_positive(self.tau, "tau")
        check_positive(self.delta, "delta")
        check_positive(self.i_c0, "i_c0")
        check_positive(self.i_read, "i_read", strict=False)
        check_positive(self.t_read, "t_read", strict=False)
        object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))
        if self.p_override is not None:
            check_probability(self.p_override, "p_override")

    @property
    def p_cell(self):
        return read_disturbance_probability(self)

    def to_dict(self):
        return {
            "tau": self.tau,
            "delta": self.delta,
            "i_read": self.i_read,
            "i_c0": self.i_c0,
            "t_read": self.t_read,
            "sign_convention": self.sign_convention.value,
            "p_override": self.p_override,
        }


@dataclass(frozen=True)
class BlockErrorQuery:
    p: float
    n: int
    reads: int = 1
    ecc_t: int = 1

    def __post_init__(self):
        check_probability(self.p, "p")
        check_count(self.n, "n")
        check_count(self.reads, "reads", minimum=1)
        check_count(self.ecc_t, "ecc_t")


def read_disturbance_probability(params):
    """Probability that one read pulse flips a cell holding '1'."""
    if params.p_override is not None:
        return float(params.p_override)
    ratio = params.i_read / params.i_c0
    if params.sign_convention is SignConvention.STANDARD:
        exponent = -params.delta * (1.0 - ratio)
    else:
        exponent = -params.delta * (params.i_read - params.i_c0) / params.i_c0
    if params.t_read == 0:
        return 0.0
    try:
        rate = (params.t_read / params.tau) * math.exp(exponent)
    except OverflowError:
        return 1.0
    return min(1.0, max(0.0, -math.expm1(-rate)))


def _log_comb(n, k):
    k = min(k, n - k)
    if k <= _SMALL_K_EXACT:
        return math.fsum(math.log(n - j) for j in range(k)) - math.lgamma(k + 1)
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_pmf(trials, p, k):
    return _log_comb(trials, k) + k * math.log(p) + (trials - k) * math.log1p(-p)


def _sum_up(trials, p, start):
    # Sum P(X = i) for i = start..trials; start is at or above the mean.
    odds = p / (1.0 - p)
    term = math.exp(_log_pmf(trials, p, start))
    total = term
    i = start
    while i < trials and term > 0.0:
        ratio = (trials - i) / (i + 1) * odds
        term *= ratio
        i += 1
        total += term
        if ratio < 1.0 and term * ratio / (1.0 - ratio) <= _TAIL_EPS * total:
            break
    return total


def _sum_down(trials, p, start):
    # Sum P(X = i) for i = start..0; start is below the mean.
    inv_odds = (1.0 - p) / p
    term = math.exp(_log_pmf(trials, p, start))
    total = term
    i = start
    while i > 0 and term > 0.0:
        ratio = i / (trials - i + 1) * inv_odds
        term *= ratio
        i -= 1
        total += term
        if ratio < 1.0 and term * ratio / (1.0 - ratio) <= _TAIL_EPS * total:
            break
    return total


def binomial_tail(trials, p, k_min):
    """P(X >= k_min) for X ~ Binomial(trials, p).

    Whichever side of the distribution holds the smaller mass is summed term by
    term, starting from its largest term and using the pmf ratio recurrence.
    """
    trials = check_count(trials, "trials")
    p = check_probability(p, "p")
    k_min = check_count(k_min, "k_min")
    if k_min == 0:
        return 1.0
    if k_min > trials:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if k_min < trials * p:
        lower = _sum_down(trials, p, k_min - 1)
        return min(1.0, max(0.0, 1.0 - lower))
    return min(1.0, _sum_up(trials, p, k_min))


def block_error_probability(p, n, ecc_t=1):
    """Probability that a single read leaves more than ``ecc_t`` of ``n`` cells flipped."""
    q = BlockErrorQuery(p, n, 1, ecc_t)
    return binomial_tail(q.n, q.p, q.ecc_t + 1)


def accumulated_error_probability(p, n, reads, ecc_t=1):
    """Uncorrectable probability after ``reads`` unchecked reads then one check.

    Uses the fixed-population idealization: ``reads * n`` independent Bernoulli
    trials, so a cell can be counted as disturbed more than once.
    """
    q = BlockErrorQuery(p, n, reads, ecc_t)
    return binomial_tail(q.reads * q.n, q.p, q.ecc_t + 1)


def reap_error_probability(p, n, reads, ecc_t=1):
    """Uncorrectable probability over ``reads`` reads when every read is checked."""
    q = BlockErrorQuery(p, n, reads, ecc_t)
    single = binomial_tail(q.n, q.p, q.ecc_t + 1)
    if q.reads == 1:
        return single
    if single >= 1.0:
        return 1.0
    return min(1.0, -math.expm1(q.reads * math.log1p(-single)))


def mttf_from_ledger(expected_failures, sim_time):
    """Constant-hazard MTTF: simulated time per expected uncorrectable error.

    Returns ``math.inf`` when no failure is expected.
    """
    expected_failures = check_positive(expected_failures, "expected_failures", strict=False)
    sim_time = check_positive(sim_time, "sim_time")
    if expected_failures == 0.0:
        return math.inf
    return sim_time / expected_failures
