"""Monte Carlo fault injection used as an independent check on the closed forms.

Disturbance is unidirectional: only cells holding '1' can flip, and only to '0'.
Two depletion modes are offered:

``physical``
    A cell that already flipped cannot flip again; the decoder sees the number
    of mismatching bits.
``rebinomial``
    Every read re-disturbs every cell that holds '1' in the reference content,
    and each disturbance event counts as one error at the decoder, even when it
    lands on an already-flipped cell. This reproduces the fixed-population
    binomial used by the analytical model.
"""

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_probability

__all__ = [
    "Depletion",
    "Protocol",
    "BlockBits",
    "DecodeResult",
    "inject_read",
    "ecc_decode",
    "McScenario",
    "McStats",
    "run_trials",
]

CHUNK_TRIALS = 1 << 16


class Depletion(str, enum.Enum):
    PHYSICAL = "physical"
    REBINOMIAL = "rebinomial"


class Protocol(str, enum.Enum):
    CONVENTIONAL = "conventional"  # N unchecked reads, then one decode
    REAP = "reap"  # decode after every read


class BlockBits:
    """Golden and live content of one block, plus the error weight since the last decode."""

    def __init__(self, reference):
        self.reference = np.asarray(reference, dtype=bool).copy()
        self.current = self.reference.copy()
        self.errors = 0

    @classmethod
    def with_ones(cls, block_bits, n_ones, rng=None):
        if not 0 <= n_ones <= block_bits:
            raise ValueError(f"n_ones={n_ones} outside [0, {block_bits}]")
        ref = np.zeros(block_bits, dtype=bool)
        if rng is None:
            ref[:n_ones] = True
        else:
            ref[rng.choice(block_bits, size=n_ones, replace=False)] = True
        return cls(ref)

    @property
    def mismatches(self):
        return int(np.count_nonzero(self.current != self.reference))

    def scrub(self):
        self.current[:] = self.reference
        self.errors = 0


@dataclass(frozen=True)
class DecodeResult:
    status: str  # "clean" | "corrected" | "uncorrectable"
    count: int


def _check_unidirectional(block):
    if np.any(block.current & ~block.reference):
        raise AssertionError("0->1 transition observed")


def inject_read(block, p, rng, depletion=Depletion.PHYSICAL):
    """Disturb ``block`` by one read and return the number of new disturbance events."""
    depletion = Depletion(depletion)
    susceptible = block.current if depletion is Depletion.PHYSICAL else block.reference
    hits = susceptible & (rng.random(block.reference.size) < p)
    events = int(np.count_nonzero(hits))
    block.current &= ~hits
    block.errors += events
    _check_unidirectional(block)
    return events


def ecc_decode(block, ecc_t):
    """Decode against the reference; corrected blocks are scrubbed back to it."""
    m = block.errors
    if m < block.mismatches:
        raise AssertionError("error weight below mismatch count")
    if m == 0:
        return DecodeResult("clean", 0)
    if m <= ecc_t:
        block.scrub()
        return DecodeResult("corrected", m)
    return DecodeResult("uncorrectable", m)


@dataclass(frozen=True)
class McScenario:
    p: float
    n_ones: int
    reads_between_checks: int
    ecc_t: int = 1
    trials: int = 1_000_000
    seed: int = 0
    depletion: Depletion = Depletion.REBINOMIAL
    protocol: Protocol = Protocol.CONVENTIONAL

    def __post_init__(self):
        check_probability(self.p, "p")
        check_count(self.n_ones, "n_ones")
        check_count(self.reads_between_checks, "reads_between_checks", minimum=1)
        check_count(self.ecc_t, "ecc_t")
        check_count(self.trials, "trials", minimum=1)
        check_count(self.seed, "seed")
        object.__setattr__(self, "depletion", Depletion(self.depletion))
        object.__setattr__(self, "protocol", Protocol(self.protocol))

    def to_dict(self):
        return {
            "p": self.p,
            "n_ones": self.n_ones,
            "reads_between_checks": self.reads_between_checks,
            "ecc_t": self.ecc_t,
            "trials": self.trials,
            "seed": self.seed,
            "depletion": self.depletion.value,
            "protocol": self.protocol.value,
        }


@dataclass(frozen=True)
class McStats:
    uncorrectable_rate: float
    stderr: float
    trials: int
    failures: int

    def to_dict(self):
        return {
            "uncorrectable_rate": self.uncorrectable_rate,
            "stderr": self.stderr,
            "trials": self.trials,
            "failures": self.failures,
        }


def _bernoulli_positions(rng, total, p):
    """Sorted indices of successes among ``total`` Bernoulli(p) trials.

    Draws geometric gaps between successes, so the cost scales with the number
    of successes rather than with ``total``.
    """
    if p == 0.0 or total == 0:
        return np.empty(0, dtype=np.int64)
    if p == 1.0:
        return np.arange(total, dtype=np.int64)
    mean = total * p
    parts = []
    last = -1
    while True:
        size = int(mean + 6.0 * math.sqrt(mean) + 16)
        pos = last + np.cumsum(rng.geometric(p, size=size))
        if pos[-1] >= total:
            parts.append(pos[pos < total])
            break
        parts.append(pos)
        last = int(pos[-1])
    return np.concatenate(parts)


def _disturb(rng, alive, errors, n, p, depletion):
    # alive is the flattened (trials x n) view of the cells that hold '1' in the reference.
    pos = _bernoulli_positions(rng, alive.size, p)
    if depletion is Depletion.PHYSICAL:
        pos = pos[alive[pos]]
    alive[pos] = False
    errors += np.bincount(pos // n, minlength=errors.size)


def _run_chunk(scenario, chunk_index, size):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([scenario.seed, chunk_index])))
    n, p, t = scenario.n_ones, scenario.p, scenario.ecc_t
    if n == 0 or p == 0.0:
        return 0
    alive = np.ones(size * n, dtype=bool)
    errors = np.zeros(size, dtype=np.int64)
    if scenario.protocol is Protocol.CONVENTIONAL:
        for _ in range(scenario.reads_between_checks):
            _disturb(rng, alive, errors, n, p, scenario.depletion)
        return int(np.count_nonzero(errors > t))
    failed = np.zeros(size, dtype=bool)
    for _ in range(scenario.reads_between_checks):
        _disturb(rng, alive, errors, n, p, scenario.depletion)
        failed |= errors > t
        # Every decode scrubs the block; a failed trial stays failed.
        alive[:] = True
        errors[:] = 0
    return int(np.count_nonzero(failed))


def _chunk_sizes(trials):
    full, rest = divmod(trials, CHUNK_TRIALS)
    return [CHUNK_TRIALS] * full + ([rest] if rest else [])


def run_trials(scenario, workers=1):
    """Estimate the uncorrectable rate of ``scenario`` by bit-level simulation.

    Trials are split into fixed-size chunks seeded from ``(seed, chunk index)``,
    so the result does not depend on ``workers``.
    """
    sizes = _chunk_sizes(scenario.trials)
    if workers > 1 and len(sizes) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_run_chunk, [scenario] * len(sizes), range(len(sizes)), sizes))
    else:
        counts = [_run_chunk(scenario, i, s) for i, s in enumerate(sizes)]
    failures = sum(counts)
    rate = failures / scenario.trials
    stderr = math.sqrt(rate * (1.0 - rate) / scenario.trials)
    return McStats(rate, stderr, scenario.trials, failures)
