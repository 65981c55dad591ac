"""Trace-driven set-associative cache with read-disturbance accounting.

The cache contents (hits, misses, LRU victims) are identical under every read
path; the schemes differ only in which lines pass through an ECC decoder and
therefore in how much expected failure each access adds to the ledger.
"""

import enum
import numbers
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional

from ._validation import check_count, check_power_of_two, check_probability
from .disturbance import accumulated_error_probability, read_disturbance_probability

__all__ = [
    "Scheme",
    "SchemeConfig",
    "CacheGeometry",
    "LineState",
    "ReliabilityLedger",
    "AccessCounters",
    "AccessOutcome",
    "Cache",
    "decompose_address",
]


class Scheme(str, enum.Enum):
    CONVENTIONAL = "conventional"  # parallel read, only the requested line is checked
    REAP = "reap"  # parallel read, every read line is checked
    SERIAL = "serial"  # tag compare first, then read only the hit line


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme = Scheme.CONVENTIONAL
    writes_cause_concealed_reads: bool = False
    account_dirty_writeback: bool = True
    drain_dirty_at_end: bool = True
    replacement: str = "lru"

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.replacement != "lru":
            raise ValueError(f"unsupported replacement policy {self.replacement!r}")

    def to_dict(self):
        return {
            "scheme": self.scheme.value,
            "writes_cause_concealed_reads": self.writes_cause_concealed_reads,
            "account_dirty_writeback": self.account_dirty_writeback,
            "drain_dirty_at_end": self.drain_dirty_at_end,
            "replacement": self.replacement,
        }


@dataclass(frozen=True)
class CacheGeometry:
    num_sets: int = 1024
    ways: int = 8
    block_bits: int = 512
    ecc_t: int = 1

    def __post_init__(self):
        check_power_of_two(self.num_sets, "num_sets")
        check_count(self.ways, "ways", minimum=1)
        check_count(self.block_bits, "block_bits", minimum=1)
        check_count(self.ecc_t, "ecc_t")

    @property
    def block_bytes(self):
        return (self.block_bits + 7) // 8

    @property
    def offset_bits(self):
        return (self.block_bytes - 1).bit_length()

    @property
    def set_bits(self):
        return self.num_sets.bit_length() - 1

    @property
    def default_ones(self):
        return self.block_bits // 4

    def decompose(self, addr):
        offset = addr & ((1 << self.offset_bits) - 1)
        set_index = (addr >> self.offset_bits) & (self.num_sets - 1)
        tag = addr >> (self.offset_bits + self.set_bits)
        return tag, set_index, offset

    def compose(self, tag, set_index, offset=0):
        return (tag << (self.offset_bits + self.set_bits)) | (set_index << self.offset_bits) | offset

    def to_dict(self):
        return {
            "num_sets": self.num_sets,
            "ways": self.ways,
            "block_bits": self.block_bits,
            "ecc_t": self.ecc_t,
        }


def decompose_address(addr, geometry):
    """Split ``addr`` into ``(tag, set_index, offset)``."""
    if addr < 0:
        raise ValueError(f"address must be non-negative, got {addr}")
    return geometry.decompose(addr)


@dataclass
class LineState:
    valid: bool = False
    tag: int = 0
    dirty: bool = False
    ones_count: int = 0
    unchecked_reads: int = 0


@dataclass
class ReliabilityLedger:
    scheme: str
    expected_failures: float = 0.0
    checked_reads: int = 0
    concealed_increments: int = 0
    check_histogram: Dict[int, int] = field(default_factory=dict)

    def record_check(self, concealed, probability):
        self.expected_failures += probability
        self.checked_reads += 1
        self.check_histogram[concealed] = self.check_histogram.get(concealed, 0) + 1

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "expected_failures": self.expected_failures,
            "checked_reads": self.checked_reads,
            "concealed_increments": self.concealed_increments,
            "check_histogram": {str(k): self.check_histogram[k] for k in sorted(self.check_histogram)},
        }


@dataclass
class AccessCounters:
    """Event counts consumed by the energy model.

    ``line_reads`` is the number of data lines read by read requests (the
    valid ways for the parallel schemes, the hit line for the serial one).
    ``log`` holds one ``(kind, line_reads, decodes)`` tuple per access when
    logging is enabled; the drain appends ``("D", 0, decodes)``.
    """

    scheme: str
    reads: int = 0
    writes: int = 0
    hits: int = 0
    misses: int = 0
    line_reads: int = 0
    decodes: int = 0
    evictions: int = 0
    writebacks: int = 0
    log: Optional[List[tuple]] = None

    @property
    def accesses(self):
        return self.reads + self.writes

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "reads": self.reads,
            "writes": self.writes,
            "hits": self.hits,
            "misses": self.misses,
            "line_reads": self.line_reads,
            "decodes": self.decodes,
            "evictions": self.evictions,
            "writebacks": self.writebacks,
        }


@dataclass(frozen=True)
class AccessOutcome:
    hit: bool
    set_index: int
    way: int
    evicted_tag: Optional[int]
    writeback: bool
    concealed: int
    checks: int
    failure_added: float


def _resolve_p(device):
    if isinstance(device, numbers.Real):
        return check_probability(device, "p")
    return read_disturbance_probability(device)


@lru_cache(maxsize=1 << 16)
def _check_probability(p, n, reads, ecc_t):
    return accumulated_error_probability(p, n, reads, ecc_t)


class Cache:
    """Mutable cache state driven one access at a time.

    Parameters
    ----------
    geometry : CacheGeometry
    config : SchemeConfig
    record_log : bool
        Keep a per-access log on ``counters.log``.
    """

    def __init__(self, geometry, config=None, record_log=False):
        if not isinstance(geometry, CacheGeometry):
            raise TypeError("geometry must be a CacheGeometry")
        self.geometry = geometry
        self.config = config if config is not None else SchemeConfig()
        self.sets = [[LineState() for _ in range(geometry.ways)] for _ in range(geometry.num_sets)]
        # Per-set way order, least recently used first.
        self._lru = [list(range(geometry.ways)) for _ in range(geometry.num_sets)]
        label = self.config.scheme.value
        self.ledger = ReliabilityLedger(scheme=label)
        self.counters = AccessCounters(scheme=label, log=[] if record_log else None)

    @property
    def scheme(self):
        return self.config.scheme

    def lines(self):
        for lines in self.sets:
            yield from lines

    def _touch(self, set_index, way):
        order = self._lru[set_index]
        order.remove(way)
        order.append(way)

    def _check(self, line, p):
        # A checked read: the line is read once more, decoded, and scrubbed.
        prob = _check_probability(p, line.ones_count, line.unchecked_reads + 1, self.geometry.ecc_t)
        self.ledger.record_check(line.unchecked_reads, prob)
        self.counters.decodes += 1
        line.unchecked_reads = 0
        return prob

    def _parallel_probe(self, lines, skip_way, p):
        """Speculative read of every valid way except ``skip_way``."""
        concealed = checks = 0
        failure = 0.0
        for way, line in enumerate(lines):
            if not line.valid or way == skip_way:
                continue
            if self.scheme is Scheme.REAP:
                failure += self._check(line, p)
                checks += 1
            else:
                line.unchecked_reads += 1
                concealed += 1
        self.ledger.concealed_increments += concealed
        return concealed, checks, failure

    def _fill(self, set_index, tag, ones, dirty, p):
        lines = self.sets[set_index]
        way = next((w for w, line in enumerate(lines) if not line.valid), None)
        evicted_tag = None
        writeback = False
        failure = 0.0
        if way is None:
            way = self._lru[set_index][0]
            victim = lines[way]
            evicted_tag = victim.tag
            self.counters.evictions += 1
            if victim.dirty and self.config.account_dirty_writeback:
                failure += self._check(victim, p)
                self.counters.writebacks += 1
                writeback = True
        lines[way] = LineState(valid=True, tag=tag, dirty=dirty, ones_count=ones)
        self._touch(set_index, way)
        return way, evicted_tag, writeback, failure

    def _ones_for(self, event):
        ones = event.ones_count()
        if ones is None:
            ones = self.geometry.default_ones
        if not 0 <= ones <= self.geometry.block_bits:
            raise ValueError(f"ones count {ones} outside [0, {self.geometry.block_bits}]")
        return ones

    def access(self, event, device):
        """Apply one access.

        ``device`` is a :class:`DeviceParams` or a per-cell flip probability.
        """
        p = _resolve_p(device)
        tag, set_index, _ = self.geometry.decompose(event.address)
        lines = self.sets[set_index]
        hit_way = next((w for w, line in enumerate(lines) if line.valid and line.tag == tag), None)
        hit = hit_way is not None
        counters = self.counters
        decodes_before = counters.decodes
        failure = 0.0
        concealed = checks = line_reads = 0

        if event.is_read:
            counters.reads += 1
            if self.scheme is Scheme.SERIAL:
                if hit:
                    failure += self._check(lines[hit_way], p)
                    checks = line_reads = 1
            else:
                line_reads = sum(1 for line in lines if line.valid)
                if hit:
                    failure += self._check(lines[hit_way], p)
                    checks = 1
                c, k, f = self._parallel_probe(lines, hit_way, p)
                concealed, checks, failure = c, checks + k, failure + f
            counters.line_reads += line_reads
        else:
            counters.writes += 1
            if self.config.writes_cause_concealed_reads and self.scheme is not Scheme.SERIAL:
                concealed, checks, failure = self._parallel_probe(lines, hit_way, p)

        evicted_tag = None
        writeback = False
        if hit:
            counters.hits += 1
            way = hit_way
            if not event.is_read:
                line = lines[way]
                line.ones_count = self._ones_for(event)
                line.dirty = True
                line.unchecked_reads = 0
            self._touch(set_index, way)
        else:
            counters.misses += 1
            way, evicted_tag, writeback, f = self._fill(
                set_index, tag, self._ones_for(event), not event.is_read, p
            )
            failure += f
            checks += int(writeback)

        if counters.log is not None:
            counters.log.append(("R" if event.is_read else "W", line_reads, counters.decodes - decodes_before))
        return AccessOutcome(hit, set_index, way, evicted_tag, writeback, concealed, checks, failure)

    def drain(self, device):
        """Settle every dirty line as a final checked read, then return the ledger.

        Settled lines are marked clean, so a second drain adds nothing.
        """
        if not self.config.drain_dirty_at_end:
            return self.ledger
        p = _resolve_p(device)
        decodes_before = self.counters.decodes
        for line in self.lines():
            if line.valid and line.dirty:
                self._check(line, p)
                line.dirty = False
        if self.counters.log is not None and self.counters.decodes != decodes_before:
            self.counters.log.append(("D", 0, self.counters.decodes - decodes_before))
        return self.ledger
