"""Access traces: a line-oriented text format and a seeded synthetic generator.

Trace grammar, one access per line::

    # comment
    R 0x1a40 ones=120
    W 1a80 payload=ff00ff00

Blank lines and ``#`` lines are skipped. ``ones`` and ``payload`` are mutually
exclusive content descriptors; with neither, the stream's default applies.
"""

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._validation import check_count, check_positive, check_probability

__all__ = [
    "AccessKind",
    "AccessEvent",
    "TraceError",
    "parse_trace_line",
    "format_event",
    "stream_trace",
    "SyntheticSpec",
    "generate_synthetic",
    "write_trace",
]

PRNG_NAME = "pcg64"
_CHUNK = 4096


class AccessKind(str, enum.Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True)
class AccessEvent:
    kind: AccessKind
    address: int
    ones: Optional[int] = None
    payload: Optional[bytes] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AccessKind(self.kind))
        if self.address < 0:
            raise ValueError("address must be non-negative")
        if self.ones is not None and self.payload is not None:
            raise ValueError("ones and payload are mutually exclusive")
        if self.ones is not None:
            check_count(self.ones, "ones")

    @property
    def is_read(self):
        return self.kind is AccessKind.READ

    def ones_count(self):
        if self.ones is not None:
            return self.ones
        if self.payload is not None:
            return int.from_bytes(self.payload, "big").bit_count()
        return None


class TraceError(ValueError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


def parse_trace_line(line, block_bits=512):
    """Parse one trace line; return an :class:`AccessEvent` or ``None`` to skip."""
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    fields = text.split()
    op = fields[0]
    if op not in ("R", "W"):
        raise TraceError(f"unknown op {op!r}")
    if len(fields) < 2:
        raise TraceError("missing address")
    raw_addr = fields[1]
    digits = raw_addr[2:] if raw_addr[:2].lower() == "0x" else raw_addr
    try:
        if not digits:
            raise ValueError
        address = int(digits, 16)
    except ValueError:
        raise TraceError(f"non-hex address {raw_addr!r}") from None

    ones = payload = None
    for item in fields[2:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise TraceError(f"expected key=value, got {item!r}")
        if key == "ones":
            if not value.isdigit():
                raise TraceError(f"ones must be a decimal count, got {value!r}")
            ones = int(value)
            if ones > block_bits:
                raise TraceError(f"ones={ones} exceeds block size of {block_bits} bits")
        elif key == "payload":
            try:
                payload = bytes.fromhex(value)
            except ValueError:
                raise TraceError(f"payload is not hex: {value!r}") from None
            if len(payload) * 8 > block_bits:
                raise TraceError(f"payload of {len(payload)} bytes exceeds block size")
        else:
            raise TraceError(f"unknown key {key!r}")
    if ones is not None and payload is not None:
        raise TraceError("ones and payload are mutually exclusive")
    return AccessEvent(AccessKind(op), address, ones, payload)


def format_event(event):
    parts = [event.kind.value, f"0x{event.address:x}"]
    if event.ones is not None:
        parts.append(f"ones={event.ones}")
    if event.payload is not None:
        parts.append(f"payload={event.payload.hex()}")
    return " ".join(parts)


def stream_trace(source, geometry, default_ones=None):
    """Lazily parse a binary or text stream of trace lines.

    Events without a content descriptor get ``default_ones`` (by default a
    quarter of the block). Parse errors carry the 1-based line number.
    """
    if default_ones is None:
        default_ones = geometry.default_ones
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise TraceError(f"invalid UTF-8: {exc}", line_no) from None
        try:
            event = parse_trace_line(raw, geometry.block_bits)
        except TraceError as exc:
            raise TraceError(str(exc), line_no) from None
        if event is None:
            continue
        if event.ones is None and event.payload is None:
            event = replace(event, ones=default_ones)
        yield event


class OnesModel(str, enum.Enum):
    FIXED = "fixed"
    UNIFORM = "uniform"  # independent uniform draw per event
    FROM_SEED = "from_seed"  # one stable draw per block address


@dataclass(frozen=True)
class SyntheticSpec:
    num_events: int = 100_000
    read_fraction: float = 0.7
    address_space: int = 65_536
    set_skew: float = 1.1
    ones_model: OnesModel = OnesModel.FIXED
    ones_fixed: Optional[int] = None
    seed: int = 42

    def __post_init__(self):
        check_count(self.num_events, "num_events")
        check_probability(self.read_fraction, "read_fraction")
        check_count(self.address_space, "address_space", minimum=1)
        check_positive(self.set_skew, "set_skew", strict=False)
        object.__setattr__(self, "ones_model", OnesModel(self.ones_model))
        check_count(self.seed, "seed")
        if self.seed >= 2**64:
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self):
        return {
            "num_events": self.num_events,
            "read_fraction": self.read_fraction,
            "address_space": self.address_space,
            "set_skew": self.set_skew,
            "ones_model": self.ones_model.value,
            "ones_fixed": self.ones_fixed,
            "seed": self.seed,
            "prng": PRNG_NAME,
        }


def _generator(seed, stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def generate_synthetic(spec, geometry):
    """Yield ``spec.num_events`` accesses, deterministic in ``spec.seed``.

    Block popularity follows a bounded Zipf law over ``address_space`` blocks;
    popularity ranks are mapped to block numbers through a seeded permutation
    so hot blocks scatter across sets.
    """
    block_bits = geometry.block_bits
    fixed = geometry.default_ones if spec.ones_fixed is None else spec.ones_fixed
    if not 0 <= fixed <= block_bits:
        raise ValueError(f"ones_fixed={fixed} outside [0, {block_bits}]")

    ranks = np.arange(1, spec.address_space + 1, dtype=np.float64)
    cdf = np.cumsum(ranks ** -spec.set_skew)
    cdf /= cdf[-1]
    block_of_rank = _generator(spec.seed, 0).permutation(spec.address_space)
    block_ones = None
    if spec.ones_model is OnesModel.FROM_SEED:
        block_ones = _generator(spec.seed, 1).integers(0, block_bits + 1, size=spec.address_space)
    rng = _generator(spec.seed, 2)
    stride = geometry.block_bytes

    remaining = spec.num_events
    while remaining > 0:
        size = min(_CHUNK, remaining)
        remaining -= size
        is_read = rng.random(size) < spec.read_fraction
        rank_idx = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), spec.address_space - 1)
        blocks = block_of_rank[rank_idx]
        if spec.ones_model is OnesModel.UNIFORM:
            ones = rng.integers(0, block_bits + 1, size=size)
        elif spec.ones_model is OnesModel.FROM_SEED:
            ones = block_ones[blocks]
        else:
            ones = np.full(size, fixed)
        for r, b, n in zip(is_read.tolist(), blocks.tolist(), ones.tolist()):
            yield AccessEvent(AccessKind.READ if r else AccessKind.WRITE, b * stride, ones=n)


def write_trace(events, sink, header=None):
    """Write events to a text sink in the trace format; returns the count written."""
    count = 0
    if header:
        for line in header.splitlines():
            sink.write(f"# {line}\n")
    for event in events:
        sink.write(format_event(event) + "\n")
        count += 1
    return count
