import io
import statistics

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reapsim.cache import Cache, CacheGeometry
from reapsim.trace import (
    AccessEvent,
    AccessKind,
    SyntheticSpec,
    TraceError,
    format_event,
    generate_synthetic,
    parse_trace_line,
    stream_trace,
    write_trace,
)

G = CacheGeometry()


def test_parse_basic():
    ev = parse_trace_line("R 0x1A40 ones=120")
    assert ev == AccessEvent(AccessKind.READ, 0x1A40, ones=120)


def test_parse_variants():
    assert parse_trace_line("  W 1a40  ").address == 0x1A40
    assert parse_trace_line("W 0XFF payload=0f0f").payload == b"\x0f\x0f"
    assert parse_trace_line("W 0XFF payload=0f0f").ones_count() == 8


@pytest.mark.parametrize("line", ["# comment", "", "   ", "\t# indented comment"])
def test_parse_skip(line):
    assert parse_trace_line(line) is None


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("X 0x10", "unknown op"),
        ("r 0x10", "unknown op"),
        ("R", "missing address"),
        ("R 0xZZ", "non-hex"),
        ("R 0x", "non-hex"),
        ("R 0x10 ones=1 payload=ff", "mutually exclusive"),
        ("R 0x10 ones=513", "exceeds"),
        ("R 0x10 ones=-1", "decimal"),
        ("R 0x10 color=red", "unknown key"),
        ("R 0x10 ones", "key=value"),
        ("R 0x10 payload=xyz", "not hex"),
    ],
)
def test_parse_errors(line, fragment):
    with pytest.raises(TraceError, match=fragment):
        parse_trace_line(line)


events = st.builds(
    lambda kind, addr, desc: AccessEvent(kind, addr, **desc),
    st.sampled_from(list(AccessKind)),
    st.integers(0, 2**64),
    st.one_of(
        st.just({}),
        st.integers(0, 512).map(lambda n: {"ones": n}),
        st.binary(min_size=1, max_size=64).map(lambda b: {"payload": b}),
    ),
)


@given(ev=events)
def test_format_parse_roundtrip(ev):
    assert parse_trace_line(format_event(ev)) == ev


def test_stream_skips_comments_and_fills_default():
    src = io.BytesIO(b"# header\nR 0x0\nW 0x40 ones=3\n")
    out = list(stream_trace(src, G))
    assert len(out) == 2
    assert out[0].ones == G.block_bits // 4 == 128
    assert out[1].ones == 3


def test_stream_reports_line_number():
    lines = ["R 0x0"] * 6 + ["R nothex"]
    with pytest.raises(TraceError, match="line 7") as info:
        list(stream_trace(io.BytesIO("\n".join(lines).encode()), G))
    assert info.value.line_no == 7


def test_stream_is_lazy():
    def source():
        yield b"R 0x0\n"
        raise AssertionError("read past the first event")

    it = stream_trace(source(), G)
    assert next(it).address == 0


def test_stream_bounded_memory(tmp_path):
    import tracemalloc

    path = tmp_path / "big.trace"
    n = 200_000
    with open(path, "w") as fh:
        for i in range(n):
            fh.write(f"R 0x{i * 64:x}\n")
    tracemalloc.start()
    count = 0
    with open(path, "rb") as fh:
        for _ in stream_trace(fh, G):
            count += 1
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert count == n
    # Whole-file buffering of the parsed events would need tens of MB.
    assert peak < 2 * 2**20


def test_synthetic_deterministic():
    spec = SyntheticSpec(num_events=5000, seed=42)
    assert list(generate_synthetic(spec, G)) == list(generate_synthetic(spec, G))
    other = SyntheticSpec(num_events=5000, seed=43)
    assert list(generate_synthetic(spec, G)) != list(generate_synthetic(other, G))


def test_synthetic_all_reads():
    spec = SyntheticSpec(num_events=5000, read_fraction=1.0)
    assert all(ev.is_read for ev in generate_synthetic(spec, G))


def test_synthetic_read_fraction():
    spec = SyntheticSpec(num_events=100_000, read_fraction=0.7, seed=3)
    reads = sum(ev.is_read for ev in generate_synthetic(spec, G))
    # 0.01 is more than 6 binomial standard deviations (sd ~ 0.00145).
    assert abs(reads / 100_000 - 0.7) <= 0.01


def test_synthetic_ones_models():
    fixed = list(generate_synthetic(SyntheticSpec(num_events=200, ones_fixed=7), G))
    assert {ev.ones for ev in fixed} == {7}
    default = list(generate_synthetic(SyntheticSpec(num_events=200), G))
    assert {ev.ones for ev in default} == {128}
    uniform = list(generate_synthetic(SyntheticSpec(num_events=2000, ones_model="uniform"), G))
    assert len({ev.ones for ev in uniform}) > 100
    seeded = list(generate_synthetic(SyntheticSpec(num_events=5000, ones_model="from_seed"), G))
    per_block = {}
    for ev in seeded:
        per_block.setdefault(ev.address, set()).add(ev.ones)
    assert all(len(v) == 1 for v in per_block.values())


def test_synthetic_addresses_block_aligned():
    for ev in generate_synthetic(SyntheticSpec(num_events=1000, address_space=100), G):
        assert ev.address % G.block_bytes == 0
        assert ev.address // G.block_bytes < 100


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(read_fraction=1.5)
    with pytest.raises(ValueError):
        SyntheticSpec(num_events=-1)
    with pytest.raises(ValueError):
        SyntheticSpec(set_skew=-0.1)


def test_heavy_tail_precondition():
    spec = SyntheticSpec(set_skew=1.1)
    assert spec.set_skew > 1
    cache = Cache(G)
    for ev in generate_synthetic(spec, G):
        cache.access(ev, 1e-8)
    cache.drain(1e-8)
    hist = cache.ledger.check_histogram
    samples = [n for n, c in hist.items() for _ in range(c)]
    assert max(samples) > 10 * max(statistics.median(samples), 1)


def test_write_trace_roundtrip():
    spec = SyntheticSpec(num_events=300, seed=9)
    buf = io.StringIO()
    write_trace(generate_synthetic(spec, G), buf, header="demo")
    parsed = list(stream_trace(io.BytesIO(buf.getvalue().encode()), G))
    assert parsed == list(generate_synthetic(spec, G))
