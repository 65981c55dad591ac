"""Report builders and deterministic JSON/CSV emission.

Every report exposes ``to_dict()`` (keys in a fixed order), ``csv_header``
and ``csv_rows()``. Floats are emitted in scientific notation with 12
significant digits in both formats.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

from ._validation import check_positive
from .cache import AccessCounters, Scheme
from .disturbance import accumulated_error_probability, mttf_from_ledger, read_disturbance_probability

__all__ = [
    "SCHEMA_VERSION",
    "EnergyParams",
    "AreaParams",
    "HistogramReport",
    "EnergyReport",
    "AreaReport",
    "MttfReport",
    "build_histogram",
    "energy_report",
    "area_report",
    "mttf_report",
    "emit",
    "format_float",
    "render_json",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EnergyParams:
    """Per-event dynamic energies in pJ.

    Defaults put one decode at 0.37% of an 8-way parallel read
    (8 * 10 + 2 pJ), keeping the decoder under 1% of cache energy.
    """

    e_line_read: float = 10.0
    e_line_write: float = 25.0
    e_tag_access: float = 2.0
    e_ecc_decode: float = 0.3

    def __post_init__(self):
        for name in ("e_line_read", "e_line_write", "e_tag_access", "e_ecc_decode"):
            check_positive(getattr(self, name), name, strict=False)

    def to_dict(self):
        return {
            "e_line_read": self.e_line_read,
            "e_line_write": self.e_line_write,
            "e_tag_access": self.e_tag_access,
            "e_ecc_decode": self.e_ecc_decode,
        }


@dataclass(frozen=True)
class AreaParams:
    decoder_area_fraction: float = 0.001

    def __post_init__(self):
        check_positive(self.decoder_area_fraction, "decoder_area_fraction", strict=False)
        if self.decoder_area_fraction >= 1:
            raise ValueError("decoder_area_fraction must be < 1")

    def to_dict(self):
        return {"decoder_area_fraction": self.decoder_area_fraction}


@dataclass
class HistogramRow:
    concealed_reads: int
    count: int
    normalized: float
    failure_contribution: float


@dataclass
class HistogramReport:
    scheme: str
    p_cell: float
    mean_ones: int
    ecc_t: int
    rows: List[HistogramRow] = field(default_factory=list)

    report_type = "histogram"
    csv_header = ("concealed_reads", "count", "normalized", "failure_contribution")

    def csv_rows(self):
        for r in self.rows:
            yield (r.concealed_reads, r.count, r.normalized, r.failure_contribution)

    def to_dict(self):
        return {
            "scheme": self.scheme,
            "p_cell": self.p_cell,
            "mean_ones": self.mean_ones,
            "ecc_t": self.ecc_t,
            "rows": [dict(zip(self.csv_header, row)) for row in self.csv_rows()],
        }


def _p_of(model):
    if isinstance(model, (int, float)):
        return float(model)
    return read_disturbance_probability(model)


def build_histogram(ledger, model, mean_ones, ecc_t=1):
    """Concealed-read histogram of a finalized ledger.

    Counts are rescaled so that the no-concealed-read bin reads 100; when that
    bin is empty the lowest populated bin is used as the reference instead.
    Each bin's failure contribution is its raw count times the accumulated
    error probability of a line with ``mean_ones`` ones read N + 1 times.
    """
    p = _p_of(model)
    report = HistogramReport(ledger.scheme, p, mean_ones, ecc_t)
    hist = {k: v for k, v in ledger.check_histogram.items() if v}
    if not hist:
        return report
    scale = 100.0 / hist[min(hist)]
    for n_concealed in sorted(hist):
        count = hist[n_concealed]
        contribution = count * accumulated_error_probability(p, mean_ones, n_concealed + 1, ecc_t)
        report.rows.append(HistogramRow(n_concealed, count, count * scale, contribution))
    return report


@dataclass
class EnergyRow:
    scheme: str
    reads: int
    writes: int
    line_reads: int
    decodes: int
    read_energy: float
    write_energy: float
    decode_energy: float
    total_energy: float


@dataclass
class EnergyReport:
    params: EnergyParams
    rows: List[EnergyRow]
    overhead_ratio: Optional[float]

    report_type = "energy"
    csv_header = (
        "scheme", "reads", "writes", "line_reads", "decodes",
        "read_energy_pj", "write_energy_pj", "decode_energy_pj", "total_energy_pj",
    )

    def csv_rows(self):
        for r in self.rows:
            yield (r.scheme, r.reads, r.writes, r.line_reads, r.decodes,
                   r.read_energy, r.write_energy, r.decode_energy, r.total_energy)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "schemes": [dict(zip(self.csv_header, row)) for row in self.csv_rows()],
            "overhead_ratio": self.overhead_ratio,
        }


def _energy_row(counters, params):
    read_energy = counters.line_reads * params.e_line_read + counters.reads * params.e_tag_access
    write_energy = counters.writes * (params.e_line_write + params.e_tag_access)
    decode_energy = counters.decodes * params.e_ecc_decode
    return EnergyRow(
        counters.scheme, counters.reads, counters.writes, counters.line_reads, counters.decodes,
        read_energy, write_energy, decode_energy, read_energy + write_energy + decode_energy,
    )


def energy_report(counters, params, geometry=None):
    """Dynamic energy per scheme.

    ``counters`` maps a scheme label to the :class:`AccessCounters` of a
    completed run (a single counters object is also accepted). When both the
    conventional and REAP runs are present, ``overhead_ratio`` is REAP total
    energy over conventional total energy.
    """
    if isinstance(counters, AccessCounters):
        counters = {counters.scheme: counters}
    rows = []
    for label, c in counters.items():
        if Scheme(label).value != c.scheme:
            raise ValueError(f"counters for scheme {c.scheme!r} filed under {label!r}")
        if geometry is not None and c.line_reads > c.reads * geometry.ways:
            raise ValueError("line_reads exceeds reads x ways; counters do not match geometry")
        rows.append(_energy_row(c, params))
    by_scheme = {r.scheme: r for r in rows}
    ratio = None
    conv, reap = by_scheme.get(Scheme.CONVENTIONAL.value), by_scheme.get(Scheme.REAP.value)
    if conv is not None and reap is not None:
        if conv.total_energy > 0:
            ratio = reap.total_energy / conv.total_energy
        elif reap.total_energy == 0:
            ratio = 1.0
    return EnergyReport(params, rows, ratio)


@dataclass
class AreaReport:
    ways: int
    decoder_area_fraction: float
    decoders_conventional: int
    decoders_reap: int
    overhead_fraction: float

    report_type = "area"
    csv_header = ("ways", "decoder_area_fraction", "decoders_conventional", "decoders_reap", "overhead_fraction")

    def csv_rows(self):
        yield (self.ways, self.decoder_area_fraction, self.decoders_conventional,
               self.decoders_reap, self.overhead_fraction)

    def to_dict(self):
        return dict(zip(self.csv_header, next(self.csv_rows())))


def area_report(geometry, params):
    """Extra area from replicating the ECC decoder once per way."""
    ways = geometry.ways
    return AreaReport(ways, params.decoder_area_fraction, 1, ways, (ways - 1) * params.decoder_area_fraction)


@dataclass
class MttfRow:
    scheme: str
    expected_failures: float
    sim_time_ns: float
    mttf_ns: float


@dataclass
class MttfReport:
    rows: List[MttfRow]
    normalized_mttf: Optional[float]

    report_type = "mttf"
    csv_header = ("scheme", "expected_failures", "sim_time_ns", "mttf_ns")

    def csv_rows(self):
        for r in self.rows:
            yield (r.scheme, r.expected_failures, r.sim_time_ns, r.mttf_ns)

    def to_dict(self):
        return {
            "schemes": [dict(zip(self.csv_header, row)) for row in self.csv_rows()],
            "normalized_mttf": self.normalized_mttf,
        }


def normalized_mttf(baseline_failures, candidate_failures):
    """MTTF of the candidate relative to the baseline over the same trace."""
    if candidate_failures == 0.0:
        return 1.0 if baseline_failures == 0.0 else math.inf
    return baseline_failures / candidate_failures


def mttf_report(ledgers, sim_time_ns):
    """MTTF per ledger; normalized against the conventional run when REAP is present."""
    rows = [
        MttfRow(lg.scheme, lg.expected_failures, sim_time_ns, mttf_from_ledger(lg.expected_failures, sim_time_ns))
        for lg in ledgers
    ]
    by_scheme = {lg.scheme: lg for lg in ledgers}
    norm = None
    if Scheme.CONVENTIONAL.value in by_scheme and Scheme.REAP.value in by_scheme:
        norm = normalized_mttf(
            by_scheme[Scheme.CONVENTIONAL.value].expected_failures,
            by_scheme[Scheme.REAP.value].expected_failures,
        )
    return MttfReport(rows, norm)


def format_float(x):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


def _render(value, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_render(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [pad + _render(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(value, float):
        text = format_float(value)
        # Non-finite values have no JSON literal.
        return json.dumps(text) if not math.isfinite(value) else text
    return json.dumps(value)


def render_json(document):
    return _render(document, 2, 0) + "\n"


def report_document(report, meta=None):
    doc = {"schema_version": SCHEMA_VERSION, "report_type": report.report_type}
    if meta:
        doc.update(meta)
    doc.update(report.to_dict())
    return doc


def emit(report, fmt, sink, meta=None):
    """Write ``report`` to ``sink`` as ``"json"`` or ``"csv"``.

    ``meta`` entries (artifact version, config echo) are placed after
    ``schema_version``/``report_type`` in JSON output; CSV carries only the table.
    """
    fmt = fmt.lower()
    if fmt == "json":
        text = render_json(report_document(report, meta))
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(report.csv_header)
        for row in report.csv_rows():
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode("utf-8"))
